#include "kam/mechanics.hpp"

#include "kam/util.hpp"

#include <fftw3.h>
#include <gsl/gsl_chebyshev.h>
#include <gsl/gsl_integration.h>

#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

namespace kam {

Potential Potential::duffing(double alpha, double beta) { return {"duffing", {0.0, 0.0, alpha, 0.0, beta}}; }

Potential Potential::harmonic(double omega) { return {"harmonic", {0.0, 0.0, -0.5 * omega * omega}}; }

Potential Potential::polynomial(std::vector<double> c) { return {"polynomial", std::move(c)}; }

double Potential::V(double r) const { return dV(r, 0); }

double Potential::dV(double r, int order) const {
  double acc = 0.0;
  for (int k = static_cast<int>(coeffs.size()) - 1; k >= order; --k) {
    double f = 1.0;
    for (int q = 0; q < order; ++q) f *= (k - q);
    acc = acc * r + coeffs[k] * f;
  }
  return acc;
}

double Coupling::W(double d) const {
  if (name == "none") return 0.0;
  if (name == "cos_difference") return std::cos(d);
  if (name == "polynomial_difference") {
    double acc = 0.0;
    for (int k = static_cast<int>(coeffs.size()) - 1; k >= 0; --k) acc = acc * d + coeffs[k];
    return acc;
  }
  throw std::invalid_argument("unknown coupling " + name);
}

bool HamiltonianModel::coupling_bounded(double radius, int samples) const {
  for (int k = 0; k < samples; ++k) {
    const double d = -radius + 2.0 * radius * k / (samples - 1);
    if (std::abs(coupling.W(d)) > 1.0) return false;
  }
  return true;
}

PhaseState heliocentric(const PhaseState& s) {
  if (s.q.empty() || s.q.size() != s.p.size()) throw std::invalid_argument("heliocentric: empty or mismatched state");
  PhaseState r = s;
  const std::size_t n = s.q.size(), d = s.q[0].size();
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) r.q[i][k] = s.q[i][k] - s.q[0][k];
  for (std::size_t k = 0; k < d; ++k) {
    double tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) tot += s.p[i][k];
    r.p[0][k] = tot;
  }
  return r;
}

PhaseState heliocentric_inverse(const PhaseState& s) {
  if (s.q.empty() || s.q.size() != s.p.size()) throw std::invalid_argument("heliocentric: empty or mismatched state");
  PhaseState r = s;
  const std::size_t n = s.q.size(), d = s.q[0].size();
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) r.q[i][k] = s.q[i][k] + s.q[0][k];
  for (std::size_t k = 0; k < d; ++k) {
    double rest = 0.0;
    for (std::size_t i = 1; i < n; ++i) rest += s.p[i][k];
    r.p[0][k] = s.p[0][k] - rest;
  }
  return r;
}

PolarState polar_reduce(const Potential& V, const std::array<double, 2>& x, const std::array<double, 2>& y) {
  PolarState s;
  s.r = std::hypot(x[0], x[1]);
  if (s.r == 0.0) throw std::domain_error("polar reduction at r = 0 is singular");
  s.alpha = std::atan2(x[1], x[0]);
  s.R = (x[0] * y[0] + x[1] * y[1]) / s.r;
  s.G = x[0] * y[1] - x[1] * y[0];
  s.h = 0.5 * s.R * s.R + s.G * s.G / (2.0 * s.r * s.r) - V.V(s.r);
  return s;
}

void polar_expand(const PolarState& s, std::array<double, 2>& x, std::array<double, 2>& y) {
  if (s.r == 0.0) throw std::domain_error("polar expansion at r = 0 is singular");
  const double c = std::cos(s.alpha), sn = std::sin(s.alpha);
  x = {s.r * c, s.r * sn};
  y = {s.R * c - s.G / s.r * sn, s.R * sn + s.G / s.r * c};
}

namespace {

struct GLTable {
  explicit GLTable(int n) : t(gsl_integration_glfixed_table_alloc(n)), n(n) {}
  ~GLTable() { gsl_integration_glfixed_table_free(t); }
  GLTable(const GLTable&) = delete;
  GLTable& operator=(const GLTable&) = delete;
  gsl_integration_glfixed_table* t;
  int n;
};

const gsl_integration_glfixed_table* gl_table(int n) {
  thread_local std::vector<std::unique_ptr<GLTable>> cache;
  for (const auto& c : cache)
    if (c->n == n) return c->t;
  cache.push_back(std::make_unique<GLTable>(n));
  return cache.back()->t;
}

template <class F>
double find_root(F f, double lo, double hi) {
  boost::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace

RadialProblem::RadialProblem(Potential V, double G, double center, QuadratureConfig q)
    : V_(std::move(V)), G_(G), center_(center), q_(q) {
  if (G_ != 0.0 && !(center_ > 0.0)) throw std::invalid_argument("planar problem needs a positive radial centre");
}

double RadialProblem::U(double r) const {
  const double c = G_ == 0.0 ? 0.0 : G_ * G_ / (2.0 * r * r);
  return c - V_.V(r);
}

double RadialProblem::dU(double r) const {
  const double c = G_ == 0.0 ? 0.0 : -G_ * G_ / (r * r * r);
  return c - V_.dV(r, 1);
}

std::array<double, 2> RadialProblem::turning_points(double h) const {
  if (!(U(center_) < h)) throw std::domain_error("energy not above the potential at the centre");
  auto g = [&](double r) { return U(r) - h; };
  const double scale = std::max(1.0, std::abs(center_));
  double step = 1e-3 * scale, prev = center_, r = center_ + step;
  while (g(r) < 0.0) {
    prev = r;
    step *= 2.0;
    r = center_ + step;
    if (step > 1e6 * scale) throw std::domain_error("open level set: no right turning point");
  }
  const double rp = find_root(g, prev, r);
  step = 1e-3 * scale;
  prev = center_;
  r = center_ - step;
  if (G_ != 0.0 && r <= 0.0) r = 0.5 * center_;
  while (g(r) < 0.0) {
    prev = r;
    if (G_ != 0.0) {
      r *= 0.5;
      if (r < 1e-300) throw std::domain_error("no left turning point");
    } else {
      step *= 2.0;
      r = center_ - step;
      if (step > 1e6 * scale) throw std::domain_error("open level set: no left turning point");
    }
  }
  const double rm = find_root(g, r, prev);
  return {rm, rp};
}

template <class F>
double RadialProblem::integrate_between_turning_points(double h, F f) const {
  const auto tp = turning_points(h);
  const double c = 0.5 * (tp[0] + tp[1]), w = 0.5 * (tp[1] - tp[0]);
  const auto* tab = gl_table(q_.nodes);
  double sum = 0.0;
  for (int k = 0; k < q_.nodes; ++k) {
    double th, wt;
    gsl_integration_glfixed_point(-0.5 * std::numbers::pi, 0.5 * std::numbers::pi, k, &th, &wt, tab);
    const double r = c + w * std::sin(th);
    const double gap = std::max(h - U(r), 0.0);
    sum += wt * f(r, gap) * w * std::cos(th);
  }
  return sum;
}

double RadialProblem::action(double h) const {
  return integrate_between_turning_points(h, [](double, double gap) { return std::sqrt(2.0 * gap); }) /
         std::numbers::pi;
}

double RadialProblem::daction_dh(double h) const {
  return integrate_between_turning_points(h, [](double, double gap) { return 1.0 / std::sqrt(2.0 * gap); }) /
         std::numbers::pi;
}

double RadialProblem::daction_dG(double h) const {
  const double G = G_;
  return -integrate_between_turning_points(
             h, [G](double r, double gap) { return (G / (r * r)) / std::sqrt(2.0 * gap); }) /
         std::numbers::pi;
}

double RadialProblem::energy_of_action(double L, double h_lo, double h_hi) const {
  return find_root([&](double h) { return action(h) - L; }, h_lo, h_hi);
}

namespace {

using ChebPtr = std::shared_ptr<gsl_cheb_series>;

ChebPtr fit_cheb(int degree, double a, double b, const std::function<double(double)>& f) {
  ChebPtr cs(gsl_cheb_alloc(degree), gsl_cheb_free);
  gsl_function F;
  F.function = [](double x, void* p) { return (*static_cast<const std::function<double(double)>*>(p))(x); };
  F.params = const_cast<std::function<double(double)>*>(&f);
  gsl_cheb_init(cs.get(), &F, a, b);
  return cs;
}

std::vector<double> cheb_coeffs(const ChebPtr& c) { return {c->c, c->c + c->order + 1}; }

// Evaluates a stored coefficient vector through a temporary GSL series.
double cheb_eval(const std::vector<double>& coef, double a, double b, double x, bool derivative) {
  const std::size_t order = coef.size() - 1;
  ChebPtr cs(gsl_cheb_alloc(order), gsl_cheb_free);
  std::copy(coef.begin(), coef.end(), cs->c);
  cs->a = a;
  cs->b = b;
  if (!derivative) return gsl_cheb_eval(cs.get(), x);
  ChebPtr d(gsl_cheb_alloc(order), gsl_cheb_free);
  gsl_cheb_calc_deriv(d.get(), cs.get());
  return gsl_cheb_eval(d.get(), x);
}

}  // namespace

ActionAngleChart::ActionAngleChart(RadialProblem prob, double h_lo, double h_hi)
    : prob_(std::move(prob)), a_(h_lo), b_(h_hi) {
  if (!(h_lo < h_hi)) throw std::invalid_argument("chart needs h_lo < h_hi");
  const int deg = 32;
  auto cL = fit_cheb(deg, a_, b_, [this](double h) { return prob_.action(h); });
  auto cw = fit_cheb(deg, a_, b_, [this](double h) { return prob_.frequency(h); });
  cheb_L_ = cheb_coeffs(cL);
  cheb_w_ = cheb_coeffs(cw);
  for (int k = 0; k < 2 * deg; ++k) {
    const double h = a_ + (b_ - a_) * (k + 0.5) / (2 * deg);
    res_L_ = std::max(res_L_, std::abs(gsl_cheb_eval(cL.get(), h) - prob_.action(h)));
    res_w_ = std::max(res_w_, std::abs(gsl_cheb_eval(cw.get(), h) - prob_.frequency(h)));
  }
}

double ActionAngleChart::action_fit(double h) const { return cheb_eval(cheb_L_, a_, b_, h, false); }

double ActionAngleChart::twist(double h) const {
  return cheb_eval(cheb_w_, a_, b_, h, false) * cheb_eval(cheb_w_, a_, b_, h, true);
}

double ActionAngleChart::twist_fd(double h, double step, double* halving_gap) const {
  auto D = [&](double s) { return (prob_.frequency(h + s) - prob_.frequency(h - s)) / (2.0 * s); };
  const double d1 = D(step), d2 = D(0.5 * step);
  if (halving_gap) *halving_gap = std::abs(d2 - d1) / std::max(std::abs(d2), 1e-300);
  return prob_.frequency(h) * (4.0 * d2 - d1) / 3.0;
}

ActionAngleChart action_map(const Potential& V, double h_lo, double h_hi, double center, QuadratureConfig q) {
  return ActionAngleChart(RadialProblem(V, 0.0, center, q), h_lo, h_hi);
}

namespace {

double radial_minimum(const Potential& V, double G, double guess) {
  RadialProblem p(V, G, std::max(guess, 1e-6));
  auto d = [&](double r) { return p.dU(r); };
  double lo = std::max(guess, 1e-6), hi = lo;
  while (d(lo) > 0.0) lo *= 0.5;
  while (d(hi) < 0.0) hi *= 2.0;
  return find_root(d, lo, hi);
}

struct PlanarDerivs {
  double L, Lh, LG;
};

PlanarDerivs planar_derivs(const Potential& V, double h, double G, double center, QuadratureConfig q) {
  RadialProblem p(V, G, radial_minimum(V, G, center), q);
  return {p.action(h), p.daction_dh(h), p.daction_dG(h)};
}

std::array<double, 2> planar_grad(const Potential& V, double h, double G, double center, QuadratureConfig q) {
  auto d = planar_derivs(V, h, G, center, q);
  return {1.0 / d.Lh, -d.LG / d.Lh};
}

}  // namespace

FrequencyPoint frequency_chart(const Potential& V, double h, double G, double center, const FrequencyChartConfig& cfg) {
  if (G == 0.0) throw std::invalid_argument("planar chart needs G != 0");
  FrequencyPoint fp;
  fp.h = h;
  fp.G = G;
  auto d0 = planar_derivs(V, h, G, center, cfg.quad);
  fp.L = d0.L;
  fp.grad = {1.0 / d0.Lh, -d0.LG / d0.Lh};
  auto jac = [&](double s) {
    const double sh = s * std::max(1.0, std::abs(h)), sg = s * std::max(1.0, std::abs(G));
    auto hp = planar_grad(V, h + sh, G, center, cfg.quad), hm = planar_grad(V, h - sh, G, center, cfg.quad);
    auto gp = planar_grad(V, h, G + sg, center, cfg.quad), gm = planar_grad(V, h, G - sg, center, cfg.quad);
    return std::array<double, 4>{(hp[0] - hm[0]) / (2 * sh), (gp[0] - gm[0]) / (2 * sg), (hp[1] - hm[1]) / (2 * sh),
                                 (gp[1] - gm[1]) / (2 * sg)};
  };
  const auto D1 = jac(cfg.fd_step), D2 = jac(0.5 * cfg.fd_step);
  std::array<double, 4> D{};
  double gap = 0.0, scale = 0.0;
  for (int k = 0; k < 4; ++k) {
    D[k] = (4.0 * D2[k] - D1[k]) / 3.0;
    gap = std::max(gap, std::abs(D2[k] - D1[k]));
    scale = std::max(scale, std::abs(D2[k]));
  }
  fp.richardson_gap = scale > 0 ? gap / scale : gap;
  // d(h,G)/d(L,G) = [[1/L_h, -L_G/L_h], [0, 1]].
  const double a = 1.0 / d0.Lh, b = -d0.LG / d0.Lh;
  fp.hessian = {D[0] * a, D[0] * b + D[1], D[2] * a, D[2] * b + D[3]};
  fp.det = fp.hessian[0] * fp.hessian[3] - fp.hessian[1] * fp.hessian[2];
  const double hs = std::max({std::abs(fp.hessian[0]), std::abs(fp.hessian[1]), std::abs(fp.hessian[3]), 1e-300});
  fp.singular = std::abs(fp.det) < cfg.singular_threshold * std::max(1.0, hs * hs);
  return fp;
}

double planar_energy(const Potential& V, double L, double G, double center, double h_lo, double h_hi,
                     QuadratureConfig q) {
  RadialProblem p(V, G, radial_minimum(V, G, center), q);
  return p.energy_of_action(L, h_lo, h_hi);
}

P2Report check_P2(const Potential& V, double r_guess, double gamma, int sites, int cutoff, double invert_tol) {
  P2Report rep;
  // Newton on U'(r) = -V'(r) = 0.
  double r = r_guess;
  for (int it = 0; it < 100; ++it) {
    const double f = -V.dV(r, 1), fp = -V.dV(r, 2);
    if (fp == 0.0) break;
    const double dr = f / fp;
    r -= dr;
    if (std::abs(dr) <= 1e-16 * std::max(1.0, std::abs(r))) break;
  }
  rep.r_star = r;
  const double U2 = -V.dV(r, 2);
  if (!(U2 > 0.0)) {
    rep.frequency_ok = false;
    rep.quartic_invertible = false;
    return rep;
  }
  rep.omega0 = std::sqrt(U2);
  DCReport dc = diophantine_check(std::vector<double>(sites, rep.omega0), gamma, 0.0, cutoff);
  rep.frequency_ok = dc.pass;
  rep.witness = dc.witness;
  // U = w^2 x^2/2 + (a/3) x^3 + (b/4) x^4 about r*: a = U'''/2, b = U''''/6.
  const double a = -V.dV(r, 3) / 2.0, b = -V.dV(r, 4) / 6.0, w = rep.omega0;
  rep.anharmonic = (2.0 / w) * (3.0 * b / (8.0 * w) - 5.0 * a * a / (12.0 * w * w * w));
  rep.quartic_invertible = std::abs(rep.anharmonic) >= invert_tol;
  return rep;
}

P1Report check_P1(const std::vector<double>& xi0, const std::vector<double>& twists, double gamma, double tau,
                  int cutoff, double twist_tol) {
  P1Report rep;
  rep.diophantine = diophantine_check(xi0, gamma, tau, cutoff);
  rep.twist = twists;
  for (double t : twists) {
    if (std::abs(t) < twist_tol) rep.twist_ok = false;
    rep.sup_inverse_twist = std::max(rep.sup_inverse_twist, 1.0 / std::max(std::abs(t), 1e-300));
  }
  rep.pass = rep.diophantine.pass && rep.twist_ok;
  return rep;
}

namespace {

using OdeState = std::array<double, 2>;

// Integrates x' = y, y' = -U'(x) from the right turning point for time t.
OdeState orbit_at(const RadialProblem& prob, double r_plus, double t) {
  OdeState s{r_plus, 0.0};
  if (t <= 0.0) return s;
  namespace ode = boost::numeric::odeint;
  auto rhs = [&](const OdeState& x, OdeState& dx, double) {
    dx[0] = x[1];
    dx[1] = -prob.dU(x[0]);
  };
  ode::integrate_adaptive(ode::make_controlled(1e-14, 1e-14, ode::runge_kutta_fehlberg78<OdeState>()), rhs, s, 0.0,
                          t, 1e-3);
  return s;
}

}  // namespace

OrbitTable orbit_table(const RadialProblem& prob, double h, int n) {
  if (prob.G() != 0.0) throw std::invalid_argument("orbit tables are for one-dimensional sites");
  OrbitTable tab;
  tab.h = h;
  tab.omega = prob.frequency(h);
  const double rp = prob.turning_points(h)[1];
  const double T = 2.0 * std::numbers::pi / tab.omega;
  namespace ode = boost::numeric::odeint;
  std::vector<double> times(n);
  for (int k = 0; k < n; ++k) times[k] = T * k / n;
  OdeState s{rp, 0.0};
  auto rhs = [&](const OdeState& x, OdeState& dx, double) {
    dx[0] = x[1];
    dx[1] = -prob.dU(x[0]);
  };
  tab.x.reserve(n);
  tab.y.reserve(n);
  ode::integrate_times(ode::make_controlled(1e-14, 1e-14, ode::runge_kutta_fehlberg78<OdeState>()), rhs, s,
                       times.begin(), times.end(), 1e-3, [&](const OdeState& x, double) {
                         tab.x.push_back(x[0]);
                         tab.y.push_back(x[1]);
                       });
  return tab;
}

namespace {

double site_twist(const RadialProblem& p, double h) {
  const double s = 1e-4 * std::max(1.0, std::abs(h));
  auto D = [&](double q) { return (p.frequency(h + q) - p.frequency(h - q)) / (2.0 * q); };
  return p.frequency(h) * (4.0 * D(0.5 * s) - D(s)) / 3.0;
}

struct Fft2 {
  explicit Fft2(int n) : n(n) {
    in = fftw_alloc_complex(n * n);
    out = fftw_alloc_complex(n * n);
    plan = fftw_plan_dft_2d(n, n, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
  }
  ~Fft2() {
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;
  int n;
  fftw_complex* in;
  fftw_complex* out;
  fftw_plan plan;
};

}  // namespace

NormalFormResult to_normal_form(const HamiltonianModel& model, const NormParams& p, const NormalFormOptions& opt) {
  if (model.dim != 1) throw std::invalid_argument("to_normal_form supports one-dimensional sites only");
  if (static_cast<int>(model.site_energies.size()) != model.sites)
    throw std::invalid_argument("one reference energy per site is required");
  const int N = model.sites, n = opt.grid;
  const MassVector m = model.masses();
  NormalFormResult res;
  res.H = TFSeries(N);
  res.P_h = TFSeries(N);
  res.P_tilde = TFSeries(N);
  std::vector<RadialProblem> probs;
  for (int i = 0; i < N; ++i) {
    probs.emplace_back(model.potential, 0.0, model.well_center);
    const double h = model.site_energies[i];
    res.actions.push_back(probs[i].action(h));
    res.xi0.push_back(probs[i].frequency(h));
    res.twists.push_back(site_twist(probs[i], h));
    res.constant += m(i + 1) * h;
    const int j = i + 1;
    res.P_h.add(MonomialKey({j}, {0}, {2}), 0.5 * m(j) * res.twists[i]);
  }
  res.H = normal_form(res.xi0, m) + res.P_h;
  if (model.epsilon == 0.0 || model.coupling.name == "none") return res;

  // Orbit tables at I* + s dI, s in {-1, 0, 1}.
  std::vector<std::array<OrbitTable, 3>> tabs(N);
  std::vector<double> dI(N);
  for (int i = 0; i < N; ++i) {
    dI[i] = opt.action_step * std::max(res.actions[i], 1e-3);
    const double h = model.site_energies[i], span = 50.0 * res.xi0[i] * dI[i];
    for (int s = -1; s <= 1; ++s) {
      const double hs = s == 0 ? h : probs[i].energy_of_action(res.actions[i] + s * dI[i], h - span, h + span);
      tabs[i][s + 1] = orbit_table(probs[i], hs, n);
    }
  }
  Fft2 fft(n);
  const std::array<std::array<int, 2>, 6> orders{{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}}};
  double cmax = 0.0;
  struct Raw {
    MonomialKey key;
    cplx c;
  };
  std::vector<Raw> raw;
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      const double pref = model.epsilon * m(i + 1) * m(j + 1);
      auto f = [&](int si, int sj, int a, int b) {
        return model.coupling.W(tabs[i][si + 1].x[a] - tabs[j][sj + 1].x[b]);
      };
      for (const auto& ord : orders) {
        const double di = dI[i], dj = dI[j];
        for (int a = 0; a < n; ++a) {
          for (int b = 0; b < n; ++b) {
            double v;
            if (ord == std::array<int, 2>{0, 0}) v = f(0, 0, a, b);
            else if (ord == std::array<int, 2>{1, 0}) v = (f(1, 0, a, b) - f(-1, 0, a, b)) / (2 * di);
            else if (ord == std::array<int, 2>{0, 1}) v = (f(0, 1, a, b) - f(0, -1, a, b)) / (2 * dj);
            else if (ord == std::array<int, 2>{2, 0}) v = (f(1, 0, a, b) - 2 * f(0, 0, a, b) + f(-1, 0, a, b)) / (2 * di * di);
            else if (ord == std::array<int, 2>{0, 2}) v = (f(0, 1, a, b) - 2 * f(0, 0, a, b) + f(0, -1, a, b)) / (2 * dj * dj);
            else v = (f(1, 1, a, b) - f(1, -1, a, b) - f(-1, 1, a, b) + f(-1, -1, a, b)) / (4 * di * dj);
            fft.in[a * n + b][0] = v;
            fft.in[a * n + b][1] = 0.0;
          }
        }
        fftw_execute(fft.plan);
        for (int a = 0; a < n; ++a) {
          for (int b = 0; b < n; ++b) {
            const int li = a < n / 2 ? a : a - n, lj = b < n / 2 ? b : b - n;
            const cplx c(fft.out[a * n + b][0] / (n * n), fft.out[a * n + b][1] / (n * n));
            if (ord[0] + ord[1] == 0 && (std::abs(li) >= n / 2 - 2 || std::abs(lj) >= n / 2 - 2)) res.fft_tail = std::max(res.fft_tail, std::abs(c));
            if (std::abs(li) + std::abs(lj) > opt.fourier_cap) continue;
            if (li == 0 && lj == 0 && ord[0] == 0 && ord[1] == 0) {
              res.constant += pref * c.real();
              continue;
            }
            cmax = std::max(cmax, std::abs(c));
            raw.push_back({MonomialKey(std::vector<SiteTerm>{{i + 1, li, ord[0]}, {j + 1, lj, ord[1]}}), pref * c});
          }
        }
      }
    }
  }
  if (cmax > 0.0 && res.fft_tail > opt.tail_tolerance * cmax)
    throw std::runtime_error("FFT aliasing: relative tail coefficient " + fmt_double(res.fft_tail / cmax) +
                             " above tolerance; increase the grid");
  for (const auto& r : raw) {
    if (std::abs(r.c) <= opt.drop * cmax * std::abs(model.epsilon)) continue;
    res.P_tilde.add(r.key, r.c);
  }
  res.H += res.P_tilde;
  res.norm_P_tilde = weighted_norm(res.P_tilde, m, p);
  return res;
}

double model_energy_at(const HamiltonianModel& model, const NormalFormResult& nf, const std::vector<double>& phi,
                       const std::vector<double>& J) {
  const int N = model.sites;
  const MassVector m = model.masses();
  std::vector<double> x(N);
  double e = 0.0;
  for (int i = 0; i < N; ++i) {
    RadialProblem p(model.potential, 0.0, model.well_center);
    const double L = nf.actions[i] + J[i], h0 = model.site_energies[i];
    const double span = 50.0 * nf.xi0[i] * std::max(std::abs(J[i]), 1e-8);
    const double h = J[i] == 0.0 ? h0 : p.energy_of_action(L, h0 - span, h0 + span);
    const double w = p.frequency(h);
    double ang = std::fmod(phi[i], 2.0 * std::numbers::pi);
    if (ang < 0) ang += 2.0 * std::numbers::pi;
    x[i] = orbit_at(p, p.turning_points(h)[1], ang / w)[0];
    e += m(i + 1) * h;
  }
  for (int i = 0; i < N; ++i)
    for (int j = i + 1; j < N; ++j) e += model.epsilon * m(i + 1) * m(j + 1) * model.coupling.W(x[i] - x[j]);
  return e;
}

}  // namespace kam

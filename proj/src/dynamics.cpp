#include "kam/dynamics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "kam/util.hpp"

namespace kam {

void HamiltonianSystem::jacobian(const std::vector<double>& x, std::vector<double>& jac) const {
  const int d = dim();
  jac.assign(static_cast<std::size_t>(d) * d, 0.0);
  std::vector<double> xp = x, fp(d), fm(d);
  for (int c = 0; c < d; ++c) {
    const double hs = fd_step * (1.0 + std::abs(x[c]));
    xp[c] = x[c] + hs;
    field(xp, fp);
    xp[c] = x[c] - hs;
    field(xp, fm);
    xp[c] = x[c];
    for (int r = 0; r < d; ++r) jac[r * d + c] = (fp[r] - fm[r]) / (2 * hs);
  }
}

LongRangeSystem::LongRangeSystem(std::vector<double> xi, std::vector<double> masses, double eps, double quadratic)
    : xi_(std::move(xi)), m_(std::move(masses)), eps_(eps), q_(quadratic) {
  if (m_.size() < xi_.size()) throw std::invalid_argument("mass list shorter than the frequency vector");
  if (!(m_.at(0) > 0.0)) throw std::invalid_argument("m_1 must be positive");
}

LongRangeSystem::LongRangeSystem(const LongRangeModel& m)
    : LongRangeSystem(m.xi, m.masses.weights(), m.eps, m.quadratic) {}

void LongRangeSystem::field(const std::vector<double>& x, std::vector<double>& dx) const {
  const int N = sites();
  dx.resize(2 * N);
  double j1 = 0.0;
  for (int n = 0; n < N; ++n) dx[n] = xi_[n] + q_ * x[N + n];
  for (int i = 1; i < N; ++i) {
    const double s = std::sin(x[0] - x[i]);
    j1 += m_[i] * s;
    dx[N + i] = -eps_ * m_[0] * s;
  }
  dx[N] = eps_ * j1;
}

void LongRangeSystem::jacobian(const std::vector<double>& x, std::vector<double>& jac) const {
  const int N = sites(), d = 2 * N;
  jac.assign(static_cast<std::size_t>(d) * d, 0.0);
  for (int n = 0; n < N; ++n) jac[n * d + N + n] = q_;
  for (int i = 1; i < N; ++i) {
    const double c = std::cos(x[0] - x[i]);
    jac[N * d + 0] += eps_ * m_[i] * c;
    jac[N * d + i] -= eps_ * m_[i] * c;
    jac[(N + i) * d + 0] = -eps_ * m_[0] * c;
    jac[(N + i) * d + i] = eps_ * m_[0] * c;
  }
}

double LongRangeSystem::energy(const std::vector<double>& x) const {
  const int N = sites();
  double e = 0.0;
  for (int n = 0; n < N; ++n) e += m_[n] * (xi_[n] * x[N + n] + 0.5 * q_ * x[N + n] * x[N + n]);
  for (int i = 1; i < N; ++i) e += eps_ * m_[0] * m_[i] * std::cos(x[0] - x[i]);
  return e;
}

SeriesSystem::SeriesSystem(const TFSeries& H, const MassVector& m) : n_(H.n_max()), H_(H), m_(m) {
  if (m.size() < n_) throw std::invalid_argument("mass vector shorter than N_max");
  for (int j = 1; j <= n_; ++j) {
    dphi_.push_back(d_phi(H, j));
    dJ_.push_back(d_J(H, j));
  }
}

void SeriesSystem::field(const std::vector<double>& x, std::vector<double>& dx) const {
  std::vector<double> phi(x.begin(), x.begin() + n_), J(x.begin() + n_, x.begin() + 2 * n_);
  dx.resize(2 * n_);
  for (int j = 0; j < n_; ++j) {
    dx[j] = evaluate(dJ_[j], phi, J).real() / m_(j + 1);
    dx[n_ + j] = -evaluate(dphi_[j], phi, J).real() / m_(j + 1);
  }
}

double SeriesSystem::energy(const std::vector<double>& x) const {
  std::vector<double> phi(x.begin(), x.begin() + n_), J(x.begin() + n_, x.begin() + 2 * n_);
  return evaluate(H_, phi, J).real();
}

namespace {

constexpr double kYoshidaA = 1.3512071919596578;   // 1 / (2 - 2^{1/3})
constexpr double kYoshidaB = -1.7024143839193153;  // -2^{1/3} / (2 - 2^{1/3})

// Solves the midpoint equation; returns the midpoint state in mid.
void solve_midpoint(const HamiltonianSystem& sys, std::vector<double>& x, double h, double tol, int max_sweeps,
                    std::vector<double>& mid, StepStats* stats) {
  const int d = sys.dim();
  std::vector<double> f(d), x1(d);
  sys.field(x, f);
  for (int i = 0; i < d; ++i) x1[i] = x[i] + h * f[i];
  mid.resize(d);
  int sweep = 0;
  for (;;) {
    ++sweep;
    for (int i = 0; i < d; ++i) mid[i] = 0.5 * (x[i] + x1[i]);
    sys.field(mid, f);
    double diff = 0.0;
    for (int i = 0; i < d; ++i) {
      const double xn = x[i] + h * f[i];
      diff = std::max(diff, std::abs(xn - x1[i]) / (1.0 + std::abs(xn)));
      x1[i] = xn;
    }
    if (diff <= tol) break;
    if (sweep >= max_sweeps)
      throw std::runtime_error("implicit midpoint fixed point did not converge in " + std::to_string(max_sweeps) +
                               " sweeps; reduce the step size");
  }
  for (int i = 0; i < d; ++i) mid[i] = 0.5 * (x[i] + x1[i]);
  x = x1;
  if (stats) stats->max_sweeps_used = std::max(stats->max_sweeps_used, sweep);
}

std::vector<double> substeps(const FlowSpec& spec) {
  if (spec.integrator == "implicit-midpoint") return {spec.h};
  if (spec.integrator == "yoshida4-midpoint") return {kYoshidaA * spec.h, kYoshidaB * spec.h, kYoshidaA * spec.h};
  throw std::invalid_argument("unknown integrator " + spec.integrator);
}

// Advances x and the tangent vector v by one step of the chosen scheme.
void tangent_step(const HamiltonianSystem& sys, std::vector<double>& x, std::vector<double>& v, const FlowSpec& spec,
                  StepStats* stats) {
  const int d = sys.dim();
  std::vector<double> mid, jac;
  for (double h : substeps(spec)) {
    solve_midpoint(sys, x, h, spec.tol, spec.max_sweeps, mid, stats);
    sys.jacobian(mid, jac);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d), B = Eigen::MatrixXd::Identity(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) {
        A(r, c) -= 0.5 * h * jac[r * d + c];
        B(r, c) += 0.5 * h * jac[r * d + c];
      }
    Eigen::VectorXd rhs = B * Eigen::Map<Eigen::VectorXd>(v.data(), d);
    Eigen::VectorXd nv = A.partialPivLu().solve(rhs);
    for (int i = 0; i < d; ++i) v[i] = nv[i];
  }
}

}  // namespace

void midpoint_step(const HamiltonianSystem& sys, std::vector<double>& x, double h, double tol, int max_sweeps,
                   StepStats* stats) {
  std::vector<double> mid;
  solve_midpoint(sys, x, h, tol, max_sweeps, mid, stats);
}

void flow_step(const HamiltonianSystem& sys, std::vector<double>& x, const FlowSpec& spec, StepStats* stats) {
  for (double h : substeps(spec)) midpoint_step(sys, x, h, spec.tol, spec.max_sweeps, stats);
}

Trajectory integrate(const HamiltonianSystem& sys, const FlowSpec& spec, const std::vector<double>& x0) {
  if (!(std::abs(spec.h) > 0.0) || !(spec.tol > 0.0)) throw std::invalid_argument("step and tolerance must be nonzero");
  const long steps = std::lround(spec.T / std::abs(spec.h));
  Trajectory tr;
  std::vector<double> x = x0;
  const double e0 = sys.energy(x);
  tr.t.push_back(0.0);
  tr.x.push_back(x);
  StepStats st;
  for (long k = 1; k <= steps; ++k) {
    flow_step(sys, x, spec, &st);
    tr.energy_drift = std::max(tr.energy_drift, std::abs(sys.energy(x) - e0));
    if (k % spec.record_every == 0 || k == steps) {
      tr.t.push_back(k * spec.h);
      tr.x.push_back(x);
    }
  }
  tr.max_sweeps_used = st.max_sweeps_used;
  return tr;
}

DriftReport verify_torus(const HamiltonianSystem& sys, const TorusEmbedding& emb, const FlowSpec& spec,
                         const std::vector<std::vector<double>>& phi0_samples, int checkpoints) {
  const int N = sys.sites();
  const long steps = std::lround(spec.T / spec.h);
  const long every = std::max<long>(1, steps / std::max(1, checkpoints));
  DriftReport rep;
  for (long k = 0; k <= steps; k += every) rep.times.push_back(k * spec.h);
  const std::size_t nc = rep.times.size();
  rep.deviation.assign(nc, 0.0);
  rep.action_defect.assign(nc, 0.0);
  rep.phase_deviation.assign(nc, 0.0);
  std::vector<double> zero(N, 0.0);
  for (const auto& phi0 : phi0_samples) {
    std::vector<double> xp, xJ;
    emb.evaluate(phi0, xp, xJ);
    std::vector<double> x(2 * N);
    for (int j = 0; j < N; ++j) {
      x[j] = xp[j];
      x[N + j] = xJ[j];
    }
    const double e0 = sys.energy(x);
    long k = 0;
    for (std::size_t c = 0; c < nc; ++c) {
      const long target = std::lround(rep.times[c] / spec.h);
      while (k < target) {
        flow_step(sys, x, spec);
        ++k;
      }
      rep.energy_drift = std::max(rep.energy_drift, std::abs(sys.energy(x) - e0));
      std::vector<double> lin(N);
      for (int j = 0; j < N; ++j) lin[j] = phi0[j] + emb.omega[j] * rep.times[c];
      emb.evaluate(lin, xp, xJ);
      double dphi = 0.0, dJ = 0.0;
      for (int j = 0; j < N; ++j) {
        dphi = std::max(dphi, std::abs(x[j] - xp[j]));
        dJ = std::max(dJ, std::abs(x[N + j] - xJ[j]));
      }
      std::vector<double> cur(x.begin(), x.begin() + N);
      std::vector<double> psi = emb.project_angles(cur);
      double defect = 0.0;
      for (int j = 0; j < N; ++j) defect = std::max(defect, std::abs(x[N + j] - evaluate(emb.w[j], psi, zero).real()));
      rep.deviation[c] = std::max(rep.deviation[c], std::max(dphi, dJ));
      rep.phase_deviation[c] = std::max(rep.phase_deviation[c], dphi);
      rep.action_defect[c] = std::max(rep.action_defect[c], defect);
    }
  }
  for (std::size_t c = 0; c < nc; ++c) {
    rep.sup_deviation = std::max(rep.sup_deviation, rep.deviation[c]);
    rep.sup_phase_deviation = std::max(rep.sup_phase_deviation, rep.phase_deviation[c]);
    rep.sup_action_defect = std::max(rep.sup_action_defect, rep.action_defect[c]);
  }
  return rep;
}

namespace {

double run_tangent(const HamiltonianSystem& sys, const FlowSpec& spec, std::vector<double>& x, std::vector<double> v,
                   const std::function<void(const std::vector<double>&)>& on_step) {
  double norm = 0.0;
  for (double c : v) norm += c * c;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw std::invalid_argument("tangent vector must be nonzero");
  for (double& c : v) c /= norm;
  const long steps = std::lround(spec.T / spec.h);
  double log_sum = 0.0;
  for (long k = 0; k < steps; ++k) {
    tangent_step(sys, x, v, spec, nullptr);
    double n2 = 0.0;
    for (double c : v) n2 += c * c;
    const double nv = std::sqrt(n2);
    log_sum += std::log(nv);
    for (double& c : v) c /= nv;
    if (on_step) on_step(x);
  }
  return log_sum / (steps * spec.h);
}

}  // namespace

LyapunovResult finite_time_lyapunov(const HamiltonianSystem& sys, const FlowSpec& spec, const std::vector<double>& x0,
                                    const std::vector<double>& v0) {
  LyapunovResult r;
  r.final_state = x0;
  r.exponent = run_tangent(sys, spec, r.final_state, v0, nullptr);
  return r;
}

std::vector<double> strip_frequencies(const StripConfig& c, double detuning) {
  std::vector<double> xi(c.N);
  xi[0] = 1.0;
  for (int k = 2; k <= c.N; ++k) xi[k - 1] = 1.0 + 0.15 * (k - 1) + 0.0131 * (k - 1) * (k - 1);
  xi[c.resonant_site - 1] = 1.0 + detuning;
  return xi;
}

std::vector<StripRow> resonant_strip_experiment(const StripConfig& c) {
  if (c.resonant_site < 2 || c.resonant_site > c.N) throw std::invalid_argument("resonant site must lie in 2..N");
  const MassVector m = strip_masses(c.N, c.delta > 0 ? c.delta : 1.0);
  std::vector<double> masses = m.weights();
  if (c.delta == 0.0)
    for (int i = 1; i < c.N; ++i) masses[i] = 0.0;
  const double se = std::sqrt(c.eps);
  const int N = c.N, js = c.resonant_site - 1;
  FlowSpec spec;
  spec.h = c.h;
  spec.T = c.T;

  std::vector<StripRow> rows;
  for (double dn : c.detunings_sqrt_eps) {
    const double det = dn * se;
    const std::vector<double> xi = strip_frequencies(c, det);
    LongRangeSystem sys(xi, masses, c.eps), base(xi, masses, 0.0);
    std::vector<double> ftle(c.ensemble), ftle0(c.ensemble), cross(c.ensemble);
    auto member = [&](int e) {
      std::vector<double> x(2 * N), v(2 * N, 0.0);
      for (int k = 0; k < N; ++k) {
        x[k] = 2.0 * std::numbers::pi * uniform01(c.seed, 2 * e, k);
        x[N + k] = c.action_radius * se * (2.0 * uniform01(c.seed, 2 * e + 1, k) - 1.0);
      }
      const int block[4] = {0, js, N, N + js};
      for (int b = 0; b < 4; ++b) v[block[b]] = 2.0 * uniform01(c.seed ^ 0x5bd1e995ULL, e, b) - 1.0;
      std::vector<double> x0 = x;
      int crossings = 0;
      int last_sign = 0;
      ftle[e] = run_tangent(sys, spec, x, v, [&](const std::vector<double>& s) {
        const double rate = (xi[js] + s[N + js]) - (xi[0] + s[N]);
        const int sg = rate > 0 ? 1 : (rate < 0 ? -1 : 0);
        if (sg != 0 && last_sign != 0 && sg != last_sign) ++crossings;
        if (sg != 0) last_sign = sg;
      });
      cross[e] = crossings;
      ftle0[e] = run_tangent(base, spec, x0, v, nullptr);
    };
    const int W = std::max(1, c.workers);
    if (W == 1) {
      for (int e = 0; e < c.ensemble; ++e) member(e);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < W; ++w)
        pool.emplace_back([&, w] {
          for (int e = w; e < c.ensemble; e += W) member(e);
        });
      for (auto& t : pool) t.join();
    }
    StripRow row;
    row.site = c.resonant_site;
    row.detuning = det;
    row.detuning_sqrt_eps = dn;
    row.inside = dn <= c.varrho;
    for (int e = 0; e < c.ensemble; ++e) {
      row.ftle += ftle[e] / c.ensemble;
      row.ftle_baseline += ftle0[e] / c.ensemble;
      row.ftle_excess += (ftle[e] - ftle0[e]) / c.ensemble;
      row.crossings += cross[e] / c.ensemble;
    }
    const double period = 2.0 * std::numbers::pi / se;
    row.indicator = row.crossings * period / c.T;
    row.indicator_floor = period / c.T;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace kam

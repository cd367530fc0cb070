#include "kam/kam.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "kam/util.hpp"

namespace kam {

namespace {

std::string join(const std::vector<int>& v) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ']';
  return os.str();
}

constexpr double kLogTol = 1e-12;

}  // namespace

SmallDivisorViolation::SmallDivisorViolation(std::vector<int> A_, std::vector<int> l_, double v, int n)
    : EngineError("SmallDivisorViolation",
                  "small divisor " + fmt_double(v) + " at A=" + join(A_) + " l=" + join(l_)),
      A(std::move(A_)),
      l(std::move(l_)),
      value(v),
      stage(n) {}

int KamSchedule::fourier_cutoff(int n) const {
  return static_cast<int>(std::floor(L.at(n) + 1e-9));
}

NormParams KamSchedule::half_params(int n) const {
  return {beta.at(n) - mu.at(n), rho.at(n + 1), sigma.at(n) - s.at(n)};
}

double KamSchedule::frequency_margin(int n) const {
  const double L_n = L.at(n);
  if (L_n <= 0.0) return std::numeric_limits<double>::infinity();
  return std::pow(eps.at(n), 1.0 / 12.0) / (2.0 * L_n);
}

KamSchedule build_schedule(double eps0, double beta0, double rho, double sigma, int n_stages, double box_width) {
  if (!(eps0 > 0.0 && eps0 < 1.0)) throw std::invalid_argument("eps0 must lie in (0,1)");
  if (!(beta0 > 0.0 && beta0 < 1.0)) throw std::invalid_argument("beta0 must lie in (0,1)");
  if (!(rho > 0.0) || !(sigma > 0.0)) throw std::invalid_argument("rho and sigma must be positive");
  if (n_stages < 0) throw std::invalid_argument("stage count must be nonnegative");
  KamSchedule k;
  k.eps0 = eps0;
  k.beta0 = beta0;
  k.rho0 = rho;
  k.sigma0 = sigma;
  k.n_stages = n_stages;
  const int N = n_stages + 1;
  k.eps.resize(N + 1);
  k.eps[0] = eps0;
  for (int n = 0; n < N; ++n) k.eps[n + 1] = std::pow(k.eps[n], 1.25);
  k.mu.resize(N);
  k.s.resize(N);
  for (int n = 1; n < N; ++n) {
    k.mu[n] = beta0 / (8.0 * n * n);
    k.s[n] = sigma / (8.0 * n * n);
  }
  k.mu[0] = beta0 / 8.0;
  k.s[0] = sigma / 8.0;
  k.beta.resize(N);
  k.sigma.resize(N);
  k.rho.resize(N);
  k.L.resize(N);
  for (int n = 0; n < N; ++n) {
    if (n <= 1) {
      k.beta[n] = beta0;
      k.sigma[n] = sigma;
    } else {
      k.beta[n] = k.beta[n - 1] - k.mu[n - 1];
      k.sigma[n] = k.sigma[n - 1] - 2.0 * k.s[n - 1];
    }
    k.rho[n] = std::sqrt(k.eps[n]) * rho;
    k.L[n] = std::abs(std::log(k.eps[n + 1] / k.eps[n])) / k.sigma[n];
  }
  k.gate = std::pow(rho * sigma, 6);
  if (box_width > 0.0) k.gate = std::min(k.gate, std::pow(box_width, 24));
  k.gate_ok = eps0 <= k.gate;
  if (!k.gate_ok)
    k.warnings.push_back("smallness gate violated: eps0=" + fmt_double(eps0) + " > " + fmt_double(k.gate));
  return k;
}

std::vector<std::vector<int>> enumerate_admissible(const MassVector& m, double mu, double ratio) {
  for (double w : m.weights())
    if (w > 1.0) throw std::invalid_argument("admissible-set enumeration assumes masses <= 1");
  const double bound = std::log(ratio) - kLogTol;
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  std::function<void(int, double)> dfs = [&](int start, double logsum) {
    for (int j = start; j <= m.size(); ++j) {
      double next = logsum + mu * std::log(m(j));
      if (next < bound) break;  // masses are non-increasing, later sites fail too
      cur.push_back(j);
      out.push_back(cur);
      dfs(j + 1, next);
      cur.pop_back();
    }
  };
  dfs(1, 0.0);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.back() != b.back()) return a.back() < b.back();
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
  return out;
}

std::vector<std::vector<int>> enumerate_An(int n, const MassVector& m, const KamSchedule& sched) {
  return enumerate_admissible(m, sched.mu.at(n), sched.ratio(n));
}

bool in_An(const std::vector<int>& A, int n, const MassVector& m, const KamSchedule& sched) {
  double logsum = 0.0;
  for (int j : A) logsum += std::log(m(j));
  return sched.mu.at(n) * logsum >= std::log(sched.ratio(n)) - kLogTol;
}

TruncationResult kam_truncate(const TFSeries& P, int n, const KamSchedule& sched, const MassVector& m) {
  const int Lc = sched.fourier_cutoff(n);
  auto split = truncate(P, [&](const MonomialKey& k) {
    return !k.is_constant() && k.alpha_norm() <= 1 && k.l_norm() <= Lc && in_An(k.lower_support(), n, m, sched);
  });
  TruncationResult r{std::move(split.kept), std::move(split.dropped), 0.0};
  r.norm_R_half = weighted_norm(r.R, m, sched.half_params(n));
  return r;
}

CohomologicalResult solve_cohomological(const TFSeries& Q, const std::vector<double>& xi, double min_divisor,
                                        int stage) {
  CohomologicalResult res{TFSeries(Q.n_max(), Q.drop_threshold()), std::numeric_limits<double>::infinity()};
  for (const auto& [k, c] : Q.terms()) {
    if (k.angle_free()) continue;
    double div = 0.0;
    for (const auto& s : k.terms()) {
      if (s.site > static_cast<int>(xi.size())) throw std::out_of_range("frequency vector shorter than support");
      div += xi[s.site - 1] * s.l;
    }
    if (std::abs(div) < min_divisor) throw SmallDivisorViolation(k.support(), k.l(), div, stage);
    res.min_divisor = std::min(res.min_divisor, std::abs(div));
    res.G.set(k, c * cplx(0.0, -1.0 / div));
  }
  return res;
}

CohomologicalResult solve_cohomological(const TFSeries& Q, const std::vector<double>& xi, int n,
                                        const KamSchedule& sched) {
  return solve_cohomological(Q, xi, 0.5 * std::pow(sched.eps.at(n), 1.0 / 12.0), n);
}

TFSeries normal_form(const std::vector<double>& xi, const MassVector& m) {
  TFSeries N(m.size());
  for (int j = 1; j <= static_cast<int>(xi.size()); ++j) N.add(MonomialKey({j}, {0}, {1}), m(j) * xi[j - 1]);
  return N;
}

IterationState initial_state(const TFSeries& P, const std::vector<double>& xi, const KamSchedule& sched,
                             const MassVector& m) {
  IterationState s;
  s.P = P;
  s.xi0 = xi;
  s.xi = xi;
  s.tracked_norm = weighted_norm(P, m, sched.params(0));
  return s;
}

IterationState kam_step(const IterationState& state, const KamSchedule& sched, const MassVector& m,
                        const StepOptions& opt, StageRecord* record) {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = state.n;
  if (n + 1 >= static_cast<int>(sched.sigma.size())) throw std::out_of_range("schedule has no stage " + std::to_string(n + 1));
  StageRecord rec;
  rec.n = n;
  rec.eps_n = sched.eps[n];
  rec.L_n = sched.L[n];
  rec.norm_P = state.tracked_norm;
  rec.terms_P = state.P.size();
  rec.An_size = enumerate_An(n, m, sched).size();

  IterationState next = state;
  next.n = n + 1;
  const NormParams pn = sched.params(n);
  const NormParams pn1 = sched.params(n + 1);

  if (state.P.empty()) {
    next.shifts.emplace_back(state.xi.size(), 0.0);
    next.generators.emplace_back(state.P.n_max());
    next.tracked_norm = 0.0;
    rec.min_divisor = std::numeric_limits<double>::infinity();
    if (record) *record = rec;
    return next;
  }

  TruncationResult tr = kam_truncate(state.P, n, sched, m);
  TFSeries avg = average(tr.Q);
  CohomologicalResult coh = solve_cohomological(tr.Q, state.xi, n, sched);
  const TFSeries& G = coh.G;

  std::vector<double> shift(state.xi.size(), 0.0);
  for (const auto& [k, c] : avg.terms()) {
    const int j = k.terms().front().site;
    if (j <= static_cast<int>(shift.size())) shift[j - 1] = c.real() / m(j);
  }
  double shift_inf = 0.0;
  for (std::size_t j = 0; j < shift.size(); ++j) {
    next.xi[j] += shift[j];
    shift_inf = std::max(shift_inf, std::abs(shift[j]));
  }

  const double tol = opt.lie_tol_factor * sched.eps[n + 1];
  bool converged = true;

  // Integral term: the order-k iterate ad_G^k / k! carries k/(k+1) on Q and 1/(k+1) on <Q>.
  TFSeries integral(state.P.n_max(), state.P.drop_threshold());
  double last_norm = 0.0;
  if (!G.empty()) {
    TFSeries X = tr.Q;
    TFSeries Y = avg;
    int k = 1;
    for (; k <= opt.max_lie_order; ++k) {
      X = apply_caps(poisson_bracket(X, G, m), opt.caps);
      X *= cplx(1.0 / k);
      Y = apply_caps(poisson_bracket(Y, G, m), opt.caps);
      Y *= cplx(1.0 / k);
      TFSeries piece = static_cast<double>(k) / (k + 1) * X + (1.0 / (k + 1)) * Y;
      last_norm = weighted_norm(piece, m, pn1);
      integral += piece;
      if ((X.empty() && Y.empty()) || last_norm <= tol) break;
    }
    if (k > opt.max_lie_order) converged = false;
  }

  LieResult transport = lie_transform(tr.R, G, m, opt.max_lie_order, opt.caps, pn1, tol);
  if (!transport.converged) converged = false;

  if (!converged && opt.strict_caps)
    throw CapsExceeded("Lie series did not reach tolerance " + fmt_double(tol) + " within order " +
                       std::to_string(opt.max_lie_order));

  TFSeries Pn = integral + transport.value;
  Pn.set(MonomialKey(), 0.0);  // constants do not enter the dynamics

  next.P = std::move(Pn);
  next.shifts.push_back(shift);
  next.generators.push_back(G);
  next.tracked_norm = weighted_norm(next.P, m, pn1);

  rec.norm_G = weighted_norm(G, m, pn);
  rec.terms_G = G.size();
  rec.shift_inf_norm = shift_inf;
  rec.min_divisor = coh.min_divisor;
  rec.norm_Q = weighted_norm(tr.Q, m, pn);
  rec.norm_R_half = tr.norm_R_half;
  rec.norm_avg = weighted_norm(avg, m, pn);
  rec.norm_P_next = next.tracked_norm;
  rec.norm_integral_part = weighted_norm(integral, m, pn1);
  rec.norm_transport_part = weighted_norm(transport.value, m, pn1);
  rec.lie_dropped_norm = std::max(last_norm, transport.first_dropped_norm);
  rec.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (record) *record = rec;
  return next;
}

IterationResult run_iteration(const TFSeries& H0, const std::vector<double>& xi, const KamSchedule& sched,
                              const MassVector& m, const StepOptions& opt, int stages) {
  if (stages < 0) stages = sched.n_stages;
  if (stages > sched.n_stages) throw std::invalid_argument("more stages requested than scheduled");
  TFSeries P = H0 - normal_form(xi, m);
  P.set(MonomialKey(), 0.0);
  IterationResult res;
  res.state = initial_state(P, xi, sched, m);
  for (int n = 0; n < stages; ++n) {
    if (res.state.tracked_norm > 10.0 * sched.eps[n])
      throw DivergenceError("tracked norm " + fmt_double(res.state.tracked_norm) + " exceeds 10 eps_" +
                            std::to_string(n) + " = " + fmt_double(10.0 * sched.eps[n]));
    StageRecord rec;
    res.state = kam_step(res.state, sched, m, opt, &rec);
    res.records.push_back(rec);
  }
  return res;
}

std::vector<double> FrequencyInverse::correction(const std::vector<double>& xi) const {
  std::vector<double> v(xi.size(), 0.0), arg(xi.size());
  for (int it = 0; it < 1000; ++it) {
    for (std::size_t j = 0; j < xi.size(); ++j) arg[j] = xi[j] + v[j];
    std::vector<double> vt = vt_(arg);
    double diff = 0.0;
    for (std::size_t j = 0; j < xi.size(); ++j) {
      diff = std::max(diff, std::abs(-vt[j] - v[j]));
      v[j] = -vt[j];
    }
    if (diff <= 1e-12) return v;
  }
  throw ContractionFailure("frequency inversion did not converge");
}

FrequencyInverse invert_frequency_map(FrequencyInverse::Field vtilde, const std::vector<double>& lo,
                                      const std::vector<double>& hi, double h, int samples, std::uint64_t seed) {
  const std::size_t d = lo.size();
  if (hi.size() != d) throw std::invalid_argument("box bounds differ in length");
  double sup = 0.0;
  auto probe = [&](const std::vector<double>& x) {
    for (double v : vtilde(x)) sup = std::max(sup, std::abs(v));
  };
  std::vector<double> x(d);
  if (d <= 12) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
      for (std::size_t j = 0; j < d; ++j) x[j] = (mask >> j) & 1 ? hi[j] : lo[j];
      probe(x);
    }
  }
  for (std::size_t j = 0; j < d; ++j) x[j] = 0.5 * (lo[j] + hi[j]);
  probe(x);
  for (int i = 0; i < samples; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[j] = lo[j] + (hi[j] - lo[j]) * uniform01(seed, i, j);
    probe(x);
  }
  if (sup > h / 4.0)
    throw ContractionFailure("sup|vtilde| = " + fmt_double(sup) + " exceeds h/4 = " + fmt_double(h / 4.0));
  return FrequencyInverse(std::move(vtilde), sup, h);
}

namespace {

// sum_{k>=0} ad_G^k X / (k+1)!, the non-identity part of phi_j o phi_G when X = {phi_j, G}.
TFSeries angle_lie(const TFSeries& X, const TFSeries& G, const MassVector& m, const Caps& caps, int order) {
  TFSeries sum = X;
  TFSeries term = X;
  for (int k = 1; k < order && !term.empty(); ++k) {
    term = apply_caps(poisson_bracket(term, G, m), caps);
    term *= cplx(1.0 / (k + 1));
    sum += term;
  }
  return sum;
}

TFSeries restrict_J0(const TFSeries& h) {
  return truncate(h, [](const MonomialKey& k) { return k.alpha_norm() == 0; }).kept;
}

}  // namespace

CoordinateMap coordinate_map(const std::vector<TFSeries>& generators, int n_max, const MassVector& m,
                             const Caps& caps, int order) {
  CoordinateMap cm;
  const NormParams p{0.5, 1.0, 1.0};
  for (int j = 1; j <= n_max; ++j) {
    cm.u.emplace_back(n_max);
    cm.w.push_back(TFSeries::monomial(n_max, {j}, {0}, {1}, 1.0));
  }
  for (const auto& G : generators) {
    if (G.empty()) continue;
    for (int j = 1; j <= n_max; ++j) {
      TFSeries X = d_J(G, j);
      X *= cplx(1.0 / m(j));
      TFSeries u = lie_transform(cm.u[j - 1], G, m, order, caps, p).value;
      u += angle_lie(X, G, m, caps, order);
      cm.u[j - 1] = std::move(u);
      cm.w[j - 1] = lie_transform(cm.w[j - 1], G, m, order, caps, p).value;
    }
  }
  return cm;
}

TorusEmbedding assemble_torus_embedding(const IterationState& state, const MassVector& m, const Caps& caps,
                                        int order) {
  const int n_max = state.P.n_max() > 0 ? state.P.n_max() : static_cast<int>(state.xi.size());
  CoordinateMap cm = coordinate_map(state.generators, n_max, m, caps, order);
  TorusEmbedding e;
  e.n_max = n_max;
  for (int j = 0; j < n_max; ++j) {
    e.u.push_back(restrict_J0(cm.u[j]));
    e.w.push_back(restrict_J0(cm.w[j]));
  }
  e.omega = state.xi;
  return e;
}

void TorusEmbedding::evaluate(const std::vector<double>& phi, std::vector<double>& x_phi,
                              std::vector<double>& x_J) const {
  std::vector<double> zero(n_max, 0.0);
  x_phi.resize(n_max);
  x_J.resize(n_max);
  for (int j = 0; j < n_max; ++j) {
    x_phi[j] = phi[j] + kam::evaluate(u[j], phi, zero).real();
    x_J[j] = kam::evaluate(w[j], phi, zero).real();
  }
}

std::vector<double> TorusEmbedding::project_angles(const std::vector<double>& phi) const {
  std::vector<double> psi = phi, zero(n_max, 0.0);
  for (int it = 0; it < 200; ++it) {
    double diff = 0.0;
    std::vector<double> nxt(n_max);
    for (int j = 0; j < n_max; ++j) {
      nxt[j] = phi[j] - kam::evaluate(u[j], psi, zero).real();
      diff = std::max(diff, std::abs(nxt[j] - psi[j]));
    }
    psi = std::move(nxt);
    if (diff <= 1e-15) break;
  }
  return psi;
}

}  // namespace kam

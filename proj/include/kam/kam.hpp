#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kam/series.hpp"

namespace kam {

// Base for errors that the CLI reports as exit code 1.
struct EngineError : std::runtime_error {
  std::string kind;
  EngineError(std::string k, const std::string& what) : std::runtime_error(what), kind(std::move(k)) {}
};

struct SmallDivisorViolation : EngineError {
  std::vector<int> A;
  std::vector<int> l;
  double value;
  int stage;
  SmallDivisorViolation(std::vector<int> A_, std::vector<int> l_, double v, int n);
};

struct CapsExceeded : EngineError {
  explicit CapsExceeded(const std::string& w) : EngineError("CapsExceeded", w) {}
};

struct ContractionFailure : EngineError {
  explicit ContractionFailure(const std::string& w) : EngineError("ContractionFailure", w) {}
};

struct DivergenceError : EngineError {
  explicit DivergenceError(const std::string& w) : EngineError("AbortsOnDivergence", w) {}
};

struct KamSchedule {
  double eps0 = 0, beta0 = 0, rho0 = 0, sigma0 = 0;
  int n_stages = 0;
  // eps has n_stages + 2 entries so that L_n and ratio(n) exist for every stage n.
  std::vector<double> eps, beta, rho, sigma, mu, s, L;
  double gate = 0;  // min{rho^6 sigma^6, |b-a|^24}
  bool gate_ok = true;
  std::vector<std::string> warnings;

  double ratio(int n) const { return eps.at(n + 1) / eps.at(n); }
  int fourier_cutoff(int n) const;  // floor(L_n)
  NormParams params(int n) const { return {beta.at(n), rho.at(n), sigma.at(n)}; }
  // Shrunk parameters on which the truncation remainder is measured.
  NormParams half_params(int n) const;
  // Frequency-domain margin eps_n^{1/12} / (2 L_n).
  double frequency_margin(int n) const;
};

// mu_0 and s_0 are set to their n = 1 values (used only by the stage-0 truncation);
// sigma_1 = sigma_0 and beta_1 = beta_0.
KamSchedule build_schedule(double eps0, double beta0, double rho, double sigma, int n_stages,
                           double box_width = -1.0);

// All nonempty A in {1..N_max} with m_A^{mu} >= ratio. Masses must not exceed 1.
std::vector<std::vector<int>> enumerate_admissible(const MassVector& m, double mu, double ratio);
std::vector<std::vector<int>> enumerate_An(int n, const MassVector& m, const KamSchedule& sched);
bool in_An(const std::vector<int>& A, int n, const MassVector& m, const KamSchedule& sched);

struct TruncationResult {
  TFSeries Q;
  TFSeries R;
  double norm_R_half = 0.0;
};
TruncationResult kam_truncate(const TFSeries& P, int n, const KamSchedule& sched, const MassVector& m);

struct CohomologicalResult {
  TFSeries G;
  double min_divisor = 0.0;  // +inf if no angle-dependent term
};
// Solves {xi.J, G} + Q = <Q> with xi.J = sum m_j xi_j J_j. Divisors below min_divisor throw.
CohomologicalResult solve_cohomological(const TFSeries& Q, const std::vector<double>& xi,
                                        double min_divisor, int stage = -1);
CohomologicalResult solve_cohomological(const TFSeries& Q, const std::vector<double>& xi, int n,
                                        const KamSchedule& sched);

TFSeries normal_form(const std::vector<double>& xi, const MassVector& m);

struct StepOptions {
  Caps caps{2, 12, 8};
  int max_lie_order = 12;
  double lie_tol_factor = 1e-4;  // relative to eps_{n+1}
  bool strict_caps = false;      // throw CapsExceeded instead of recording the shortfall
};

struct StageRecord {
  int n = 0;
  double eps_n = 0, norm_P = 0, norm_G = 0, shift_inf_norm = 0, min_divisor = 0, L_n = 0;
  std::size_t An_size = 0;
  double wall_time_ms = 0;
  double norm_Q = 0, norm_R_half = 0, norm_avg = 0;
  double norm_P_next = 0;       // in the stage-(n+1) norm
  double norm_integral_part = 0, norm_transport_part = 0;
  double lie_dropped_norm = 0;
  std::size_t terms_P = 0, terms_G = 0;
};

struct IterationState {
  int n = 0;
  TFSeries P;
  std::vector<double> xi0;    // frequency of the initial normal form
  std::vector<double> xi;     // current normal-form frequency xi0 + accumulated shift
  std::vector<std::vector<double>> shifts;  // vtilde per completed stage
  std::vector<TFSeries> generators;
  double tracked_norm = 0.0;  // ||P^{(n)}||_n
};

IterationState initial_state(const TFSeries& P, const std::vector<double>& xi, const KamSchedule& sched,
                             const MassVector& m);
IterationState kam_step(const IterationState& state, const KamSchedule& sched, const MassVector& m,
                        const StepOptions& opt, StageRecord* record = nullptr);

struct IterationResult {
  IterationState state;
  std::vector<StageRecord> records;
};
// H0 = xi.J + P; P is obtained by subtracting the normal form.
IterationResult run_iteration(const TFSeries& H0, const std::vector<double>& xi, const KamSchedule& sched,
                              const MassVector& m, const StepOptions& opt, int stages = -1);

// Fixed-point inverse of xi -> xi + vtilde(xi).
class FrequencyInverse {
 public:
  using Field = std::function<std::vector<double>(const std::vector<double>&)>;
  FrequencyInverse(Field vtilde, double sup_vtilde, double h) : vt_(std::move(vtilde)), sup_(sup_vtilde), h_(h) {}
  // v(xi) with (id + vtilde)(xi + v(xi)) = xi, to sup-norm tolerance 1e-12.
  std::vector<double> correction(const std::vector<double>& xi) const;
  double sup_vtilde() const { return sup_; }
  double radius() const { return h_; }

 private:
  Field vt_;
  double sup_;
  double h_;
};
// sup|vtilde| is estimated on the box corners, centre and `samples` interior points.
FrequencyInverse invert_frequency_map(FrequencyInverse::Field vtilde, const std::vector<double>& lo,
                                      const std::vector<double>& hi, double h, int samples = 256,
                                      std::uint64_t seed = 1);

// Phi = phi_{G_1} o ... o phi_{G_n} acting on the coordinate functions.
struct CoordinateMap {
  std::vector<TFSeries> u;  // phi_j o Phi = phi_j + u_j
  std::vector<TFSeries> w;  // J_j o Phi = w_j (includes J_j itself)
};
CoordinateMap coordinate_map(const std::vector<TFSeries>& generators, int n_max, const MassVector& m,
                             const Caps& caps, int order);

struct TorusEmbedding {
  int n_max = 0;
  std::vector<TFSeries> u;  // restricted to J = 0
  std::vector<TFSeries> w;
  std::vector<double> omega;
  void evaluate(const std::vector<double>& phi, std::vector<double>& x_phi, std::vector<double>& x_J) const;
  // psi with psi + u(psi) = phi, by fixed-point iteration.
  std::vector<double> project_angles(const std::vector<double>& phi) const;
};
TorusEmbedding assemble_torus_embedding(const IterationState& state, const MassVector& m, const Caps& caps,
                                        int order = 8);

}  // namespace kam

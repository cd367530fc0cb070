#pragma once

#include <memory>
#include <string>
#include <vector>

#include "kam/kam.hpp"
#include "kam/models.hpp"
#include "kam/series.hpp"

namespace kam {

// State layout: x = (phi_1..phi_N, J_1..J_N). Equations of motion for the form
// sum m_n dJ_n ^ dphi_n: phi_n' = m_n^{-1} dH/dJ_n, J_n' = -m_n^{-1} dH/dphi_n.
class HamiltonianSystem {
 public:
  virtual ~HamiltonianSystem() = default;
  virtual int sites() const = 0;
  int dim() const { return 2 * sites(); }
  virtual void field(const std::vector<double>& x, std::vector<double>& dx) const = 0;
  // Row-major dim x dim. The default uses central differences with step fd_step.
  virtual void jacobian(const std::vector<double>& x, std::vector<double>& jac) const;
  virtual double energy(const std::vector<double>& x) const = 0;
  double fd_step = 1e-6;
};

// Closed-form long-range model; masses beyond the first may be zero (decoupled limit).
class LongRangeSystem : public HamiltonianSystem {
 public:
  LongRangeSystem(std::vector<double> xi, std::vector<double> masses, double eps, double quadratic = 1.0);
  explicit LongRangeSystem(const LongRangeModel& m);
  int sites() const override { return static_cast<int>(xi_.size()); }
  void field(const std::vector<double>& x, std::vector<double>& dx) const override;
  void jacobian(const std::vector<double>& x, std::vector<double>& jac) const override;
  double energy(const std::vector<double>& x) const override;

 private:
  std::vector<double> xi_, m_;
  double eps_, q_;
};

// Vector field of a TFSeries Hamiltonian through its analytic derivatives.
class SeriesSystem : public HamiltonianSystem {
 public:
  SeriesSystem(const TFSeries& H, const MassVector& m);
  int sites() const override { return n_; }
  void field(const std::vector<double>& x, std::vector<double>& dx) const override;
  double energy(const std::vector<double>& x) const override;

 private:
  int n_;
  TFSeries H_;
  MassVector m_;
  std::vector<TFSeries> dphi_, dJ_;
};

struct FlowSpec {
  double h = 1e-2;
  double T = 1.0;
  std::string integrator = "implicit-midpoint";  // or "yoshida4-midpoint"
  double tol = 1e-13;  // fixed-point tolerance, relative to 1 + |x_i|
  int max_sweeps = 50;
  int record_every = 1;
};

struct StepStats {
  int max_sweeps_used = 0;
};

// One implicit-midpoint step x <- x + h f((x + x')/2). Throws if the fixed point does not converge.
void midpoint_step(const HamiltonianSystem& sys, std::vector<double>& x, double h, double tol, int max_sweeps,
                   StepStats* stats = nullptr);
void flow_step(const HamiltonianSystem& sys, std::vector<double>& x, const FlowSpec& spec, StepStats* stats = nullptr);

struct Trajectory {
  std::vector<double> t;
  std::vector<std::vector<double>> x;
  double energy_drift = 0.0;  // sup |E(t) - E(0)|
  int max_sweeps_used = 0;
};
Trajectory integrate(const HamiltonianSystem& sys, const FlowSpec& spec, const std::vector<double>& x0);

struct DriftReport {
  std::vector<double> times;
  std::vector<double> deviation;        // sup over samples of |x(t) - Phi(phi_0 + omega t)|
  std::vector<double> action_defect;    // sup over samples of |J(t) - w(psi(t))|, psi the projected angle
  std::vector<double> phase_deviation;  // sup over samples of the angle part of deviation
  double sup_deviation = 0.0;
  double sup_action_defect = 0.0;
  double sup_phase_deviation = 0.0;
  double energy_drift = 0.0;
};
DriftReport verify_torus(const HamiltonianSystem& sys, const TorusEmbedding& emb, const FlowSpec& spec,
                         const std::vector<std::vector<double>>& phi0_samples, int checkpoints = 50);

// Finite-time largest Lyapunov exponent from the tangent map of the chosen integrator.
struct LyapunovResult {
  double exponent = 0.0;
  std::vector<double> final_state;
};
LyapunovResult finite_time_lyapunov(const HamiltonianSystem& sys, const FlowSpec& spec, const std::vector<double>& x0,
                                    const std::vector<double>& v0);

struct StripConfig {
  int N = 6;
  double eps = 1e-3;
  double delta = 1e-6;
  int resonant_site = 2;                 // j in R_j
  std::vector<double> detunings_sqrt_eps{0.0, 0.5, 1.0, 10.0, 20.0};  // |xi_1 - xi_j| / sqrt(eps)
  double varrho = 2.0;                   // strip half-width in units of sqrt(eps)
  int ensemble = 8;
  double action_radius = 0.1;            // |J| <= action_radius sqrt(eps) initially
  double T = 4000.0;
  double h = 0.05;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct StripRow {
  int site = 0;
  double detuning = 0.0;
  double detuning_sqrt_eps = 0.0;
  bool inside = false;
  double ftle = 0.0;
  double ftle_baseline = 0.0;  // same initial data at eps = 0
  double ftle_excess = 0.0;    // mean of ftle - ftle_baseline
  double crossings = 0.0;      // mean number of sign changes of the resonance-angle velocity
  // Crossings per small-oscillation period 2 pi / sqrt(eps) of the (1, j) pendulum.
  double indicator = 0.0;
  double indicator_floor = 0.0;  // one crossing over the whole run
};
std::vector<double> strip_frequencies(const StripConfig& c, double detuning);
std::vector<StripRow> resonant_strip_experiment(const StripConfig& c);

}  // namespace kam

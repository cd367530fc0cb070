#pragma once

#include <array>
#include <string>
#include <vector>

#include "kam/diophantine.hpp"
#include "kam/series.hpp"

namespace kam {

// V(r) = sum_k c_k r^k; the site energy is y^2/2 - V(r) (or R^2/2 + G^2/2r^2 - V(r) in the plane).
struct Potential {
  std::string name = "polynomial";
  std::vector<double> coeffs;

  static Potential duffing(double alpha, double beta);
  static Potential harmonic(double omega);  // V = -omega^2 r^2 / 2
  static Potential polynomial(std::vector<double> c);

  double V(double r) const;
  double dV(double r, int order = 1) const;
  double U(double r) const { return -V(r); }  // effective potential energy for 1D sites
};

// Pairwise coupling W(x_i - x_j).
struct Coupling {
  std::string name = "none";
  std::vector<double> coeffs;  // polynomial_difference: W(d) = sum c_k d^k
  double W(double d) const;
};

struct HamiltonianModel {
  int dim = 1;
  int sites = 2;
  Potential potential = Potential::duffing(1.0, -1.0);
  double kappa = 1.0;
  double epsilon = 0.0;
  Coupling coupling;
  std::vector<double> site_energies;  // energy of the reference torus per site
  double well_center = 0.0;           // a point inside the level curves used
  MassVector masses() const { return MassVector::exponential(kappa, sites); }
  // Samples |W| on [-radius, radius]; the class needs sup |W| <= 1.
  bool coupling_bounded(double radius, int samples = 1001) const;
};

// Heliocentric change X_0 = x_0, X_i = x_i - x_0, Y_0 = sum y_i, Y_i = y_i (i >= 1).
using Points = std::vector<std::vector<double>>;
struct PhaseState {
  Points q;
  Points p;
};
PhaseState heliocentric(const PhaseState& s);
PhaseState heliocentric_inverse(const PhaseState& s);

struct PolarState {
  double r = 0, R = 0, alpha = 0, G = 0;
  double h = 0;  // R^2/2 + G^2/(2 r^2) - V(r)
};
PolarState polar_reduce(const Potential& V, const std::array<double, 2>& x, const std::array<double, 2>& y);
void polar_expand(const PolarState& s, std::array<double, 2>& x, std::array<double, 2>& y);

struct QuadratureConfig {
  int nodes = 64;
  int degree = 32;
};

// One degree of freedom (G = 0, r on the whole line) or the planar radial problem (G != 0, r > 0).
class RadialProblem {
 public:
  RadialProblem(Potential V, double G, double center, QuadratureConfig q = {});
  double U(double r) const;  // G^2/2r^2 - V(r)
  double dU(double r) const;
  // Turning points r_- < center < r_+ with U = h; throws std::domain_error for open level sets.
  std::array<double, 2> turning_points(double h) const;
  double action(double h) const;     // (1/2pi) closed integral of R dr
  double daction_dh(double h) const; // period / 2pi
  double daction_dG(double h) const;
  double frequency(double h) const { return 1.0 / daction_dh(h); }
  double energy_of_action(double L, double h_lo, double h_hi) const;
  double G() const { return G_; }
  const Potential& potential() const { return V_; }
  double center() const { return center_; }

 private:
  template <class F>
  double integrate_between_turning_points(double h, F f) const;
  Potential V_;
  double G_;
  double center_;
  QuadratureConfig q_;
};

class ActionAngleChart {
 public:
  ActionAngleChart(RadialProblem prob, double h_lo, double h_hi);
  double h_lo() const { return a_; }
  double h_hi() const { return b_; }
  double action(double h) const { return prob_.action(h); }
  double frequency(double h) const { return prob_.frequency(h); }
  double energy(double L) const { return prob_.energy_of_action(L, a_, b_); }
  // d^2 h / dL^2 = omega d omega/dh from the Chebyshev fit of omega(h).
  double twist(double h) const;
  // Central differences of omega in h at step and step/2; returns the Richardson value.
  double twist_fd(double h, double step, double* halving_gap = nullptr) const;
  double action_fit(double h) const;
  double fit_residual_action() const { return res_L_; }
  double fit_residual_frequency() const { return res_w_; }
  const RadialProblem& problem() const { return prob_; }

 private:
  RadialProblem prob_;
  double a_, b_;
  std::vector<double> cheb_L_, cheb_w_;
  double res_L_ = 0, res_w_ = 0;
};

ActionAngleChart action_map(const Potential& V, double h_lo, double h_hi, double center, QuadratureConfig q = {});

// Planar chart (L, G) -> h_hat. Derivatives in (h, G) by two-step central differences.
struct FrequencyPoint {
  double h = 0, G = 0, L = 0;
  std::array<double, 2> grad{};        // (d h_hat/dL, d h_hat/dG)
  std::array<double, 4> hessian{};     // row-major D^2 h_hat
  double det = 0;
  double richardson_gap = 0;           // relative gap between the two step sizes
  bool singular = false;
};
struct FrequencyChartConfig {
  double fd_step = 1e-4;
  double singular_threshold = 1e-8;
  QuadratureConfig quad{};
};
FrequencyPoint frequency_chart(const Potential& V, double h, double G, double center,
                               const FrequencyChartConfig& cfg = {});
// h_hat(L, G), by inverting L(h, G) in h.
double planar_energy(const Potential& V, double L, double G, double center, double h_lo, double h_hi,
                     QuadratureConfig q = {});

struct P2Report {
  double r_star = 0;
  double omega0 = 0;
  bool frequency_ok = true;
  std::vector<int> witness;
  double anharmonic = 0;   // d omega / dI at the equilibrium, from the cubic and quartic Taylor terms
  bool quartic_invertible = true;
};
P2Report check_P2(const Potential& V, double r_guess, double gamma, int sites = 1, int cutoff = 100,
                  double invert_tol = 1e-8);

struct P1Report {
  DCReport diophantine;
  std::vector<double> twist;   // per site
  double sup_inverse_twist = 0;
  bool twist_ok = true;
  bool pass = true;
};
P1Report check_P1(const std::vector<double>& xi0, const std::vector<double>& twists, double gamma, double tau,
                  int cutoff, double twist_tol = 1e-8);

// Samples of x(phi, I), y(phi, I) along the orbit of energy h, angles phi_k = 2 pi k / n from r_+.
struct OrbitTable {
  double h = 0, omega = 0;
  std::vector<double> x, y;
};
OrbitTable orbit_table(const RadialProblem& prob, double h, int n);

struct NormalFormOptions {
  int grid = 64;
  int fourier_cap = 16;
  double action_step = 1e-4;     // relative FD step in the action
  double tail_tolerance = 1e-10; // aliasing guard on the outermost modes of the J = 0 table
  double drop = 1e-12;           // relative drop threshold (finite-difference noise floor)
};
struct NormalFormResult {
  TFSeries H;          // xi.J + P_h + eps P~
  TFSeries P_h;
  TFSeries P_tilde;    // the coupling part, including eps
  std::vector<double> xi0;
  std::vector<double> actions;  // I*_i
  std::vector<double> twists;
  double constant = 0;  // dropped energy offset: sum m_i h_i plus the mean coupling
  double norm_P_tilde = 0;
  double fft_tail = 0;
};
NormalFormResult to_normal_form(const HamiltonianModel& model, const NormParams& p, const NormalFormOptions& opt = {});
// Original model energy at action-angle data (phi_i, I*_i + J_i), computed through orbit integration.
double model_energy_at(const HamiltonianModel& model, const NormalFormResult& nf, const std::vector<double>& phi,
                       const std::vector<double>& J);

}  // namespace kam

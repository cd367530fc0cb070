#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace kam {

using cplx = std::complex<double>;

// Decreasing positive site weights m_1 >= m_2 >= ... > 0. Sites are 1-based.
class MassVector {
 public:
  MassVector() = default;
  static MassVector exponential(double kappa, int n_max);
  static MassVector explicit_list(std::vector<double> weights, double kappa);

  int size() const { return static_cast<int>(w_.size()); }
  double kappa() const { return kappa_; }
  const std::string& generator() const { return generator_; }
  const std::vector<double>& weights() const { return w_; }

  double operator()(int site) const { return w_.at(site - 1); }
  // m_A, with m_{empty} = 1.
  double product(const std::vector<int>& sites) const;
  // sup_i m_i e^{kappa i} over the stored range.
  double decay_certificate() const;

 private:
  double kappa_ = 0.0;
  std::string generator_;
  std::vector<double> w_;
};

struct NormParams {
  double beta = 0.5;
  double rho = 1.0;
  double sigma = 1.0;
  void validate() const;
};

struct SiteTerm {
  int site;
  int l;
  int alpha;
  bool operator==(const SiteTerm&) const = default;
};

// J^alpha e(l.phi) restricted to its support A. Entries are sorted by site and
// no entry has l = alpha = 0. The empty key is the constant monomial.
class MonomialKey {
 public:
  MonomialKey() = default;
  MonomialKey(const std::vector<int>& A, const std::vector<int>& l, const std::vector<int>& alpha);
  explicit MonomialKey(std::vector<SiteTerm> terms);

  const std::vector<SiteTerm>& terms() const { return t_; }
  bool is_constant() const { return t_.empty(); }
  int size() const { return static_cast<int>(t_.size()); }
  int top() const { return t_.empty() ? 0 : t_.back().site; }
  std::vector<int> support() const;
  std::vector<int> lower_support() const;  // A minus its maximum
  std::vector<int> l() const;
  std::vector<int> alpha() const;
  int l_norm() const;
  int alpha_norm() const;
  bool angle_free() const;
  MonomialKey conjugate_index() const;  // same A and alpha, l -> -l

  bool operator==(const MonomialKey& o) const { return t_ == o.t_; }
  bool operator<(const MonomialKey& o) const;

 private:
  std::vector<SiteTerm> t_;
};

struct Caps {
  int max_alpha = 1 << 20;
  int max_l = 1 << 20;
  int max_support = 1 << 20;
  bool admits(const MonomialKey& k) const {
    return k.alpha_norm() <= max_alpha && k.l_norm() <= max_l && k.size() <= max_support;
  }
};

class TFSeries {
 public:
  using Map = std::map<MonomialKey, cplx>;

  TFSeries() = default;
  explicit TFSeries(int n_max, double drop = 0.0) : n_max_(n_max), drop_(drop) {}

  static TFSeries constant(int n_max, cplx c);
  static TFSeries monomial(int n_max, const std::vector<int>& A, const std::vector<int>& l,
                           const std::vector<int>& alpha, cplx c);
  // c e(l.phi) + conj(c) e(-l.phi) given as a dense angle vector (1-based sites map to index+1).
  static TFSeries cosine_pair(int n_max, const std::vector<int>& l_dense, cplx c);

  int n_max() const { return n_max_; }
  double drop_threshold() const { return drop_; }
  void set_drop_threshold(double d) { drop_ = d; }
  const Map& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }

  cplx coeff(const MonomialKey& k) const;
  void add(const MonomialKey& k, cplx c);
  void set(const MonomialKey& k, cplx c);
  // Removes entries with modulus <= drop threshold (exact zeros at threshold 0).
  void prune();

  int max_l_norm() const;
  int max_alpha_norm() const;
  bool is_real(double rel_tol = 0.0) const;
  double max_abs() const;

  TFSeries& operator+=(const TFSeries& o);
  TFSeries& operator-=(const TFSeries& o);
  TFSeries& operator*=(cplx s);

 private:
  int n_max_ = 0;
  double drop_ = 0.0;
  Map terms_;
};

TFSeries operator+(TFSeries a, const TFSeries& b);
TFSeries operator-(TFSeries a, const TFSeries& b);
TFSeries operator*(cplx s, TFSeries a);

double block_norm(const TFSeries& h, const std::vector<int>& A, const NormParams& p);

struct NormReport {
  double value = 0.0;     // sup over j of the weighted block sums
  int argmax_site = 0;
  double constant = 0.0;  // |coefficient| of the A = empty term, not part of value
};
NormReport weighted_norm_report(const TFSeries& h, const MassVector& m, const NormParams& p);
double weighted_norm(const TFSeries& h, const MassVector& m, const NormParams& p);

TFSeries d_phi(const TFSeries& h, int site);
TFSeries d_J(const TFSeries& h, int site);
TFSeries multiply(const TFSeries& h, const TFSeries& g);
TFSeries poisson_bracket(const TFSeries& h, const TFSeries& g, const MassVector& m);
TFSeries apply_caps(const TFSeries& h, const Caps& caps);

struct LieResult {
  TFSeries value;
  int orders_used = 0;
  double first_dropped_norm = 0.0;  // weighted norm of the order after the last kept one
  bool converged = true;            // false if a tolerance was given and not reached
};
// h o phi_G = sum_n ad_G^n h / n!, ad_G h = {h, G}. If tol > 0 the series stops as
// soon as an order has weighted norm <= tol.
LieResult lie_transform(const TFSeries& h, const TFSeries& G, const MassVector& m, int order,
                        const Caps& caps, const NormParams& p, double tol = 0.0);

struct Split {
  TFSeries kept;
  TFSeries dropped;
};
Split truncate(const TFSeries& h, const std::function<bool(const MonomialKey&)>& keep);

// Angle-free linear-in-J part.
TFSeries average(const TFSeries& h);

cplx evaluate(const TFSeries& h, const std::vector<double>& phi, const std::vector<double>& J);

}  // namespace kam

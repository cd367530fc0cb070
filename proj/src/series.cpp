#include "kam/series.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kam {

MassVector MassVector::exponential(double kappa, int n_max) {
  if (!(kappa > 0.0) || n_max < 0) throw std::invalid_argument("exponential masses need kappa > 0");
  MassVector m;
  m.kappa_ = kappa;
  m.generator_ = "exp";
  m.w_.resize(n_max);
  for (int i = 1; i <= n_max; ++i) m.w_[i - 1] = std::exp(-kappa * i);
  return m;
}

MassVector MassVector::explicit_list(std::vector<double> weights, double kappa) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) throw std::invalid_argument("masses must be positive");
    if (i > 0 && weights[i] > weights[i - 1]) throw std::invalid_argument("masses must be non-increasing");
  }
  MassVector m;
  m.kappa_ = kappa;
  m.generator_ = "explicit";
  m.w_ = std::move(weights);
  return m;
}

double MassVector::product(const std::vector<int>& sites) const {
  double p = 1.0;
  for (int s : sites) p *= (*this)(s);
  return p;
}

double MassVector::decay_certificate() const {
  double sup = 0.0;
  for (int i = 1; i <= size(); ++i) sup = std::max(sup, w_[i - 1] * std::exp(kappa_ * i));
  return sup;
}

void NormParams::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0,1)");
  if (!(rho > 0.0) || !(sigma > 0.0)) throw std::invalid_argument("rho and sigma must be positive");
}

MonomialKey::MonomialKey(const std::vector<int>& A, const std::vector<int>& l, const std::vector<int>& alpha) {
  if (l.size() != A.size() || alpha.size() != A.size())
    throw std::invalid_argument("key vectors must be indexed by the support");
  for (std::size_t i = 0; i < A.size(); ++i) {
    if (A[i] < 1) throw std::invalid_argument("sites are 1-based");
    if (i > 0 && A[i] <= A[i - 1]) throw std::invalid_argument("support must be strictly increasing");
    if (alpha[i] < 0) throw std::invalid_argument("alpha must be nonnegative");
    if (l[i] == 0 && alpha[i] == 0) throw std::invalid_argument("supp(|l|+alpha) must equal A");
    t_.push_back({A[i], l[i], alpha[i]});
  }
}

MonomialKey::MonomialKey(std::vector<SiteTerm> terms) : t_(std::move(terms)) {
  std::sort(t_.begin(), t_.end(), [](const SiteTerm& a, const SiteTerm& b) { return a.site < b.site; });
  std::erase_if(t_, [](const SiteTerm& s) { return s.l == 0 && s.alpha == 0; });
}

std::vector<int> MonomialKey::support() const {
  std::vector<int> r;
  r.reserve(t_.size());
  for (const auto& s : t_) r.push_back(s.site);
  return r;
}

std::vector<int> MonomialKey::lower_support() const {
  std::vector<int> r = support();
  if (!r.empty()) r.pop_back();
  return r;
}

std::vector<int> MonomialKey::l() const {
  std::vector<int> r;
  for (const auto& s : t_) r.push_back(s.l);
  return r;
}

std::vector<int> MonomialKey::alpha() const {
  std::vector<int> r;
  for (const auto& s : t_) r.push_back(s.alpha);
  return r;
}

int MonomialKey::l_norm() const {
  int n = 0;
  for (const auto& s : t_) n += std::abs(s.l);
  return n;
}

int MonomialKey::alpha_norm() const {
  int n = 0;
  for (const auto& s : t_) n += s.alpha;
  return n;
}

bool MonomialKey::angle_free() const {
  return std::all_of(t_.begin(), t_.end(), [](const SiteTerm& s) { return s.l == 0; });
}

MonomialKey MonomialKey::conjugate_index() const {
  MonomialKey k = *this;
  for (auto& s : k.t_) s.l = -s.l;
  return k;
}

bool MonomialKey::operator<(const MonomialKey& o) const {
  if (top() != o.top()) return top() < o.top();
  if (t_.size() != o.t_.size()) return t_.size() < o.t_.size();
  for (std::size_t i = 0; i < t_.size(); ++i)
    if (t_[i].site != o.t_[i].site) return t_[i].site < o.t_[i].site;
  for (std::size_t i = 0; i < t_.size(); ++i)
    if (t_[i].l != o.t_[i].l) return t_[i].l < o.t_[i].l;
  for (std::size_t i = 0; i < t_.size(); ++i)
    if (t_[i].alpha != o.t_[i].alpha) return t_[i].alpha < o.t_[i].alpha;
  return false;
}

TFSeries TFSeries::constant(int n_max, cplx c) {
  TFSeries s(n_max);
  s.add(MonomialKey(), c);
  return s;
}

TFSeries TFSeries::monomial(int n_max, const std::vector<int>& A, const std::vector<int>& l,
                            const std::vector<int>& alpha, cplx c) {
  TFSeries s(n_max);
  s.add(MonomialKey(A, l, alpha), c);
  return s;
}

TFSeries TFSeries::cosine_pair(int n_max, const std::vector<int>& l_dense, cplx c) {
  std::vector<SiteTerm> t;
  for (std::size_t i = 0; i < l_dense.size(); ++i)
    if (l_dense[i] != 0) t.push_back({static_cast<int>(i) + 1, l_dense[i], 0});
  MonomialKey k(t);
  TFSeries s(n_max);
  s.add(k, c);
  s.add(k.conjugate_index(), std::conj(c));
  return s;
}

cplx TFSeries::coeff(const MonomialKey& k) const {
  auto it = terms_.find(k);
  return it == terms_.end() ? cplx(0.0) : it->second;
}

void TFSeries::add(const MonomialKey& k, cplx c) {
  if (!k.is_constant() && k.top() > n_max_) throw std::out_of_range("support out of range");
  auto [it, inserted] = terms_.try_emplace(k, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) <= drop_) terms_.erase(it);
}

void TFSeries::set(const MonomialKey& k, cplx c) {
  if (!k.is_constant() && k.top() > n_max_) throw std::out_of_range("support out of range");
  if (std::abs(c) <= drop_) terms_.erase(k);
  else terms_[k] = c;
}

void TFSeries::prune() {
  std::erase_if(terms_, [this](const auto& kv) { return std::abs(kv.second) <= drop_; });
}

int TFSeries::max_l_norm() const {
  int n = 0;
  for (const auto& [k, c] : terms_) n = std::max(n, k.l_norm());
  return n;
}

int TFSeries::max_alpha_norm() const {
  int n = 0;
  for (const auto& [k, c] : terms_) n = std::max(n, k.alpha_norm());
  return n;
}

bool TFSeries::is_real(double rel_tol) const {
  const double scale = max_abs();
  for (const auto& [k, c] : terms_) {
    cplx partner = coeff(k.conjugate_index());
    if (std::abs(partner - std::conj(c)) > rel_tol * scale) return false;
  }
  return true;
}

double TFSeries::max_abs() const {
  double m = 0.0;
  for (const auto& [k, c] : terms_) m = std::max(m, std::abs(c));
  return m;
}

TFSeries& TFSeries::operator+=(const TFSeries& o) {
  n_max_ = std::max(n_max_, o.n_max_);
  for (const auto& [k, c] : o.terms_) add(k, c);
  return *this;
}

TFSeries& TFSeries::operator-=(const TFSeries& o) {
  n_max_ = std::max(n_max_, o.n_max_);
  for (const auto& [k, c] : o.terms_) add(k, -c);
  return *this;
}

TFSeries& TFSeries::operator*=(cplx s) {
  for (auto& [k, c] : terms_) c *= s;
  prune();
  return *this;
}

TFSeries operator+(TFSeries a, const TFSeries& b) { return a += b; }
TFSeries operator-(TFSeries a, const TFSeries& b) { return a -= b; }
TFSeries operator*(cplx s, TFSeries a) { return a *= s; }

double block_norm(const TFSeries& h, const std::vector<int>& A, const NormParams& p) {
  double sum = 0.0;
  for (const auto& [k, c] : h.terms()) {
    if (k.support() != A) continue;
    sum += std::abs(c) * std::pow(p.rho, k.alpha_norm()) * std::exp(k.l_norm() * p.sigma);
  }
  return sum;
}

NormReport weighted_norm_report(const TFSeries& h, const MassVector& m, const NormParams& p) {
  NormReport r;
  std::map<int, double> per_top;
  for (const auto& [k, c] : h.terms()) {
    if (k.is_constant()) {
      r.constant = std::abs(c);
      continue;
    }
    if (k.top() > m.size()) throw std::out_of_range("support out of range");
    double lower = 1.0;
    const auto& t = k.terms();
    for (std::size_t i = 0; i + 1 < t.size(); ++i) lower *= m(t[i].site);
    per_top[k.top()] += std::pow(lower, -p.beta) * std::abs(c) * std::pow(p.rho, k.alpha_norm()) *
                        std::exp(k.l_norm() * p.sigma);
  }
  for (const auto& [j, s] : per_top) {
    double v = s / m(j);
    if (v > r.value) {
      r.value = v;
      r.argmax_site = j;
    }
  }
  return r;
}

double weighted_norm(const TFSeries& h, const MassVector& m, const NormParams& p) {
  return weighted_norm_report(h, m, p).value;
}

TFSeries d_phi(const TFSeries& h, int site) {
  TFSeries r(h.n_max(), h.drop_threshold());
  for (const auto& [k, c] : h.terms())
    for (const auto& s : k.terms())
      if (s.site == site && s.l != 0) r.add(k, c * cplx(0.0, s.l));
  return r;
}

TFSeries d_J(const TFSeries& h, int site) {
  TFSeries r(h.n_max(), h.drop_threshold());
  for (const auto& [k, c] : h.terms()) {
    for (const auto& s : k.terms()) {
      if (s.site != site || s.alpha == 0) continue;
      std::vector<SiteTerm> t = k.terms();
      for (auto& e : t)
        if (e.site == site) e.alpha -= 1;
      r.add(MonomialKey(std::move(t)), c * static_cast<double>(s.alpha));
    }
  }
  return r;
}

namespace {

struct Merged {
  int site;
  int la, aa, lb, ab;
};

void merge_keys(const MonomialKey& a, const MonomialKey& b, std::vector<Merged>& out) {
  out.clear();
  const auto& ta = a.terms();
  const auto& tb = b.terms();
  std::size_t i = 0, j = 0;
  while (i < ta.size() || j < tb.size()) {
    if (j == tb.size() || (i < ta.size() && ta[i].site < tb[j].site)) {
      out.push_back({ta[i].site, ta[i].l, ta[i].alpha, 0, 0});
      ++i;
    } else if (i == ta.size() || tb[j].site < ta[i].site) {
      out.push_back({tb[j].site, 0, 0, tb[j].l, tb[j].alpha});
      ++j;
    } else {
      out.push_back({ta[i].site, ta[i].l, ta[i].alpha, tb[j].l, tb[j].alpha});
      ++i;
      ++j;
    }
  }
}

}  // namespace

TFSeries multiply(const TFSeries& h, const TFSeries& g) {
  TFSeries r(std::max(h.n_max(), g.n_max()), std::max(h.drop_threshold(), g.drop_threshold()));
  std::vector<Merged> mg;
  std::vector<SiteTerm> t;
  for (const auto& [ka, ca] : h.terms()) {
    for (const auto& [kb, cb] : g.terms()) {
      merge_keys(ka, kb, mg);
      t.clear();
      for (const auto& e : mg)
        if (e.la + e.lb != 0 || e.aa + e.ab != 0) t.push_back({e.site, e.la + e.lb, e.aa + e.ab});
      r.add(MonomialKey(t), ca * cb);
    }
  }
  return r;
}

TFSeries poisson_bracket(const TFSeries& h, const TFSeries& g, const MassVector& m) {
  TFSeries r(std::max(h.n_max(), g.n_max()), std::max(h.drop_threshold(), g.drop_threshold()));
  std::vector<Merged> mg;
  std::vector<SiteTerm> t;
  for (const auto& [ka, ca] : h.terms()) {
    if (ka.is_constant()) continue;
    for (const auto& [kb, cb] : g.terms()) {
      if (kb.is_constant()) continue;
      merge_keys(ka, kb, mg);
      const cplx prod = ca * cb;
      for (std::size_t q = 0; q < mg.size(); ++q) {
        const auto& e = mg[q];
        const int f = e.la * e.ab - e.aa * e.lb;
        if (f == 0) continue;
        t.clear();
        for (std::size_t s = 0; s < mg.size(); ++s) {
          const int l = mg[s].la + mg[s].lb;
          const int a = mg[s].aa + mg[s].ab - (s == q ? 1 : 0);
          if (l != 0 || a != 0) t.push_back({mg[s].site, l, a});
        }
        r.add(MonomialKey(t), prod * cplx(0.0, f / m(e.site)));
      }
    }
  }
  return r;
}

TFSeries apply_caps(const TFSeries& h, const Caps& caps) {
  TFSeries r(h.n_max(), h.drop_threshold());
  for (const auto& [k, c] : h.terms())
    if (caps.admits(k)) r.set(k, c);
  return r;
}

LieResult lie_transform(const TFSeries& h, const TFSeries& G, const MassVector& m, int order,
                        const Caps& caps, const NormParams& p, double tol) {
  if (order < 0) throw std::invalid_argument("order must be nonnegative");
  LieResult res;
  res.value = h;
  if (G.empty() || h.empty()) return res;
  TFSeries term = h;
  for (int n = 1; n <= order; ++n) {
    term = apply_caps(poisson_bracket(term, G, m), caps);
    term *= cplx(1.0 / n);
    res.value += term;
    res.orders_used = n;
    if (term.empty()) return res;
    if (tol > 0.0 && weighted_norm(term, m, p) <= tol) break;
  }
  TFSeries next = apply_caps(poisson_bracket(term, G, m), caps);
  next *= cplx(1.0 / (res.orders_used + 1));
  res.first_dropped_norm = weighted_norm(next, m, p);
  if (tol > 0.0 && res.first_dropped_norm > tol) res.converged = false;
  return res;
}

Split truncate(const TFSeries& h, const std::function<bool(const MonomialKey&)>& keep) {
  Split s{TFSeries(h.n_max(), h.drop_threshold()), TFSeries(h.n_max(), h.drop_threshold())};
  for (const auto& [k, c] : h.terms()) (keep(k) ? s.kept : s.dropped).set(k, c);
  return s;
}

TFSeries average(const TFSeries& h) {
  return truncate(h, [](const MonomialKey& k) { return k.angle_free() && k.alpha_norm() == 1; }).kept;
}

cplx evaluate(const TFSeries& h, const std::vector<double>& phi, const std::vector<double>& J) {
  if (static_cast<int>(phi.size()) < h.n_max() || static_cast<int>(J.size()) < h.n_max())
    throw std::invalid_argument("evaluation point shorter than N_max");
  cplx sum = 0.0;
  for (const auto& [k, c] : h.terms()) {
    double angle = 0.0;
    double amp = 1.0;
    for (const auto& s : k.terms()) {
      angle += s.l * phi[s.site - 1];
      for (int a = 0; a < s.alpha; ++a) amp *= J[s.site - 1];
    }
    sum += c * amp * std::polar(1.0, angle);
  }
  return sum;
}

}  // namespace kam

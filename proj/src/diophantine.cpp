#include "kam/diophantine.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <thread>

namespace kam {

void FrequencyVector::validate() const {
  if (!(a < b)) throw std::invalid_argument("frequency box needs a < b");
  for (double v : values)
    if (v < a || v > b) throw std::invalid_argument("frequency outside its box");
}

namespace {

// Calls f(l) for every l with all k entries nonzero, |l|_1 <= L and l[0] > 0.
void for_each_full_support(int k, int L, const std::function<void(const std::vector<int>&)>& f) {
  if (k <= 0 || k > L) return;
  std::vector<int> l(k);
  std::function<void(int, int)> rec = [&](int pos, int budget) {
    if (pos == k) {
      f(l);
      return;
    }
    const int remaining = k - pos - 1;  // each later entry needs at least 1
    for (int a = 1; a <= budget - remaining; ++a) {
      l[pos] = a;
      rec(pos + 1, budget - a);
      if (pos > 0) {
        l[pos] = -a;
        rec(pos + 1, budget - a);
      }
    }
  };
  rec(0, L);
}

}  // namespace

DivisorSet DivisorSet::build(const std::vector<std::vector<int>>& lower_sets, int n_max, int L, double threshold,
                             int stage, std::size_t budget) {
  DivisorSet ds;
  ds.threshold_ = threshold;
  ds.stage_ = stage;
  ds.L_ = L;
  if (L <= 0) return ds;
  std::vector<std::vector<int>> lowers;
  lowers.emplace_back();
  for (const auto& A : lower_sets)
    if (static_cast<int>(A.size()) <= L - 1) lowers.push_back(A);
  // Exact pair count: 2^{k-1} C(L, k) index vectors with full support on k sites.
  auto full_support_count = [L](int k) {
    double c = std::ldexp(1.0, k - 1);
    for (int q = 0; q < k; ++q) c *= static_cast<double>(L - q) / (q + 1);
    return c;
  };
  double estimate = 0.0;
  std::size_t maxA = 0;
  for (const auto& Al : lowers) {
    const int start = Al.empty() ? 1 : Al.back() + 1;
    if (start > n_max) continue;
    estimate += full_support_count(static_cast<int>(Al.size()) + 1) * (n_max - start + 1);
    maxA = std::max(maxA, Al.size() + 1);
  }
  if (estimate > static_cast<double>(budget))
    throw std::length_error("divisor enumeration over budget: max |A| = " + std::to_string(maxA) +
                            ", L_n = " + std::to_string(L) + ", estimated pairs " + std::to_string(estimate));
  for (const auto& Al : lowers) {
    const int start = Al.empty() ? 1 : Al.back() + 1;
    for (int j = start; j <= n_max; ++j) {
      std::vector<int> S = Al;
      S.push_back(j);
      for_each_full_support(static_cast<int>(S.size()), L, [&](const std::vector<int>& l) {
        for (std::size_t q = 0; q < S.size(); ++q) {
          ds.sites_.push_back(S[q]);
          ds.ls_.push_back(l[q]);
        }
        ds.offsets_.push_back(ds.sites_.size());
      });
    }
  }
  return ds;
}

DivisorSet DivisorSet::build(int n, const KamSchedule& sched, const MassVector& m, std::size_t budget) {
  return build(enumerate_An(n, m, sched), m.size(), sched.fourier_cutoff(n), std::pow(sched.eps.at(n), 1.0 / 12.0), n,
               budget);
}

double DivisorSet::divisor(std::size_t i, const std::vector<double>& xi) const {
  double s = 0.0;
  for (std::size_t q = offsets_[i]; q < offsets_[i + 1]; ++q) s += xi[sites_[q] - 1] * ls_[q];
  return s;
}

std::vector<int> DivisorSet::support(std::size_t i) const {
  return {sites_.begin() + offsets_[i], sites_.begin() + offsets_[i + 1]};
}

std::vector<int> DivisorSet::index(std::size_t i) const {
  return {ls_.begin() + offsets_[i], ls_.begin() + offsets_[i + 1]};
}

DiophantineReport DivisorSet::check(const std::vector<double>& xi, bool stop_at_first) const {
  DiophantineReport r;
  r.stage = stage_;
  r.margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < size(); ++i) {
    const double dv = divisor(i, xi);
    ++r.checked;
    r.margin = std::min(r.margin, std::abs(dv) - threshold_);
    if (std::abs(dv) < threshold_) {
      r.violations.push_back({support(i), index(i), dv, stage_});
      if (stop_at_first) break;
    }
  }
  r.pass = r.violations.empty();
  return r;
}

DiophantineReport check_stage(const FrequencyVector& xi, int n, const KamSchedule& sched, const MassVector& m,
                              std::size_t budget) {
  if (static_cast<int>(xi.values.size()) < m.size()) throw std::invalid_argument("frequency vector shorter than N_max");
  return DivisorSet::build(n, sched, m, budget).check(xi.values);
}

long covering_cutoff(double L, double thr, double d) {
  if (!(d > 0.0 && d < 1.0)) throw std::invalid_argument("d must lie in (0,1)");
  if (!(thr > 0.0)) throw std::invalid_argument("threshold must be positive");
  auto ok = [&](long q) { return L * std::pow(static_cast<double>(q), -1.0 / d) <= thr * (1.0 + 1e-12); };
  long q = std::max<long>(1, static_cast<long>(std::ceil(std::pow(L / thr, d) - 1e-9)));
  while (q > 1 && ok(q - 1)) --q;
  while (!ok(q)) ++q;
  return q;
}

long covering_cutoff(int n, const KamSchedule& sched, double d) {
  return covering_cutoff(sched.L.at(n), std::pow(sched.eps.at(n), 1.0 / 12.0), d);
}

std::size_t box_count(const std::vector<double>& sorted, double delta) {
  if (sorted.empty()) return 0;
  std::size_t count = 1;
  double last = std::floor(sorted[0] / delta);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    const double b = std::floor(sorted[i] / delta);
    if (b != last) {
      ++count;
      last = b;
    }
  }
  return count;
}

BoxDimension box_dimension(const std::vector<double>& seq, const std::vector<double>& scales) {
  if (seq.size() < 1000) throw std::invalid_argument("box dimension needs at least 1000 points");
  if (scales.size() < 5) throw std::invalid_argument("box dimension needs at least 5 scales");
  const auto [mn, mx] = std::minmax_element(scales.begin(), scales.end());
  if (*mx / *mn < 100.0 * (1.0 - 1e-9)) throw std::invalid_argument("scales must span at least two decades");
  BoxDimension r;
  std::vector<double> s = seq;
  std::sort(s.begin(), s.end());
  r.scales = scales;
  if (s.front() == s.back()) {
    r.degenerate = true;
    r.counts.assign(scales.size(), 1.0);
    return r;
  }
  std::vector<double> x, y;
  for (double d : scales) {
    const double c = static_cast<double>(box_count(s, d));
    r.counts.push_back(c);
    x.push_back(std::log(1.0 / d));
    y.push_back(std::log(c));
  }
  r.fit = fit_line(x, y);
  r.dimension = r.fit.slope;
  return r;
}

std::vector<double> auto_box_scales(const std::vector<double>& seq, int count, double min_boxes) {
  std::vector<double> s = seq;
  std::sort(s.begin(), s.end());
  const double span = s.empty() ? 0.0 : s.back() - s.front();
  std::vector<double> out;
  if (span <= 0.0) {
    for (int i = 0; i < count; ++i) out.push_back(std::pow(10.0, -1.0 - 2.0 * i / std::max(1, count - 1)));
    return out;
  }
  const double hi = span / min_boxes;
  const double target = static_cast<double>(s.size()) / 50.0;
  double a = std::log(hi), b = std::log(hi) - 80.0;
  for (int it = 0; it < 200; ++it) {
    const double c = 0.5 * (a + b);
    if (static_cast<double>(box_count(s, std::exp(c))) < target) a = c;
    else b = c;
  }
  const double lo = std::exp(a);
  for (int i = 0; i < count; ++i) out.push_back(std::exp(std::log(hi) + (std::log(lo) - std::log(hi)) * i / (count - 1)));
  return out;
}

double HilbertCube::half_width(int n) const { return ell * std::pow(static_cast<double>(n), -exponent()); }

double HilbertCube::lower(int n) const {
  return std::max(center.a, center.values.at(n - 1) - half_width(n));
}

double HilbertCube::upper(int n) const {
  return std::min(center.b, center.values.at(n - 1) + half_width(n));
}

std::vector<double> sample_point(const HilbertCube& cube, std::uint64_t seed, std::uint64_t index) {
  std::vector<double> x(cube.sites());
  for (int n = 1; n <= cube.sites(); ++n) {
    const double lo = cube.lower(n), hi = cube.upper(n);
    x[n - 1] = lo + (hi - lo) * uniform01(seed, index, n);
  }
  return x;
}

std::vector<std::vector<double>> sample_cube(const HilbertCube& cube, std::size_t count, std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample_point(cube, seed, i));
  return out;
}

MeasureScan measure_scan(const HilbertCube& cube, const KamSchedule& sched, const MassVector& m, int stages,
                         std::size_t count, std::uint64_t seed, int workers, std::size_t max_violations) {
  if (stages < 1 || stages > sched.n_stages + 1) throw std::invalid_argument("stage count out of schedule range");
  if (cube.sites() < m.size()) throw std::invalid_argument("cube has fewer sites than N_max");
  std::vector<DivisorSet> sets;
  MeasureScan res;
  for (int n = 0; n < stages; ++n) {
    sets.push_back(DivisorSet::build(n, sched, m));
    res.pair_counts.push_back(sets.back().size());
  }
  // First failing stage per sample (stages if none) and its violation.
  std::vector<int> fail_stage(count, stages);
  std::vector<Violation> first(count);
  auto work = [&](std::size_t i) {
    const std::vector<double> xi = sample_point(cube, seed, i);
    for (int n = 0; n < stages; ++n) {
      DiophantineReport r = sets[n].check(xi, true);
      if (!r.pass) {
        fail_stage[i] = n;
        first[i] = r.violations.front();
        return;
      }
    }
  };
  const int W = std::max(1, workers);
  if (W == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < W; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < count; i += W) work(i);
      });
    for (auto& t : pool) t.join();
  }
  for (int n = 0; n < stages; ++n) {
    ScanRow row;
    row.stage = n;
    row.n_samples = count;
    for (std::size_t i = 0; i < count; ++i)
      if (fail_stage[i] > n) ++row.survivors;
    row.fraction = count ? static_cast<double>(row.survivors) / count : 1.0;
    Interval ci = wilson_interval(row.survivors, count);
    row.ci_low = ci.low;
    row.ci_high = ci.high;
    res.rows.push_back(row);
  }
  for (std::size_t i = 0; i < count && res.violations.size() < max_violations; ++i)
    if (fail_stage[i] < stages) res.violations.push_back(first[i]);
  return res;
}

double strip_bound(int n, const KamSchedule& sched, double ell, double d) {
  const double nn = std::max(1, n);
  return std::pow(nn * nn * std::abs(std::log(sched.eps.at(n))), 1.0 / d) * std::pow(sched.eps.at(n), 1.0 / 12.0) / ell;
}

DCReport diophantine_check(const std::vector<double>& xi, double gamma, double tau, int cutoff) {
  const int d = static_cast<int>(xi.size());
  DCReport r;
  r.gamma_fit = std::numeric_limits<double>::infinity();
  double scale = 0.0;
  for (double v : xi) scale = std::max(scale, std::abs(v));
  bool zero_found = false;
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << d) && !zero_found; ++mask) {
    std::vector<int> S;
    for (int j = 0; j < d; ++j)
      if (mask >> j & 1) S.push_back(j);
    if (static_cast<int>(S.size()) > cutoff) continue;
    for_each_full_support(static_cast<int>(S.size()), cutoff, [&](const std::vector<int>& l) {
      if (zero_found) return;
      double dv = 0.0;
      int norm = 0;
      for (std::size_t q = 0; q < S.size(); ++q) {
        dv += xi[S[q]] * l[q];
        norm += std::abs(l[q]);
      }
      const double val = std::abs(dv) * std::pow(norm, tau);
      const bool is_zero = std::abs(dv) <= 1e-12 * norm * scale;
      if (val < r.gamma_fit || is_zero) {
        r.gamma_fit = is_zero ? 0.0 : val;
        r.witness.assign(d, 0);
        for (std::size_t q = 0; q < S.size(); ++q) r.witness[S[q]] = l[q];
        r.witness_value = dv;
        zero_found = is_zero;
      }
    });
  }
  r.pass = !zero_found && r.gamma_fit >= gamma && r.gamma_fit > 0.0;
  return r;
}

}  // namespace kam

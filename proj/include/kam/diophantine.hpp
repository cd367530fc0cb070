#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kam/kam.hpp"
#include "kam/series.hpp"
#include "kam/util.hpp"

namespace kam {

struct FrequencyVector {
  std::vector<double> values;
  double a = 0.0;
  double b = 1.0;
  void validate() const;
};

struct Violation {
  std::vector<int> A;
  std::vector<int> l;
  double divisor = 0.0;
  int stage = 0;
};

struct DiophantineReport {
  int stage = 0;
  bool pass = true;
  std::vector<Violation> violations;
  double margin = 0.0;  // min |<xi_A, l>| - eps_n^{1/12} over the checked pairs
  std::size_t checked = 0;
};

// The (A, l) pairs of one stage: supp(l) = A, A minus its maximum in A_n, max A <= N_max,
// 0 < |l|_1 <= L_n. Only one of l, -l is kept (first nonzero entry positive).
class DivisorSet {
 public:
  static DivisorSet build(int n, const KamSchedule& sched, const MassVector& m, std::size_t budget = 50'000'000);
  static DivisorSet build(const std::vector<std::vector<int>>& lower_sets, int n_max, int L, double threshold,
                          int stage, std::size_t budget = 50'000'000);

  std::size_t size() const { return offsets_.size() - 1; }
  double threshold() const { return threshold_; }
  int stage() const { return stage_; }
  int cutoff() const { return L_; }
  double divisor(std::size_t i, const std::vector<double>& xi) const;
  std::vector<int> support(std::size_t i) const;
  std::vector<int> index(std::size_t i) const;
  // Checks every pair; if stop_at_first, returns after the first violation.
  DiophantineReport check(const std::vector<double>& xi, bool stop_at_first = false) const;

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<int> sites_;
  std::vector<int> ls_;
  double threshold_ = 0.0;
  int stage_ = 0;
  int L_ = 0;
};

DiophantineReport check_stage(const FrequencyVector& xi, int n, const KamSchedule& sched, const MassVector& m,
                              std::size_t budget = 50'000'000);

// min{q in N : L q^{-1/d} <= thr}.
long covering_cutoff(double L, double thr, double d);
long covering_cutoff(int n, const KamSchedule& sched, double d);

struct BoxDimension {
  double dimension = 0.0;
  LineFit fit;
  std::vector<double> scales;
  std::vector<double> counts;
  bool degenerate = false;
};
BoxDimension box_dimension(const std::vector<double>& seq, const std::vector<double>& scales);
// Log-spaced scales between the box size giving ~min_boxes boxes and the one giving n/50 boxes.
std::vector<double> auto_box_scales(const std::vector<double>& seq, int count = 12, double min_boxes = 30.0);
std::size_t box_count(const std::vector<double>& sorted, double delta);

// prod_n [c_n - ell n^{-p}, c_n + ell n^{-p}] intersected with [a,b]; p defaults to 1/d.
struct HilbertCube {
  FrequencyVector center;
  double ell = 0.1;
  double d = 0.5;
  double width_exponent = 0.0;  // 0 means 1/d
  double exponent() const { return width_exponent > 0.0 ? width_exponent : 1.0 / d; }
  double half_width(int n) const;
  double lower(int n) const;
  double upper(int n) const;
  int sites() const { return static_cast<int>(center.values.size()); }
};

std::vector<double> sample_point(const HilbertCube& cube, std::uint64_t seed, std::uint64_t index);
std::vector<std::vector<double>> sample_cube(const HilbertCube& cube, std::size_t count, std::uint64_t seed);

struct ScanRow {
  int stage = 0;
  std::size_t n_samples = 0;
  std::size_t survivors = 0;
  double fraction = 1.0;
  double ci_low = 0.0;
  double ci_high = 1.0;
};
struct MeasureScan {
  std::vector<ScanRow> rows;
  std::vector<Violation> violations;  // first violation of each failing sample, capped
  std::vector<std::size_t> pair_counts;
};
MeasureScan measure_scan(const HilbertCube& cube, const KamSchedule& sched, const MassVector& m, int stages,
                         std::size_t count, std::uint64_t seed, int workers = 1, std::size_t max_violations = 1000);

// Strip bound l^{-1} (n^2 |log eps_n|)^{1/d} eps_n^{1/12}, without its constant.
double strip_bound(int n, const KamSchedule& sched, double ell, double d);

struct DCReport {
  bool pass = true;
  double gamma_fit = 0.0;   // min |<xi,l>| |l|_1^tau over the scan
  std::vector<int> witness; // l attaining the minimum (or a zero divisor)
  double witness_value = 0.0;
};
// Diophantine check |<xi,l>| >= gamma |l|_1^{-tau} for 0 < |l|_1 <= cutoff (one of l, -l).
DCReport diophantine_check(const std::vector<double>& xi, double gamma, double tau, int cutoff);

}  // namespace kam

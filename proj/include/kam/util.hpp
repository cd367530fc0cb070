#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kam {

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double max_residual = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct Interval {
  double low;
  double high;
};
// Wilson score interval for k successes out of n at 95%.
Interval wilson_interval(std::size_t k, std::size_t n);

// Counter-based stream: every (seed, stream, index) triple maps to a fixed value,
// so the draw for a sample does not depend on how samples are scheduled.
std::uint64_t mix64(std::uint64_t x);
double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);

// %.17g, enough for an exact double round-trip through text.
std::string fmt_double(double v);

}  // namespace kam

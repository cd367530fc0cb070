#pragma once

#include <iosfwd>
#include <string>

#include "kam/series.hpp"

namespace kam {

struct SeriesHeader {
  int n_max = 0;
  std::string mass_generator = "exp";
  double kappa = 1.0;
  std::vector<double> masses;  // filled for explicit generators
  NormParams norm;
  double drop_threshold = 0.0;
};

// JSON lines: one header record, then one {A, l, alpha, re, im} record per term in key order.
void write_series(std::ostream& os, const TFSeries& h, const SeriesHeader& header);
TFSeries read_series(std::istream& is, SeriesHeader* header = nullptr);

MassVector masses_from_header(const SeriesHeader& h);

}  // namespace kam

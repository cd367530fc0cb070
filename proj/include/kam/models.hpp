#pragma once

#include <vector>

#include "kam/series.hpp"

namespace kam {

// H = xi.J + (q/2) sum m_j J_j^2 + eps sum_{i=2}^N m_1 m_i cos(phi_1 - phi_i),
// with the mass-weighted products xi.J = sum m_j xi_j J_j.
struct LongRangeModel {
  std::vector<double> xi;
  MassVector masses;
  double eps = 0.0;
  double quadratic = 1.0;

  int sites() const { return static_cast<int>(xi.size()); }
  TFSeries hamiltonian() const;
  TFSeries perturbation() const;  // H minus xi.J
  double energy(const std::vector<double>& phi, const std::vector<double>& J) const;
};

// Masses m_1 = 1 and m_i = delta e^{-i} for i >= 2.
MassVector strip_masses(int N, double delta);

}  // namespace kam

#include "kam/models.hpp"

#include <cmath>
#include <stdexcept>

#include "kam/kam.hpp"

namespace kam {

TFSeries LongRangeModel::perturbation() const {
  const int N = sites();
  if (masses.size() < N) throw std::invalid_argument("mass vector shorter than the model");
  TFSeries P(N);
  for (int j = 1; j <= N; ++j)
    if (quadratic != 0.0) P.add(MonomialKey({j}, {0}, {2}), 0.5 * quadratic * masses(j));
  if (eps != 0.0) {
    for (int i = 2; i <= N; ++i) {
      std::vector<int> l(N, 0);
      l[0] = 1;
      l[i - 1] = -1;
      P += TFSeries::cosine_pair(N, l, 0.5 * eps * masses(1) * masses(i));
    }
  }
  return P;
}

TFSeries LongRangeModel::hamiltonian() const { return normal_form(xi, masses) + perturbation(); }

double LongRangeModel::energy(const std::vector<double>& phi, const std::vector<double>& J) const {
  double e = 0.0;
  for (int j = 1; j <= sites(); ++j) {
    const double m = masses(j);
    e += m * xi[j - 1] * J[j - 1] + 0.5 * quadratic * m * J[j - 1] * J[j - 1];
    if (j >= 2) e += eps * masses(1) * m * std::cos(phi[0] - phi[j - 1]);
  }
  return e;
}

MassVector strip_masses(int N, double delta) {
  std::vector<double> w(N);
  w[0] = 1.0;
  for (int i = 2; i <= N; ++i) w[i - 1] = delta * std::exp(-static_cast<double>(i));
  return MassVector::explicit_list(std::move(w), 1.0);
}

}  // namespace kam

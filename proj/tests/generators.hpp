#pragma once

// Hand-rolled random generators shared by the property tests.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "kam/series.hpp"

namespace gen {

using Rng = std::mt19937_64;

inline int uniform_int(Rng& r, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(r); }
inline double uniform(Rng& r, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(r); }

inline kam::cplx coefficient(Rng& r) { return {uniform(r, -1, 1), uniform(r, -1, 1)}; }

struct SeriesShape {
  int sites = 4;
  int terms = 30;
  int max_l = 2;
  int max_alpha = 2;
  int max_support = 3;
};

// Random nonconstant key on sites 1..sites.
inline kam::MonomialKey key(Rng& r, const SeriesShape& s) {
  for (;;) {
    const int size = uniform_int(r, 1, std::min(s.max_support, s.sites));
    std::vector<int> sites(s.sites);
    for (int i = 0; i < s.sites; ++i) sites[i] = i + 1;
    std::shuffle(sites.begin(), sites.end(), r);
    sites.resize(size);
    std::sort(sites.begin(), sites.end());
    std::vector<int> l(size), a(size);
    bool ok = true;
    for (int i = 0; i < size; ++i) {
      l[i] = uniform_int(r, -s.max_l, s.max_l);
      a[i] = uniform_int(r, 0, s.max_alpha);
      if (l[i] == 0 && a[i] == 0) ok = false;
    }
    if (ok) return kam::MonomialKey(sites, l, a);
  }
}

inline kam::TFSeries series(Rng& r, const SeriesShape& s) {
  kam::TFSeries h(s.sites);
  const int n = uniform_int(r, 1, s.terms);
  for (int i = 0; i < n; ++i) h.add(key(r, s), coefficient(r));
  return h;
}

// Real-valued series: every term comes with its conjugate partner.
inline kam::TFSeries real_series(Rng& r, const SeriesShape& s) {
  kam::TFSeries h(s.sites);
  const int n = uniform_int(r, 1, std::max(1, s.terms / 2));
  for (int i = 0; i < n; ++i) {
    const kam::MonomialKey k = key(r, s);
    const kam::cplx c = coefficient(r);
    if (k.angle_free()) {
      h.add(k, c.real());
    } else {
      h.add(k, c);
      h.add(k.conjugate_index(), std::conj(c));
    }
  }
  return h;
}

// Affine in J: alpha_norm <= 1.
inline kam::TFSeries affine_series(Rng& r, int sites, int terms, int max_l) {
  kam::TFSeries h(sites);
  SeriesShape s{sites, terms, max_l, 1, sites};
  for (int i = 0; i < terms; ++i) {
    kam::MonomialKey k = key(r, s);
    if (k.alpha_norm() > 1) continue;
    h.add(k, coefficient(r));
  }
  return h;
}

inline std::vector<double> point(Rng& r, int n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(r, lo, hi);
  return v;
}

// Coefficient-wise sup of a - b relative to the sup of the inputs.
inline double relative_gap(const kam::TFSeries& a, const kam::TFSeries& b) {
  const kam::TFSeries d = a - b;
  const double scale = std::max({a.max_abs(), b.max_abs(), 1e-300});
  return d.max_abs() / scale;
}

}  // namespace gen

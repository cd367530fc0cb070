#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <numbers>

#include "generators.hpp"
#include "kam/series.hpp"

using namespace kam;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const cplx I(0.0, 1.0);

// Straight re-implementation of the weighted norm from its definition.
double naive_norm(const TFSeries& h, const MassVector& m, const NormParams& p) {
  std::map<int, double> block;
  for (const auto& [k, c] : h.terms()) {
    auto A = k.support();
    if (A.empty()) continue;
    int top = 0;
    for (int s : A) top = std::max(top, s);
    double lower = 1.0;
    for (int s : A)
      if (s != top) lower *= m(s);
    int la = 0, aa = 0;
    for (int v : k.l()) la += std::abs(v);
    for (int v : k.alpha()) aa += v;
    block[top] += std::pow(lower, -p.beta) * std::abs(c) * std::pow(p.rho, aa) * std::exp(p.sigma * la);
  }
  double sup = 0.0;
  for (auto& [j, v] : block) sup = std::max(sup, v / m(j));
  return sup;
}

cplx naive_eval(const TFSeries& h, const std::vector<double>& phi, const std::vector<double>& J) {
  cplx s = 0.0;
  for (const auto& [k, c] : h.terms()) {
    cplx t = c;
    const auto A = k.support();
    const auto l = k.l();
    const auto a = k.alpha();
    for (std::size_t i = 0; i < A.size(); ++i)
      t *= std::pow(J[A[i] - 1], a[i]) * std::exp(I * (l[i] * phi[A[i] - 1]));
    s += t;
  }
  return s;
}

// {h,g} at a point from central differences of the evaluated series.
cplx fd_bracket(const TFSeries& h, const TFSeries& g, const MassVector& m, std::vector<double> phi,
                std::vector<double> J) {
  const double e = 1e-5;
  cplx s = 0.0;
  for (int j = 0; j < m.size(); ++j) {
    auto d = [&](const TFSeries& f, std::vector<double>& v) {
      const double v0 = v[j];
      v[j] = v0 + e;
      cplx fp = evaluate(f, phi, J);
      v[j] = v0 - e;
      cplx fm = evaluate(f, phi, J);
      v[j] = v0;
      return (fp - fm) / (2 * e);
    };
    s += (d(h, phi) * d(g, J) - d(h, J) * d(g, phi)) / m(j + 1);
  }
  return s;
}

double sup_of(std::initializer_list<const TFSeries*> xs) {
  double s = 0.0;
  for (auto* x : xs) s = std::max(s, x->max_abs());
  return s;
}

}  // namespace

TEST_CASE("block_norm on hand examples") {
  NormParams p{0.5, 0.3, 0.5};
  CHECK(block_norm(TFSeries(2), {1}, p) == 0.0);
  CHECK_THAT(block_norm(TFSeries::monomial(2, {1}, {0}, {1}, 1.0), {1}, p), WithinRel(0.3, 1e-15));
  CHECK_THAT(block_norm(TFSeries::monomial(2, {1, 2}, {1, -1}, {0, 0}, 1.0), {1, 2}, p),
             WithinRel(std::exp(1.0), 1e-15));
  CHECK(block_norm(TFSeries::monomial(2, {1, 2}, {1, -1}, {0, 0}, 1.0), {1}, p) == 0.0);
}

TEST_CASE("weighted_norm on hand examples") {
  const MassVector m = MassVector::exponential(1.0, 3);
  CHECK_THAT(weighted_norm(TFSeries::monomial(3, {1}, {0}, {1}, 1.0), m, {0.5, 0.3, 1.0}),
             WithinRel(0.3 * std::exp(1.0), 1e-14));
  CHECK_THAT(weighted_norm(TFSeries::monomial(3, {1, 2}, {1, -1}, {0, 0}, 1.0), m, {0.5, 1.0, 0.5}),
             WithinRel(std::exp(1.0) * std::exp(2.0) * std::exp(0.5), 1e-14));
  auto r = weighted_norm_report(TFSeries::constant(3, 2.5) + TFSeries::monomial(3, {2}, {1}, {0}, 1.0), m, {});
  CHECK(r.constant == 2.5);
  CHECK(r.argmax_site == 2);
  CHECK_THROWS_WITH(weighted_norm(TFSeries::monomial(5, {5}, {1}, {0}, 1.0), m, {}),
                    Catch::Matchers::ContainsSubstring("support out of range"));
}

TEST_CASE("weighted_norm matches the brute-force oracle") {
  gen::Rng r(11);
  const MassVector m = MassVector::exponential(0.7, 4);
  for (int t = 0; t < 200; ++t) {
    const TFSeries h = gen::series(r, {4, 50, 3, 3, 4});
    const NormParams p{gen::uniform(r, 0.05, 0.95), gen::uniform(r, 0.1, 2.0), gen::uniform(r, 0.1, 2.0)};
    CHECK_THAT(weighted_norm(h, m, p), WithinRel(naive_norm(h, m, p), 1e-14));
  }
}

TEST_CASE("weighted_norm is homogeneous and subadditive") {
  gen::Rng r(12);
  const MassVector m = MassVector::exponential(1.0, 4);
  const NormParams p{0.5, 0.8, 0.6};
  for (int t = 0; t < 200; ++t) {
    const TFSeries a = gen::series(r, {}), b = gen::series(r, {});
    const cplx s = gen::coefficient(r);
    CHECK_THAT(weighted_norm(s * a, m, p), WithinRel(std::abs(s) * weighted_norm(a, m, p), 1e-12));
    CHECK(weighted_norm(a + b, m, p) <= (weighted_norm(a, m, p) + weighted_norm(b, m, p)) * (1 + 1e-12));
  }
}

TEST_CASE("evaluate on hand examples and against a naive loop") {
  CHECK(evaluate(TFSeries::monomial(2, {1}, {0}, {1}, 1.0), {0.7, 0.1}, {0.2, 0.9}) == cplx(0.2, 0.0));
  CHECK_THAT(evaluate(TFSeries::monomial(1, {1}, {1}, {0}, 1.0), {std::numbers::pi}, {0.0}).real(),
             WithinAbs(-1.0, 1e-15));
  CHECK_THROWS(evaluate(TFSeries::monomial(3, {3}, {1}, {0}, 1.0), {0.0}, {0.0}));
  gen::Rng r(13);
  for (int t = 0; t < 200; ++t) {
    const TFSeries h = gen::series(r, {});
    const auto phi = gen::point(r, 4, -3, 3), J = gen::point(r, 4, -1, 1);
    const cplx a = evaluate(h, phi, J), b = naive_eval(h, phi, J);
    CHECK(std::abs(a - b) <= 1e-13 * (1 + std::abs(b)));
  }
}

TEST_CASE("poisson_bracket hand computations") {
  const MassVector m = MassVector::exponential(1.0, 3);
  // {J_1, e(i phi_1)} = -(i/m_1) e(i phi_1)
  TFSeries b = poisson_bracket(TFSeries::monomial(3, {1}, {0}, {1}, 1.0), TFSeries::monomial(3, {1}, {1}, {0}, 1.0), m);
  REQUIRE(b.size() == 1);
  CHECK(std::abs(b.coeff(MonomialKey({1}, {1}, {0})) - (-I / m(1))) < 1e-15);
  // {xi.J, e(i phi_2)} = -i xi_2 e(i phi_2) with xi.J = sum m_j xi_j J_j
  const std::vector<double> xi{1.3, 0.7, 2.1};
  TFSeries N(3);
  for (int j = 1; j <= 3; ++j) N.add(MonomialKey({j}, {0}, {1}), m(j) * xi[j - 1]);
  b = poisson_bracket(N, TFSeries::monomial(3, {2}, {1}, {0}, 1.0), m);
  REQUIRE(b.size() == 1);
  CHECK(std::abs(b.coeff(MonomialKey({2}, {1}, {0})) - (-I * xi[1])) < 1e-15);
  // Constants commute with everything.
  CHECK(poisson_bracket(TFSeries::constant(3, 4.0), N, m).empty());
}

TEST_CASE("poisson_bracket matches a finite-difference bracket") {
  gen::Rng r(14);
  const MassVector m = MassVector::exponential(0.5, 3);
  for (int t = 0; t < 50; ++t) {
    const TFSeries h = gen::series(r, {3, 10, 2, 2, 3}), g = gen::series(r, {3, 10, 2, 2, 3});
    const auto phi = gen::point(r, 3, -3, 3), J = gen::point(r, 3, -0.8, 0.8);
    const cplx exact = evaluate(poisson_bracket(h, g, m), phi, J);
    const cplx fd = fd_bracket(h, g, m, phi, J);
    CHECK(std::abs(exact - fd) <= 1e-6 * (1 + std::abs(exact)));
  }
}

TEST_CASE("bracket antisymmetry, Jacobi and Leibniz on random series") {
  gen::Rng r(15);
  const MassVector m = MassVector::exponential(1.0, 4);
  for (int t = 0; t < 200; ++t) {
    const TFSeries h = gen::series(r, {}), g = gen::series(r, {}), k = gen::series(r, {});
    const TFSeries hg = poisson_bracket(h, g, m), gh = poisson_bracket(g, h, m);
    CHECK(gen::relative_gap(hg, -1.0 * gh) <= 1e-12);
    CHECK(poisson_bracket(h, h, m).max_abs() <= 1e-12 * std::max(1.0, hg.max_abs()));

    const TFSeries j1 = poisson_bracket(h, poisson_bracket(g, k, m), m);
    const TFSeries j2 = poisson_bracket(g, poisson_bracket(k, h, m), m);
    const TFSeries j3 = poisson_bracket(k, poisson_bracket(h, g, m), m);
    const double scale = std::max(1e-300, sup_of({&j1, &j2, &j3}));
    CHECK((j1 + j2 + j3).max_abs() <= 1e-10 * scale);

    const TFSeries lhs = poisson_bracket(h, multiply(g, k), m);
    const TFSeries rhs = multiply(poisson_bracket(h, g, m), k) + multiply(g, poisson_bracket(h, k, m));
    CHECK((lhs - rhs).max_abs() <= 1e-10 * std::max({1e-300, lhs.max_abs(), rhs.max_abs()}));
  }
}

TEST_CASE("bracket is bilinear") {
  gen::Rng r(16);
  const MassVector m = MassVector::exponential(1.0, 4);
  for (int t = 0; t < 50; ++t) {
    const TFSeries a = gen::series(r, {}), b = gen::series(r, {}), g = gen::series(r, {});
    const cplx s = gen::coefficient(r);
    const TFSeries lhs = poisson_bracket(a + s * b, g, m);
    const TFSeries rhs = poisson_bracket(a, g, m) + s * poisson_bracket(b, g, m);
    CHECK(gen::relative_gap(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("reality is preserved by bracket, Lie transform, truncate and average") {
  gen::Rng r(17);
  const MassVector m = MassVector::exponential(1.0, 4);
  for (int t = 0; t < 50; ++t) {
    const TFSeries h = gen::real_series(r, {}), g = gen::real_series(r, {});
    REQUIRE(h.is_real(1e-15));
    CHECK(poisson_bracket(h, g, m).is_real(1e-12));
    CHECK(lie_transform(h, 0.01 * g, m, 3, Caps{}, NormParams{}).value.is_real(1e-12));
    auto sp = truncate(h, [](const MonomialKey& k) { return k.l_norm() <= 2; });
    CHECK(sp.kept.is_real(1e-15));
    CHECK(sp.dropped.is_real(1e-15));
    CHECK(average(h).is_real(1e-15));
  }
}

TEST_CASE("lie_transform basic cases") {
  gen::Rng r(18);
  const MassVector m = MassVector::exponential(1.0, 4);
  const TFSeries h = gen::series(r, {}), G = gen::series(r, {});
  CHECK(gen::relative_gap(lie_transform(h, TFSeries(4), m, 5, Caps{}, NormParams{}).value, h) == 0.0);
  const TFSeries one = lie_transform(h, G, m, 1, Caps{}, NormParams{}).value;
  CHECK(gen::relative_gap(one, h + poisson_bracket(h, G, m)) <= 1e-15);
}

TEST_CASE("lie_transform of a linear normal form by a one-harmonic generator") {
  // ad_G(xi.J) = -i <xi,l> G and ad_G^2 (xi.J) = 0, so the order-2 result is xi.J - i <xi,l> G.
  const MassVector m = MassVector::exponential(1.0, 3);
  const std::vector<double> xi{1.0, 1.7, 0.4};
  TFSeries N(3);
  for (int j = 1; j <= 3; ++j) N.add(MonomialKey({j}, {0}, {1}), m(j) * xi[j - 1]);
  const cplx c(0.3, -0.2);
  const TFSeries G = TFSeries::monomial(3, {1, 3}, {2, -1}, {0, 0}, c);
  const double dot = 2 * xi[0] - xi[2];
  const TFSeries expect = N + (-I * dot) * G;
  CHECK(gen::relative_gap(lie_transform(N, G, m, 2, Caps{}, NormParams{}).value, expect) <= 1e-15);
}

TEST_CASE("lie_transform matches the exact time-one flow of an angle-only generator") {
  // G = a e(i phi_1) + conj: J_1 moves to J_1 - G'(phi_1)/m_1, so J_1^2 maps to (J_1 - G'/m_1)^2.
  const MassVector m = MassVector::exponential(0.5, 1);
  const cplx a(0.2, 0.1);
  const TFSeries G = TFSeries::monomial(1, {1}, {1}, {0}, a) + TFSeries::monomial(1, {1}, {-1}, {0}, std::conj(a));
  const TFSeries h = TFSeries::monomial(1, {1}, {0}, {2}, 1.0);
  const TFSeries flow = lie_transform(h, G, m, 6, Caps{}, NormParams{}).value;
  const TFSeries dG = (1.0 / m(1)) * d_phi(G, 1);
  const TFSeries J1 = TFSeries::monomial(1, {1}, {0}, {1}, 1.0);
  const TFSeries expect = multiply(J1 - dG, J1 - dG);
  CHECK(gen::relative_gap(flow, expect) <= 1e-14);
}

TEST_CASE("lie_transform honours caps") {
  gen::Rng r(19);
  const MassVector m = MassVector::exponential(1.0, 4);
  const Caps caps{2, 3, 2};
  for (int t = 0; t < 20; ++t) {
    const TFSeries h = apply_caps(gen::series(r, {}), caps), G = apply_caps(gen::series(r, {}), caps);
    const auto res = lie_transform(h, 0.1 * G, m, 4, caps, NormParams{});
    for (const auto& [k, c] : res.value.terms()) CHECK(caps.admits(k));
  }
}

TEST_CASE("truncate is an exact partition") {
  const TFSeries h =
      TFSeries::monomial(2, {1}, {0}, {1}, 1.0) + TFSeries::monomial(2, {1}, {0}, {2}, 1.0);
  auto all = truncate(h, [](const MonomialKey&) { return true; });
  CHECK(gen::relative_gap(all.kept, h) == 0.0);
  CHECK(all.dropped.empty());
  auto sp = truncate(h, [](const MonomialKey& k) { return k.alpha_norm() <= 1; });
  CHECK(sp.kept.size() == 1);
  CHECK(sp.kept.coeff(MonomialKey({1}, {0}, {1})) == cplx(1.0));
  CHECK(sp.dropped.coeff(MonomialKey({1}, {0}, {2})) == cplx(1.0));

  gen::Rng r(20);
  for (int t = 0; t < 100; ++t) {
    const TFSeries g = gen::series(r, {});
    const int cut = gen::uniform_int(r, 0, 4);
    auto s = truncate(g, [cut](const MonomialKey& k) { return k.l_norm() <= cut; });
    CHECK(s.kept.size() + s.dropped.size() == g.size());
    for (const auto& [k, c] : g.terms()) CHECK((k.l_norm() <= cut ? s.kept : s.dropped).coeff(k) == c);
  }
}

TEST_CASE("average keeps the angle-free linear part") {
  CHECK(average(TFSeries::monomial(3, {1}, {1}, {0}, 1.0)).empty());
  CHECK(average(TFSeries::constant(3, 2.0)).empty());
  const TFSeries h = TFSeries::monomial(3, {3}, {0}, {1}, 2.0) + TFSeries::monomial(3, {1, 2}, {0, 0}, {1, 1}, 1.0) +
                     TFSeries::monomial(3, {1}, {1}, {1}, 1.0);
  const TFSeries a = average(h);
  REQUIRE(a.size() == 1);
  CHECK(a.coeff(MonomialKey({3}, {0}, {1})) == cplx(2.0));
}

TEST_CASE("monomial keys reject malformed input") {
  CHECK_THROWS(MonomialKey({0}, {1}, {0}));
  CHECK_THROWS(MonomialKey({2, 1}, {1, 1}, {0, 0}));
  CHECK_THROWS(MonomialKey({1}, {0}, {0}));
  CHECK_THROWS(MonomialKey({1}, {1}, {-1}));
  CHECK_THROWS(MassVector::explicit_list({0.5, 0.7}, 1.0));
  CHECK_THROWS(NormParams{1.0, 1.0, 1.0}.validate());
}

TEST_CASE("key ordering is by top site, size, sites, l, alpha") {
  const MonomialKey a({1}, {1}, {0}), b({2}, {-1}, {0}), c({1, 2}, {1, -1}, {0, 0}), d({2}, {1}, {0});
  CHECK(a < b);
  CHECK(b < d);
  CHECK(d < c);
  CHECK_FALSE(c < a);
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "kam/dynamics.hpp"
#include "kam/kam.hpp"
#include "kam/models.hpp"

using namespace kam;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const cplx I(0.0, 1.0);

// Subsets of {1..N} with sum of sites <= bound, by scanning all 2^N masks.
std::vector<std::vector<int>> brute_subsets(int N, double bound) {
  std::vector<std::vector<int>> out;
  for (unsigned mask = 1; mask < (1u << N); ++mask) {
    std::vector<int> A;
    int sum = 0;
    for (int i = 0; i < N; ++i)
      if (mask >> i & 1) {
        A.push_back(i + 1);
        sum += i + 1;
      }
    if (sum <= bound) out.push_back(A);
  }
  std::sort(out.begin(), out.end());
  return out;
}

LongRangeModel three_site(double eps) {
  return {{1.0, 4.1213, 1.5023}, MassVector::exponential(4.0, 3), eps, 1.0};
}

}  // namespace

TEST_CASE("schedule recurrences") {
  const KamSchedule s = build_schedule(1e-4, 0.5, 2.0, 1.0, 6);
  CHECK_THAT(s.eps[1], WithinRel(1e-5, 1e-12));
  CHECK_THAT(s.mu[1], WithinRel(0.0625, 1e-15));
  CHECK_THAT(s.beta[2], WithinRel(0.4375, 1e-15));
  CHECK(s.sigma[1] == s.sigma[0]);
  CHECK(s.beta[1] == s.beta[0]);
  for (int n = 0; n + 1 < static_cast<int>(s.sigma.size()); ++n) {
    CHECK(s.eps[n + 1] == std::pow(s.eps[n], 1.25));
    CHECK(s.eps[n + 1] < s.eps[n]);
    CHECK(s.rho[n + 1] < s.rho[n]);
    CHECK_THAT(s.rho[n], WithinRel(std::sqrt(s.eps[n]) * 2.0, 1e-15));
    CHECK_THAT(s.L[n], WithinRel(std::abs(std::log(s.eps[n + 1] / s.eps[n])) / s.sigma[n], 1e-15));
    if (n >= 1) {
      CHECK(s.sigma[n + 1] == s.sigma[n] - 2 * s.s[n]);
      CHECK(s.beta[n + 1] == s.beta[n] - s.mu[n]);
      CHECK(s.sigma[n + 1] < s.sigma[n]);
      CHECK(s.beta[n + 1] < s.beta[n]);
    }
    CHECK(s.sigma[n] > 0.5 * s.sigma[0]);
    CHECK(s.beta[n] > 0.5 * s.beta[0]);
  }
}

TEST_CASE("Fourier cutoff from the schedule") {
  // sigma_0 = 1 and eps_0 = e^{-20}: L_0 = |log eps_0| / 4 = 5.
  const KamSchedule s = build_schedule(std::exp(-20.0), 0.5, 1.0, 1.0, 2);
  CHECK_THAT(s.L[0], WithinRel(5.0, 1e-14));
  CHECK(s.fourier_cutoff(0) == 5);
}

TEST_CASE("schedule gate and input validation") {
  const KamSchedule ok = build_schedule(1e-8, 0.5, 1.0, 1.0, 2);
  CHECK(ok.gate_ok);
  const KamSchedule warn = build_schedule(1e-2, 0.5, 0.5, 0.5, 2);
  CHECK_FALSE(warn.gate_ok);
  CHECK_FALSE(warn.warnings.empty());
  CHECK_FALSE(build_schedule(1e-8, 0.5, 1.0, 1.0, 2, 0.1).gate_ok);
  CHECK_THROWS(build_schedule(0.0, 0.5, 1.0, 1.0, 2));
  CHECK_THROWS(build_schedule(1e-4, 1.0, 1.0, 1.0, 2));
  CHECK_THROWS(build_schedule(1e-4, 0.5, -1.0, 1.0, 2));
}

TEST_CASE("admissible sets on hand examples") {
  const MassVector m = MassVector::exponential(1.0, 6);
  // m_A^mu >= ratio  <=>  sum_{i in A} i <= |log ratio| / (kappa mu)
  const auto three = enumerate_admissible(m, 1.0, std::exp(-3.0));
  REQUIRE(three.size() == 4);
  CHECK(three[0] == std::vector<int>{1});
  CHECK(three[1] == std::vector<int>{2});
  CHECK(three[2] == std::vector<int>{1, 2});
  CHECK(three[3] == std::vector<int>{3});
  const auto one = enumerate_admissible(m, 1.0, std::exp(-1.0));
  REQUIRE(one.size() == 1);
  CHECK(one[0] == std::vector<int>{1});
  CHECK_THROWS(enumerate_admissible(MassVector::explicit_list({2.0, 1.0}, 1.0), 1.0, 0.5));
}

TEST_CASE("admissible sets match brute-force enumeration") {
  gen::Rng r(41);
  for (int t = 0; t < 100; ++t) {
    const int N = gen::uniform_int(r, 1, 12);
    const double kappa = gen::uniform(r, 0.3, 3.0), mu = gen::uniform(r, 0.05, 1.0);
    const double bound = gen::uniform(r, 0.5, 20.0) + 0.5;  // keep away from integer ties
    const MassVector m = MassVector::exponential(kappa, N);
    auto got = enumerate_admissible(m, mu, std::exp(-bound * kappa * mu));
    std::sort(got.begin(), got.end());
    CHECK(got == brute_subsets(N, bound));
    // |A| <= sqrt(2K) and max A <= K with K = sum bound.
    for (const auto& A : got) {
      CHECK(A.size() <= std::sqrt(2.0 * bound));
      CHECK(A.back() <= bound);
    }
  }
}

TEST_CASE("kam_truncate hand examples and exact partition") {
  const MassVector m = MassVector::exponential(1.0, 3);
  const KamSchedule s = build_schedule(1e-4, 0.5, 1.0, 1.0, 3);
  const TFSeries quad = TFSeries::monomial(3, {1}, {0}, {2}, 1.0);
  auto tr = kam_truncate(quad, 0, s, m);
  CHECK(tr.Q.empty());
  CHECK(gen::relative_gap(tr.R, quad) == 0.0);

  const int L = s.fourier_cutoff(0) + 1;
  const TFSeries P = TFSeries::monomial(3, {1}, {0}, {1}, 1.0) + TFSeries::monomial(3, {1}, {L}, {0}, 1.0);
  tr = kam_truncate(P, 0, s, m);
  REQUIRE(tr.Q.size() == 1);
  CHECK(tr.Q.coeff(MonomialKey({1}, {0}, {1})) == cplx(1.0));

  gen::Rng r(42);
  for (int t = 0; t < 50; ++t) {
    const TFSeries h = gen::series(r, {3, 30, 4, 2, 3});
    auto sp = kam_truncate(h, 0, s, m);
    CHECK((sp.Q + sp.R - h).max_abs() == 0.0);
    for (const auto& [k, c] : sp.Q.terms()) CHECK(k.alpha_norm() <= 1);
  }
}

TEST_CASE("truncation remainder on the half-stage parameters") {
  // Terms with |alpha| >= 2 or lower support outside A_n lose a factor eps_{n+1}/eps_n;
  // the Fourier tail loses e^{-L_n s_n} = (eps_{n+1}/eps_n)^{s_n/sigma_n}.
  const MassVector m = MassVector::exponential(1.0, 6);
  const KamSchedule s = build_schedule(1e-4, 0.5, 1.0, 1.0, 4);
  gen::Rng r(43);
  double fitted = 0.0;
  for (int n = 0; n < 3; ++n) {
    const double ratio = s.ratio(n);
    const int Lc = s.fourier_cutoff(n);
    for (int t = 0; t < 100; ++t) {
      TFSeries P = gen::series(r, {6, 30, Lc + 3, 3, 4});
      P *= cplx(s.eps[n] / weighted_norm(P, m, s.params(n)));
      auto tr = kam_truncate(P, n, s, m);
      auto no_tail = truncate(tr.R, [&](const MonomialKey& k) { return k.l_norm() <= Lc; });
      const double c = weighted_norm(no_tail.kept, m, s.half_params(n)) / (3 * s.eps[n + 1]);
      fitted = std::max(fitted, c);
      CHECK(c <= 1.0);
      const double tail_factor = std::pow(ratio, s.s[n] / s.sigma[n]);
      CHECK(tr.norm_R_half <= s.eps[n] * (2 * ratio + tail_factor) * (1 + 1e-12));
    }
  }
  CHECK(fitted > 0.0);
}

TEST_CASE("cohomological equation hand examples") {
  const MassVector m = MassVector::exponential(1.0, 3);
  CHECK(solve_cohomological(TFSeries::monomial(3, {3}, {0}, {1}, 2.0), {1.0, 0.5, 0.3}, 0.1).G.empty());
  const cplx c(0.3, 0.4);
  auto res = solve_cohomological(TFSeries::monomial(3, {1, 2}, {1, -1}, {0, 0}, c), {1.0, 0.5, 0.3}, 0.1);
  CHECK_THAT(res.min_divisor, WithinRel(0.5, 1e-15));
  REQUIRE(res.G.size() == 1);
  CHECK_THAT(std::abs(res.G.terms().begin()->second), WithinRel(2 * std::abs(c), 1e-15));
  try {
    solve_cohomological(TFSeries::monomial(3, {1, 2}, {1, -1}, {0, 0}, c), {1.0, 1.0, 0.3}, 0.1, 3);
    FAIL("expected a small divisor");
  } catch (const SmallDivisorViolation& e) {
    CHECK(e.A == std::vector<int>{1, 2});
    CHECK(e.l == std::vector<int>{1, -1});
    CHECK(e.value == 0.0);
    CHECK(e.stage == 3);
    CHECK(e.kind == "SmallDivisorViolation");
  }
}

TEST_CASE("cohomological residual vanishes on random affine Q") {
  gen::Rng r(44);
  const MassVector m = MassVector::exponential(1.0, 4);
  for (int t = 0; t < 100; ++t) {
    // Frequencies with |<xi,l>| >= 1e-3 for all l with entries in [-3, 3], by rejection.
    std::vector<double> xi;
    for (;;) {
      xi = gen::point(r, 4, 0.5, 3.0);
      bool good = true;
      for (int a = -3; a <= 3 && good; ++a)
        for (int b = -3; b <= 3 && good; ++b)
          for (int c = -3; c <= 3 && good; ++c)
            for (int d = -3; d <= 3 && good; ++d)
              if ((a || b || c || d) && std::abs(a * xi[0] + b * xi[1] + c * xi[2] + d * xi[3]) < 1e-3) good = false;
      if (good) break;
    }
    const TFSeries Q = gen::affine_series(r, 4, 30, 3);
    const auto res = solve_cohomological(Q, xi, 1e-3);
    const TFSeries resid = poisson_bracket(normal_form(xi, m), res.G, m) + Q - average(Q);
    CHECK(weighted_norm(resid, m, NormParams{}) <= 1e-13 * weighted_norm(Q, m, NormParams{}));
    for (const auto& [k, c] : res.G.terms()) CHECK(k.alpha_norm() <= 1);
  }
}

TEST_CASE("kam_step trivial inputs") {
  const MassVector m = MassVector::exponential(1.0, 3);
  const KamSchedule s = build_schedule(1e-6, 0.5, 1.0, 1.0, 3);
  const std::vector<double> xi{1.0, 1.7, 2.9};
  StageRecord rec;
  IterationState zero = kam_step(initial_state(TFSeries(3), xi, s, m), s, m, StepOptions{}, &rec);
  CHECK(zero.P.empty());
  CHECK(zero.xi == xi);
  CHECK(rec.shift_inf_norm == 0.0);

  TFSeries P(3);
  const std::vector<double> c{2e-7, -1e-7, 5e-8};
  for (int j = 1; j <= 3; ++j) P.add(MonomialKey({j}, {0}, {1}), c[j - 1]);
  IterationState st = kam_step(initial_state(P, xi, s, m), s, m, StepOptions{}, &rec);
  CHECK(st.generators.back().empty());
  for (int j = 1; j <= 3; ++j) CHECK_THAT(st.xi[j - 1] - xi[j - 1], WithinRel(c[j - 1] / m(j), 1e-9));
  CHECK(st.P.empty());
}

TEST_CASE("one step on the three-site long-range model") {
  const LongRangeModel mod = three_site(1e-6);
  const KamSchedule s = build_schedule(1e-6, 0.05, 1.0, 1.5, 2);
  const auto res = run_iteration(mod.hamiltonian(), mod.xi, s, mod.masses, StepOptions{}, 1);
  REQUIRE(res.records.size() == 1);
  const auto& r = res.records[0];
  CHECK(r.norm_P_next <= std::pow(1e-6, 1.25));
  CHECK(r.norm_G <= 10 * std::pow(s.eps[0], 11.0 / 12.0));
  CHECK(r.shift_inf_norm <= 10 * std::sqrt(s.eps[0]) / s.rho0);
  CHECK(r.min_divisor >= 0.5 * std::pow(s.eps[0], 1.0 / 12.0));
  // Bookkeeping: the normal form plus Q and R reproduce H before the transformation.
  const TFSeries P = mod.hamiltonian() - normal_form(mod.xi, mod.masses);
  auto tr = kam_truncate(P, 0, s, mod.masses);
  CHECK(gen::relative_gap(normal_form(mod.xi, mod.masses) + tr.Q + tr.R, mod.hamiltonian()) == 0.0);
  // The new generator solves the cohomological equation exactly.
  const TFSeries resid = poisson_bracket(normal_form(mod.xi, mod.masses), res.state.generators[0], mod.masses) + tr.Q -
                         average(tr.Q);
  CHECK(resid.max_abs() <= 1e-13 * tr.Q.max_abs());
}

TEST_CASE("run_iteration on zero, resonant and oversized inputs") {
  const LongRangeModel base = three_site(1e-6);
  const KamSchedule s = build_schedule(1e-6, 0.05, 1.0, 1.5, 3);
  const auto triv = run_iteration(normal_form(base.xi, base.masses), base.xi, s, base.masses, StepOptions{}, 3);
  REQUIRE(triv.records.size() == 3);
  for (const auto& r : triv.records) {
    CHECK(r.norm_P == 0.0);
    CHECK(r.shift_inf_norm == 0.0);
  }
  CHECK(triv.state.xi == base.xi);

  LongRangeModel res = base;
  res.xi = {1.0, 1.0 + 1e-4, 1.5023};  // |xi_1 - xi_2| <= sqrt(eps)
  CHECK_THROWS_AS(run_iteration(res.hamiltonian(), res.xi, s, res.masses, StepOptions{}, 3), SmallDivisorViolation);

  const LongRangeModel big = three_site(1e-2);
  CHECK_THROWS_AS(run_iteration(big.hamiltonian(), big.xi, s, big.masses, StepOptions{}, 3), DivergenceError);
  CHECK_THROWS(run_iteration(base.hamiltonian(), base.xi, s, base.masses, StepOptions{}, 5));
}

TEST_CASE("strict caps raise CapsExceeded") {
  const LongRangeModel mod = three_site(1e-6);
  const KamSchedule s = build_schedule(1e-6, 0.05, 1.0, 1.5, 2);
  StepOptions opt;
  opt.max_lie_order = 1;
  opt.lie_tol_factor = 1e-12;
  opt.strict_caps = true;
  CHECK_THROWS_AS(run_iteration(mod.hamiltonian(), mod.xi, s, mod.masses, opt, 1), CapsExceeded);
}

TEST_CASE("frequency-map inversion") {
  const std::vector<double> lo{0.0, 0.0}, hi{2.0, 2.0};
  auto zero = invert_frequency_map([](const std::vector<double>& x) { return std::vector<double>(x.size(), 0.0); },
                                   lo, hi, 0.1);
  CHECK(zero.correction({0.5, 1.5}) == std::vector<double>{0.0, 0.0});

  auto cst = invert_frequency_map([](const std::vector<double>&) { return std::vector<double>{0.01, -0.02}; }, lo,
                                  hi, 0.1);
  CHECK(cst.correction({0.5, 1.5}) == std::vector<double>{-0.01, 0.02});

  auto field = [](const std::vector<double>& x) {
    std::vector<double> v(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) v[j] = 0.01 * std::sin(x[j]);
    return v;
  };
  auto inv = invert_frequency_map(field, lo, hi, 0.1);
  CHECK(inv.sup_vtilde() <= 0.01);
  gen::Rng r(45);
  for (int t = 0; t < 100; ++t) {
    const auto xi = gen::point(r, 2, 0.2, 1.8);
    const auto v = inv.correction(xi);
    std::vector<double> y(2);
    for (int j = 0; j < 2; ++j) y[j] = xi[j] + v[j];
    const auto vt = field(y);
    for (int j = 0; j < 2; ++j) {
      CHECK(std::abs(y[j] + vt[j] - xi[j]) <= 1e-10);
      CHECK(std::abs(v[j]) <= 0.01);  // sup |vtilde| over the whole box
    }
  }
  CHECK_THROWS_AS(invert_frequency_map(field, lo, hi, 0.01), ContractionFailure);
}

TEST_CASE("embedding of zero generators is the identity") {
  IterationState st;
  st.xi = {1.0, 2.0};
  st.P = TFSeries(2);
  st.generators = {TFSeries(2), TFSeries(2)};
  const auto e = assemble_torus_embedding(st, MassVector::exponential(1.0, 2), Caps{});
  std::vector<double> xp, xj;
  e.evaluate({0.3, 1.1}, xp, xj);
  CHECK(xp == std::vector<double>{0.3, 1.1});
  CHECK(xj == std::vector<double>{0.0, 0.0});
}

TEST_CASE("embedding of a one-harmonic generator matches its integrated flow") {
  // G = (c e(i phi_1) + conj) (1 + J_2): phi_2 and J_1 move, J_2 and phi_1 stay fixed.
  const MassVector m = MassVector::exponential(0.5, 2);
  const cplx c(0.05, -0.03);
  TFSeries G(2);
  G.add(MonomialKey({1}, {1}, {0}), c);
  G.add(MonomialKey({1}, {-1}, {0}), std::conj(c));
  G.add(MonomialKey({1, 2}, {1, 0}, {0, 1}), c);
  G.add(MonomialKey({1, 2}, {-1, 0}, {0, 1}), std::conj(c));
  IterationState st;
  st.xi = {1.0, 1.0};
  st.P = TFSeries(2);
  st.generators = {G};
  const auto e = assemble_torus_embedding(st, m, Caps{}, 12);
  SeriesSystem sys(G, m);
  FlowSpec spec;
  spec.h = 1e-3;
  spec.T = 1.0;
  spec.integrator = "yoshida4-midpoint";
  gen::Rng r(46);
  for (int t = 0; t < 10; ++t) {
    const auto phi = gen::point(r, 2, 0.0, 2 * std::numbers::pi);
    const auto traj = integrate(sys, spec, {phi[0], phi[1], 0.0, 0.0});
    const auto& x = traj.x.back();
    std::vector<double> xp, xj;
    e.evaluate(phi, xp, xj);
    CHECK_THAT(xp[0], WithinAbs(x[0], 1e-10));
    CHECK_THAT(xp[1], WithinAbs(x[1], 1e-10));
    CHECK_THAT(xj[0], WithinAbs(x[2], 1e-10));
    CHECK_THAT(xj[1], WithinAbs(x[3], 1e-10));
  }
}

TEST_CASE("coordinate map preserves the weighted brackets") {
  // {phi_i + u_i, w_j} = (1/m_i) d_{J_i} w_j + {u_i, w_j} should equal delta_ij / m_j.
  gen::Rng r(47);
  const MassVector m = MassVector::exponential(0.5, 3);
  for (int t = 0; t < 5; ++t) {
    TFSeries G = gen::real_series(r, {3, 8, 2, 1, 2});
    G = truncate(G, [](const MonomialKey& k) { return k.alpha_norm() <= 1; }).kept;
    G *= cplx(1e-3 / G.max_abs());
    const CoordinateMap cm = coordinate_map({G}, 3, m, Caps{}, 8);
    for (int i = 1; i <= 3; ++i)
      for (int j = 1; j <= 3; ++j) {
        TFSeries b = (1.0 / m(i)) * d_J(cm.w[j - 1], i) + poisson_bracket(cm.u[i - 1], cm.w[j - 1], m);
        b.add(MonomialKey(), -(i == j ? 1.0 / m(j) : 0.0));
        CHECK(b.max_abs() <= 1e-12 / m(j));
      }
  }
}

#include <doctest.h>

#include "oracles.hpp"
#include "pofel/incentive.hpp"

using namespace pofel;

TEST_SUITE("incentive") {

TEST_CASE("utility examples") {
  const IncentiveParams p = IncentiveParams::uniform(2, 0.05, 1.0);
  CHECK(utility_publisher(5000, 1000, p) == 500.0);
  CHECK(utility_publisher(1000, 1000, p) == doctest::Approx(484.0));
  CHECK(publisher_utility_positive(5000, 1000, p));
  CHECK_FALSE(publisher_utility_positive(100000, 1000, p));
  CHECK(utility_node(40, 1000, 5000, 0.05, 1.0) == doctest::Approx(oracle::node_utility(40, 1000, 5000, 0.05)).epsilon(1e-14));
  CHECK(std::abs(utility_node(40, 1000, 5000, 0.05, 1.0) - 112.3077) < 1e-4);
  CHECK(utility_node(0, 1000, 5000, 0.05, 1.0) == 0.0);
  CHECK_THROWS_AS(utility_publisher(1, 0, p), Error);
  CHECK_THROWS_AS(utility_node(0, 0, 1, 0.05, 1), Error);
  CHECK_THROWS_AS(utility_node(-1, 10, 1, 0.05, 1), Error);
}

TEST_CASE("best response matches a grid search and the first-order condition") {
  const double f = best_response(1000, 5000, 0.05, 1.0);
  CHECK(std::abs(f - 45.7232) < 1e-4);
  CHECK(std::abs(f - oracle::grid_best_response(1000, 5000, 0.05, 1e-3)) < 2e-3);
  CHECK(std::abs(5000.0 * 1000 / ((f + 1000) * (f + 1000)) - 2 * 0.05 * f) < 1e-8);
}

TEST_CASE("property: best response beats every grid point") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> S(1.0, 5000.0), D(10.0, 20000.0), G(0.005, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    const double s = S(rng), d = D(rng), g = G(rng);
    const double f = best_response(s, d, g, 1.0);
    const double u = oracle::node_utility(f, s, d, g);
    const double hi = std::sqrt(d / g);
    for (int k = 0; k <= 400; ++k) CHECK(u >= oracle::node_utility(hi * k / 400.0, s, d, g) - 1e-9 * std::abs(u));
  }
}

TEST_CASE("property: node utility is strictly concave in f") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> S(1.0, 5000.0), D(10.0, 20000.0), F(0.0, 500.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double s = S(rng), d = D(rng), f = F(rng), h = 1e-2;
    const double c2 = utility_node(f, s, d, 0.05, 1.0) - 2 * utility_node(f + h, s, d, 0.05, 1.0) +
                      utility_node(f + 2 * h, s, d, 0.05, 1.0);
    CHECK(c2 < 0.0);
  }
}

TEST_CASE("symmetric Nash equilibrium has the closed form") {
  for (int n : {2, 3, 5, 10}) {
    const IncentiveParams p = IncentiveParams::uniform(n, 0.05, 1.0);
    const NashResult r = nash_stage2(5000, p);
    const double closed = std::sqrt(5000.0 * (n - 1) / (2 * 0.05 * n * n));
    for (double f : r.f) CHECK(std::abs(f - closed) < 1e-6);
    CHECK(std::abs(r.F - n * closed) < 1e-5);
  }
  CHECK(std::abs(nash_stage2(5000, IncentiveParams::uniform(2, 0.05, 1.0)).f[0] - 111.8034) < 1e-4);
}

TEST_CASE("property: heterogeneous Nash satisfies every first-order condition") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> G(0.01, 0.2), M(0.5, 2.0), D(100.0, 20000.0);
  std::uniform_int_distribution<int> N(2, 8);
  for (int trial = 0; trial < 50; ++trial) {
    IncentiveParams p;
    const int n = N(rng);
    for (int i = 0; i < n; ++i) {
      p.gamma.push_back(G(rng));
      p.mu.push_back(M(rng));
    }
    const double delta = D(rng);
    const NashResult r = nash_stage2(delta, p);
    for (int i = 0; i < n; ++i) {
      const double fi = r.f[static_cast<std::size_t>(i)];
      const double others = r.F - fi;
      CHECK(std::abs(delta * others / (r.F * r.F) - 2 * p.cost(i) * fi) < 1e-6 * delta / r.F);
      // No unilateral deviation on a grid helps.
      CHECK(std::abs(fi - oracle::grid_best_response(others, delta, p.cost(i), 1e-3)) < 2e-3);
    }
  }
}

TEST_CASE("property: Nash equilibrium is reached from every start") {
  // Independent Gauss-Seidel on the grid oracle from several starting points.
  const IncentiveParams p{500, 1, 5, {0.05, 0.08, 0.02}, {1.0, 1.5, 1.0}};
  const NashResult lib = nash_stage2(3000, p);
  for (double start : {0.5, 10.0, 80.0, 300.0}) {
    std::vector<double> f(3, start);
    for (int sweep = 0; sweep < 200; ++sweep) {
      for (int i = 0; i < 3; ++i) {
        double others = 0;
        for (int j = 0; j < 3; ++j) others += j == i ? 0 : f[static_cast<std::size_t>(j)];
        f[static_cast<std::size_t>(i)] = best_response(others, 3000, p.gamma[static_cast<std::size_t>(i)], p.mu[static_cast<std::size_t>(i)]);
      }
    }
    for (int i = 0; i < 3; ++i) CHECK(std::abs(f[static_cast<std::size_t>(i)] - lib.f[static_cast<std::size_t>(i)]) < 1e-6);
  }
}

TEST_CASE("optimal reward gives the publisher its full budget") {
  const IncentiveParams p = IncentiveParams::uniform(2, 0.05, 1.0);
  for (double F : {10.0, 50.0, 1000.0}) {
    const double d = optimal_delta(F, p);
    CHECK(d == F * 5.0);
    CHECK(utility_publisher(d, F, p) == 500.0);
    for (double x = 0.2 * d; x < 2 * d; x += 0.01 * d) CHECK(oracle::publisher_utility(x, F, 500, 1, 5) <= 500.0);
  }
}

TEST_CASE("Stackelberg equilibrium for two symmetric nodes") {
  const IncentiveParams p = IncentiveParams::uniform(2, 0.05, 1.0);
  const StackelbergResult r = stackelberg_equilibrium(p);
  CHECK(r.outcome == StackelbergResult::Outcome::kEquilibrium);
  CHECK(std::abs(r.delta - 250.0) < 1e-5);
  CHECK(std::abs(r.F - 50.0) < 1e-6);
  for (double f : r.f) CHECK(std::abs(f - 25.0) < 1e-6);
  CHECK(r.trajectory.size() >= 2);
  for (int n : {3, 6}) {
    const StackelbergResult s = stackelberg_equilibrium(IncentiveParams::uniform(n, 0.05, 1.0));
    const double f = 5.0 * (n - 1) / (2 * 0.05 * n);
    CHECK(std::abs(s.f[0] - f) < 1e-5);
    CHECK(std::abs(s.delta - 5.0 * n * f) < 1e-4);
  }
}

TEST_CASE("single node is a boundary case") {
  const StackelbergResult r = stackelberg_equilibrium(IncentiveParams::uniform(1, 0.05, 1.0));
  CHECK(r.outcome == StackelbergResult::Outcome::kBoundary);
  CHECK_FALSE(r.note.empty());
  CHECK_THROWS_AS(nash_stage2(100, IncentiveParams::uniform(1, 0.05, 1.0)), Error);
}

TEST_CASE("iteration caps raise non-convergence with the trajectory") {
  try {
    stackelberg_equilibrium(IncentiveParams::uniform(2, 0.05, 1.0), 1e-12, 1000.0, 2);
    FAIL("expected non-convergence");
  } catch (const NonConvergenceError& e) {
    CHECK(e.code() == ErrorCode::kNonConvergence);
    CHECK_FALSE(e.trajectory().empty());
  }
  CHECK_THROWS_AS(best_response(1000, 5000, 0.05, 1.0, 1e-10, 3), NonConvergenceError);
  CHECK_THROWS_AS(nash_stage2(5000, IncentiveParams::uniform(4, 0.05, 1.0), 1e-12, 2), NonConvergenceError);
}

TEST_CASE("parameter validation") {
  IncentiveParams p = IncentiveParams::uniform(2, 0.05, 1.0);
  p.mu.pop_back();
  CHECK_THROWS_AS(p.validate(), Error);
  p = IncentiveParams::uniform(2, -0.05, 1.0);
  CHECK_THROWS_AS(p.validate(), Error);
  CHECK_THROWS_AS(best_response(0, 5000, 0.05, 1.0), Error);
  CHECK_THROWS_AS(best_response(10, 0, 0.05, 1.0), Error);
}

}  // TEST_SUITE

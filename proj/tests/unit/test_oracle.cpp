#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "ccdae/core_distance.hpp"
#include "ccdae/error.hpp"
#include "ccdae/oracle.hpp"
#include "test_helpers.hpp"

using namespace ccdae;
using namespace ccdae::oracle;

namespace {
FiniteHypothesisTable two_uniform(double l0, double l1) {
  FiniteHypothesisTable t;
  t.labels = {"a", "b"};
  t.code_lengths = {std::log(2.0), std::log(2.0)};
  t.loss = {{l0, l1}};
  return t;
}

FiniteHypothesisTable short_long() {
  FiniteHypothesisTable t;
  t.labels = {"short", "long"};
  t.code_lengths = {1.0, 3.0};
  t.loss = {{5.0, 1.0}};
  return t;
}
}  // namespace

TEST_CASE("exact_gibbs") {
  SUBCASE("lambda 0 recovers the code distribution") {
    const auto t = ccdae::testing::random_table(6, 1, 2);
    const auto q = exact_gibbs(t, 0, 0.0);
    for (std::size_t j = 0; j < q.size(); ++j) CHECK(q[j] == doctest::Approx(std::exp(-t.code_lengths[j])));
  }
  SUBCASE("uniform pair at lambda 1") {
    const auto q = exact_gibbs(two_uniform(1.0, 2.0), 0, 1.0);
    CHECK(q[0] == doctest::Approx(0.731058578630004879).epsilon(1e-14));
    CHECK(q[1] == doctest::Approx(0.268941421369995121).epsilon(1e-14));
  }
  SUBCASE("large lambda is a Dirac on the loss minimizer") {
    const auto q = exact_gibbs(short_long(), 0, 1e6);
    CHECK(q[1] == doctest::Approx(1.0));
    CHECK(q[0] < 1e-12);
  }
  SUBCASE("normalized within 1e-12") {
    for (unsigned seed = 0; seed < 8; ++seed) {
      const auto t = ccdae::testing::random_table(9, 2, seed, 20.0);
      for (double lambda : core::default_lambda_grid()) {
        double s = 0.0;
        for (double x : exact_gibbs(t, 1, lambda)) s += x;
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
    }
  }
}

TEST_CASE("exact_capacity") {
  CHECK(exact_capacity(two_uniform(1.0, 2.0), 0, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(exact_capacity(two_uniform(1.0, 2.0), 0, 1.0) ==
        doctest::Approx(0.110944071671727355).epsilon(1e-12));
  CHECK(exact_capacity(two_uniform(1.0, 2.0), 0, 1e4) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("exact capacity and expected loss are monotone in lambda") {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const auto t = ccdae::testing::random_table(10, 1, seed);
    double prev_c = -1.0;
    double prev_b = std::numeric_limits<double>::infinity();
    for (double lambda : core::default_lambda_grid()) {
      const double c = exact_capacity(t, 0, lambda);
      const double b = exact_expected_loss(t, 0, lambda);
      CHECK(c >= prev_c - 1e-12);
      CHECK(b <= prev_b + 1e-12);
      prev_c = c;
      prev_b = b;
    }
  }
}

TEST_CASE("solve_discrete_description") {
  const auto t = short_long();
  CHECK_THROWS_AS(solve_discrete_description(t, 0, 0.5), NoFeasibleDescription);
  CHECK(solve_discrete_description(t, 0, std::numeric_limits<double>::infinity()) == 1);
  CHECK(solve_discrete_description(t, 0, 2.0) == 0);
  CHECK(solve_discrete_description(t, 0, 3.0) == 1);

  SUBCASE("ties go to the shorter code, then the lower index") {
    FiniteHypothesisTable tie;
    tie.labels = {"a", "b", "c"};
    tie.code_lengths = {2.0, 1.5, 1.5};
    tie.loss = {{1.0, 1.0, 1.0}};
    CHECK(solve_discrete_description(tie, 0, 10.0) == 1);
  }
}

TEST_CASE("structure_function") {
  const auto t = short_long();
  CHECK(structure_function(t, 0, std::numeric_limits<double>::infinity()) == 4.0);
  CHECK(structure_function(t, 0, 1.5) == 6.0);
  CHECK_THROWS_AS(structure_function(t, 0, 0.1), NoFeasibleDescription);
  for (unsigned seed = 0; seed < 10; ++seed) {
    const auto r = ccdae::testing::random_table(12, 1, seed);
    double global = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < r.hypothesis_count(); ++j) {
      global = std::min(global, r.loss[0][j] + r.code_lengths[j]);
    }
    double prev = std::numeric_limits<double>::infinity();
    double min_code = *std::min_element(r.code_lengths.begin(), r.code_lengths.end());
    for (double c = min_code; c < 12.0; c += 0.05) {
      const double v = structure_function(r, 0, c);
      CHECK(v <= prev);
      CHECK(v >= global);
      prev = v;
    }
  }
}

TEST_CASE("Dirac-restricted stochastic problem recovers the discrete problem") {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const auto t = ccdae::testing::random_table(8, 2, seed);
    for (double c = 0.0; c < 6.0; c += 0.1) {
      bool feasible = true;
      std::size_t j = 0;
      try {
        j = solve_discrete_description(t, 1, c);
      } catch (const NoFeasibleDescription&) {
        feasible = false;
      }
      if (feasible) {
        CHECK(dirac_restricted_optimum(t, 1, c) == t.loss[1][j]);
      } else {
        CHECK_THROWS_AS(dirac_restricted_optimum(t, 1, c), NoFeasibleDescription);
      }
    }
  }
}

TEST_CASE("exact_distance_curve") {
  const auto grid = core::default_lambda_grid();
  SUBCASE("identical rows") {
    auto t = ccdae::testing::random_table(5, 1, 9);
    t.loss.push_back(t.loss[0]);
    const auto curve = exact_distance_curve(t, {0, 1}, grid);
    for (double d : curve.distance) CHECK(d == 0.0);
  }
  SUBCASE("separable table is strictly positive away from zero capacity") {
    const auto curve = exact_distance_curve(ccdae::testing::separable_table(), {0, 1}, grid);
    for (std::size_t k = 1; k < curve.distance.size(); ++k) CHECK(curve.distance[k] > 0.0);
  }
  SUBCASE("intersection identity at matched capacities") {
    for (unsigned seed = 0; seed < 5; ++seed) {
      const auto t = ccdae::testing::random_table(7, 2, seed);
      const auto curve = exact_distance_curve(t, {0, 1}, grid);
      for (std::size_t k = 0; k < curve.capacity_grid.size(); k += 7) {
        const double c = curve.capacity_grid[k];
        const double l1 = lambda_for_capacity(t, 0, c, grid.back());
        const double l2 = lambda_for_capacity(t, 1, c, grid.back());
        CHECK(std::abs(exact_intersection_distance(t, {0, 1}, l1, l2) - curve.distance[k]) < 1e-12);
      }
    }
  }
}

TEST_CASE("universal_augment") {
  const auto base = ccdae::testing::separable_table();
  const auto aug = universal_augment(base, 0.1);
  REQUIRE(aug.hypothesis_count() == 3);
  aug.validate();
  double kraft = 0.0;
  for (double c : aug.code_lengths) kraft += std::exp(-c);
  CHECK(kraft <= 1.0 + 1e-12);
  CHECK(aug.code_lengths.back() == 0.1);

  SUBCASE("h_search attains the optimal two-part code for every sample") {
    for (std::size_t i = 0; i < 2; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < 2; ++j) best = std::min(best, aug.loss[i][j] + aug.code_lengths[j]);
      CHECK(aug.loss[i][2] + aug.code_lengths[2] == doctest::Approx(best).epsilon(1e-14));
    }
  }
  SUBCASE("structure function is constant above epsilon") {
    for (std::size_t i = 0; i < 2; ++i) {
      const double v0 = structure_function(aug, i, 0.1);
      for (double c = 0.1; c < 20.0; c += 0.25) {
        CHECK(structure_function(aug, i, c) == doctest::Approx(v0).epsilon(1e-14));
      }
    }
  }
  SUBCASE("augmentation never increases the distance at matched lambda") {
    for (double lambda : {0.5, 1.0, 2.0}) {
      const double before = 0.5 * (exact_delta_at_lambda(base, 1, 0, lambda) + exact_delta_at_lambda(base, 0, 1, lambda));
      const double after = 0.5 * (exact_delta_at_lambda(aug, 1, 0, lambda) + exact_delta_at_lambda(aug, 0, 1, lambda));
      CHECK(after < before);
    }
  }
  CHECK_THROWS_AS(universal_augment(base, 0.0), InvalidInput);
}

TEST_CASE("table text format round-trips bit-exactly") {
  const auto t = ccdae::testing::random_table(6, 3, 77, 9.0);
  std::stringstream ss;
  write_table(ss, t);
  const auto back = parse_table(ss);
  CHECK(back.labels == t.labels);
  CHECK(back.code_lengths == t.code_lengths);
  CHECK(back.loss == t.loss);

  std::stringstream bad("hypotheses\ta\tb\ncode\t0.1\tx\n");
  CHECK_THROWS_AS(parse_table(bad), InvalidInput);
  std::stringstream kraft("hypotheses\ta\tb\ncode\t0.1\t0.1\nloss\t1\t2\n");
  CHECK_THROWS_AS(parse_table(kraft), InvalidInput);
}

#include <doctest.h>

#include <cmath>
#include <random>

#include "ccdae/core_distance.hpp"
#include "ccdae/error.hpp"
#include "ccdae/oracle.hpp"
#include "test_helpers.hpp"

using namespace ccdae;
using ccdae::testing::make_batch;

namespace {
constexpr auto kFirst = SampleIndex::first;
constexpr auto kSecond = SampleIndex::second;

// Reference values computed with mpmath at 30 digits.
constexpr double kAlpha1 = 0.731058578630004879;        // softmax(-1, -2)[0]
constexpr double kLogZ = -1.379885493041722475;         // log(0.5 (e^-1 + e^-2))
constexpr double kBeta1 = 1.268941421369995121;         // 0.73106 * 1 + 0.26894 * 2
constexpr double kCapacity1 = 0.110944071671727355;     // KL((0.73106, 0.26894) || uniform)
constexpr double kCross = 9.999546021312975656;         // 10 * softmax(-10, 0)[1]
}  // namespace

TEST_CASE("gibbs_weights: uniform at lambda 0 when p_code equals proposal") {
  const auto batch = make_batch({0.3, 1.7, 2.0, 5.0}, {1, 1, 1, 1});
  const auto w = core::gibbs_weights(batch, 0.0, kFirst);
  REQUIRE(w.size() == 4);
  for (double x : w) CHECK(x == 0.25);
}

TEST_CASE("gibbs_weights: deterministic limit selects the loss minimizer") {
  const auto batch = make_batch({1.0, 2.0}, {0.0, 0.0});
  const auto w = core::gibbs_weights(batch, 1e6, kFirst);
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(w[1] == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("gibbs_weights: softmax of (-1, -2) at lambda 1") {
  const auto batch = make_batch({1.0, 2.0}, {0.0, 0.0});
  const auto w = core::gibbs_weights(batch, 1.0, kFirst);
  CHECK(w[0] == doctest::Approx(kAlpha1).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(1.0 - kAlpha1).epsilon(1e-12));
}

TEST_CASE("gibbs_weights: rejects negative lambda") {
  const auto batch = make_batch({1.0, 2.0}, {0.0, 0.0});
  CHECK_THROWS_AS(core::gibbs_weights(batch, -0.5, kFirst), InvalidInput);
}

TEST_CASE("gibbs_weights: normalization over lambda in [0, 1e6]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 8.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> l1(12), l2(12), lp(12), lq(12);
    for (auto* v : {&l1, &l2, &lp, &lq}) {
      for (double& x : *v) x = u(rng);
    }
    for (double& x : lp) x = -std::abs(x);
    for (double& x : lq) x = -std::abs(x);
    const auto batch = make_batch(l1, l2, lp, lq);
    for (double lambda : {0.0, 1e-3, 0.5, 1.0, 10.0, 1e3, 1e6}) {
      double s = 0.0;
      for (double w : core::gibbs_weights(batch, lambda, kSecond)) s += w;
      CHECK(std::abs(s - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("log_partition_estimate") {
  SUBCASE("zero at lambda 0 with p_code equal to proposal") {
    for (std::size_t n : {2u, 5u, 17u}) {
      std::vector<double> l(n, 0.0);
      for (std::size_t j = 0; j < n; ++j) l[j] = 0.37 * static_cast<double>(j);
      CHECK(core::log_partition_estimate(make_batch(l, l), 0.0, kFirst) == 0.0);
    }
  }
  SUBCASE("two hypotheses at lambda 1") {
    const auto batch = make_batch({1.0, 2.0}, {0.0, 0.0});
    CHECK(core::log_partition_estimate(batch, 1.0, kFirst) == doctest::Approx(kLogZ).epsilon(1e-12));
  }
  SUBCASE("asymptote: a single dominant hypothesis at large lambda") {
    const std::vector<double> lp = {-0.5, -1.2, -2.0};
    const std::vector<double> lq = {-1.0, -0.8, -1.6};
    const auto batch = make_batch({0.5, 3.0, 4.0}, {0, 0, 0}, lp, lq);
    const double lambda = 200.0;
    const double direct = -lambda * 0.5 + lp[0] - lq[0] - std::log(3.0);
    CHECK(core::log_partition_estimate(batch, lambda, kFirst) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("capacity_estimate") {
  const auto batch = make_batch({1.0, 2.0}, {0.0, 0.0});
  CHECK(core::capacity_estimate(batch, 0.0, kFirst) == 0.0);
  CHECK(core::capacity_estimate(batch, 1.0, kFirst) == doctest::Approx(kCapacity1).epsilon(1e-12));
  CHECK(core::capacity_estimate(batch, 1e4, kFirst) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("capacity_estimate is nonnegative with a code distribution different from the proposal") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> l1(9), l2(9), lp(9), lq(9);
    for (auto* v : {&l1, &l2}) {
      for (double& x : *v) x = u(rng);
    }
    for (double& x : lp) x = -u(rng);
    for (double& x : lq) x = -u(rng);
    const auto batch = make_batch(l1, l2, lp, lq);
    for (double lambda : core::linspace(0.0, 50.0, 26)) {
      CHECK(core::capacity_estimate(batch, lambda, kFirst) >= 0.0);
    }
  }
}

TEST_CASE("trace_rate_curve") {
  SUBCASE("hand evaluated points at lambda 0 and 1") {
    const auto batch = make_batch({1.0, 2.0}, {0.0, 0.0});
    const std::vector<double> grid = {0.0, 1.0};
    const auto curve = core::trace_rate_curve(batch, grid, kFirst);
    REQUIRE(curve.points.size() == 2);
    CHECK(curve.points[0].capacity == 0.0);
    CHECK(curve.points[0].expected_loss == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(curve.points[1].capacity == doctest::Approx(kCapacity1).epsilon(1e-12));
    CHECK(curve.points[1].expected_loss == doctest::Approx(kBeta1).epsilon(1e-12));
  }
  SUBCASE("degenerate when every loss is equal") {
    const auto batch = make_batch({2.5, 2.5, 2.5}, {1, 2, 3});
    const auto grid = core::default_lambda_grid();
    for (const auto& p : core::trace_rate_curve(batch, grid, kFirst).points) {
      CHECK(p.capacity == 0.0);
      CHECK(p.expected_loss == doctest::Approx(2.5).epsilon(1e-15));
    }
  }
  SUBCASE("enumerated table matches the exact oracle") {
    const auto table = ccdae::testing::random_table(10, 2, 5);
    const auto batch = oracle::enumerate_batch(table, {0, 1});
    const auto grid = core::default_lambda_grid();
    const auto curve = core::trace_rate_curve(batch, grid, kFirst);
    for (const auto& p : curve.points) {
      const double c = oracle::exact_capacity(table, 0, p.lambda);
      const double b = oracle::exact_expected_loss(table, 0, p.lambda);
      CHECK(p.capacity == doctest::Approx(c).epsilon(1e-9).scale(1.0));
      CHECK(p.expected_loss == doctest::Approx(b).epsilon(1e-9));
    }
  }
  SUBCASE("rejects a non-increasing grid") {
    const auto batch = make_batch({1.0, 2.0}, {0.0, 0.0});
    const std::vector<double> grid = {0.0, 2.0, 1.0};
    CHECK_THROWS_AS(core::trace_rate_curve(batch, grid, kFirst), InvalidInput);
  }
}

TEST_CASE("cross_expected_loss") {
  SUBCASE("separable table at lambda 1") {
    const auto batch = make_batch({0.0, 10.0}, {10.0, 0.0});
    CHECK(core::cross_expected_loss(batch, 1.0, kSecond, kFirst) == doctest::Approx(kCross).epsilon(1e-12));
  }
  SUBCASE("source equal to target is the expected loss") {
    const auto batch = make_batch({0.4, 1.0, 3.0}, {2.0, 0.0, 1.0});
    CHECK(core::cross_expected_loss(batch, 2.0, kFirst, kFirst) == core::expected_loss(batch, 2.0, kFirst));
  }
  SUBCASE("identical rows") {
    const auto batch = make_batch({0.4, 1.0, 3.0}, {0.4, 1.0, 3.0});
    for (double lambda : {0.0, 0.7, 5.0}) {
      CHECK(core::cross_expected_loss(batch, lambda, kSecond, kFirst) ==
            core::expected_loss(batch, lambda, kFirst));
    }
  }
}

TEST_CASE("auc") {
  const std::vector<double> c = {0.0, 1.0, 2.0};
  const std::vector<double> d = {0.0, 1.0, 2.0};
  CHECK(core::auc(c, d, 2.0) == doctest::Approx(2.0));
  CHECK(core::auc(c, d, 1.5) == doctest::Approx(1.125));
  const std::vector<double> zero = {0.0, 0.0, 0.0};
  CHECK(core::auc(c, zero, 2.0) == 0.0);
  const std::vector<double> one = {1.0};
  CHECK_THROWS_AS(core::auc(one, one, 1.0), InvalidInput);
  CHECK_THROWS_AS(core::auc(c, d, 3.0), InvalidInput);
}

TEST_CASE("distance_curve") {
  const auto grid = core::default_lambda_grid();
  SUBCASE("self-distance is identically zero") {
    const auto batch = make_batch({0.2, 1.4, 3.0, 0.9}, {0.2, 1.4, 3.0, 0.9});
    const auto curve = core::distance_curve(batch, grid);
    for (double d : curve.distance) CHECK(d == 0.0);
    CHECK(curve.auc == 0.0);
  }
  SUBCASE("swap symmetry is bit-exact") {
    const auto table = ccdae::testing::random_table(8, 2, 21);
    auto batch = oracle::enumerate_batch(table, {0, 1});
    const auto a = core::distance_curve(batch, grid);
    const auto b = core::distance_curve(batch.swapped(), grid);
    CHECK(a.auc == b.auc);
    CHECK(a.c_max == b.c_max);
    for (std::size_t k = 0; k < a.distance.size(); ++k) {
      CHECK(a.distance[k] == b.distance[k]);
      CHECK(a.delta_2_to_1[k] == b.delta_1_to_2[k]);
    }
  }
  SUBCASE("distance is the mean of the two deltas") {
    const auto table = ccdae::testing::random_table(6, 2, 4);
    const auto curve = core::distance_curve(oracle::enumerate_batch(table, {0, 1}), grid);
    for (std::size_t k = 0; k < curve.distance.size(); ++k) {
      CHECK(curve.distance[k] == 0.5 * (curve.delta_2_to_1[k] + curve.delta_1_to_2[k]));
    }
  }
  SUBCASE("separable table matches the exact oracle on a fine lambda grid") {
    const auto table = ccdae::testing::separable_table();
    const auto fine = core::linspace(0.0, 100.0, 40001);
    const auto is = core::distance_curve(oracle::enumerate_batch(table, {0, 1}), fine);
    const auto exact = oracle::exact_distance_curve(table, {0, 1}, fine);
    CHECK(is.c_max == doctest::Approx(exact.c_max).epsilon(1e-9));
    CHECK(std::abs(is.auc - exact.auc) / exact.auc < 0.02);
  }
  SUBCASE("explicit c_max beyond both traced ranges is an error") {
    const auto batch = make_batch({0.0, 10.0}, {10.0, 0.0});
    DistanceOptions opt;
    opt.c_max = 5.0;
    CHECK_THROWS_AS(core::distance_curve(batch, grid, opt), InvalidInput);
  }
}

TEST_CASE("intersection_distance") {
  SUBCASE("identical samples") {
    const auto batch = make_batch({0.2, 1.4, 3.0}, {0.2, 1.4, 3.0});
    CHECK(core::intersection_distance(batch, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("equals the mean of the deltas at the same lambda") {
    for (unsigned seed = 0; seed < 10; ++seed) {
      const auto table = ccdae::testing::random_table(7, 2, seed);
      const auto batch = oracle::enumerate_batch(table, {0, 1});
      for (double lambda : {0.0, 0.3, 1.0, 4.0, 60.0}) {
        const double mean_delta = 0.5 * (core::delta_at_lambda(batch, lambda, kSecond, kFirst) +
                                         core::delta_at_lambda(batch, lambda, kFirst, kSecond));
        CHECK(std::abs(core::intersection_distance(batch, lambda) - mean_delta) < 1e-9);
      }
    }
  }
  SUBCASE("separable table: lambda point agrees with the capacity curve") {
    const auto batch = make_batch({0.0, 10.0}, {10.0, 0.0});
    const double c = core::capacity_estimate(batch, 1.0, kFirst);
    CHECK(core::capacity_estimate(batch, 1.0, kSecond) == c);
    const auto fine = core::linspace(0.0, 100.0, 40001);
    const auto curve = core::distance_curve(batch, fine);
    const double from_curve = core::interpolate(curve.capacity_grid, curve.distance, c);
    CHECK(from_curve == doctest::Approx(core::intersection_distance(batch, 1.0)).epsilon(0.02));
  }
}

TEST_CASE("duplicates merged by multiplicity leave every estimate unchanged") {
  // h0 drawn three times, h1 once, h2 twice
  std::vector<Hypothesis> dup, merged;
  std::vector<double> ld1, ld2, lm1, lm2;
  const double l1[] = {0.5, 2.0, 1.0};
  const double l2[] = {1.5, 0.1, 3.0};
  const int counts[] = {3, 1, 2};
  for (int j = 0; j < 3; ++j) {
    Hypothesis h;
    h.tokens = {j};
    h.text = "h" + std::to_string(j);
    h.log_pcode = -0.3 * (j + 1);
    h.log_proposal = -0.7 - 0.1 * j;
    for (int c = 0; c < counts[j]; ++c) {
      dup.push_back(h);
      ld1.push_back(l1[j]);
      ld2.push_back(l2[j]);
    }
    h.multiplicity = static_cast<std::uint32_t>(counts[j]);
    merged.push_back(h);
    lm1.push_back(l1[j]);
    lm2.push_back(l2[j]);
  }
  const auto a = ScoredBatch::build(dup, {ld1, ld2}, LossMode::encoder_only);
  const auto b = ScoredBatch::build(merged, {lm1, lm2}, LossMode::encoder_only);
  for (double lambda : {0.0, 0.5, 1.0, 7.0}) {
    for (auto s : {kFirst, kSecond}) {
      CHECK(std::abs(core::log_partition_estimate(a, lambda, s) - core::log_partition_estimate(b, lambda, s)) < 1e-9);
      CHECK(std::abs(core::capacity_estimate(a, lambda, s) - core::capacity_estimate(b, lambda, s)) < 1e-9);
      CHECK(std::abs(core::expected_loss(a, lambda, s) - core::expected_loss(b, lambda, s)) < 1e-9);
    }
    CHECK(std::abs(core::intersection_distance(a, lambda) - core::intersection_distance(b, lambda)) < 1e-9);
  }
}

TEST_CASE("ScoredBatch drops non-finite hypotheses and requires two survivors") {
  const double inf = std::numeric_limits<double>::infinity();
  const auto batch = make_batch({0.0, inf, 1.0, 2.0}, {1.0, 1.0, std::nan(""), 0.5});
  CHECK(batch.size() == 2);
  CHECK(batch.dropped() == 2);
  CHECK_THROWS_AS(make_batch({0.0, inf}, {1.0, 1.0}), DegenerateBatch);
}

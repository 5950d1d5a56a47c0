#pragma once

// Gibbs-family estimates over a ScoredBatch: importance weights, partition
// and capacity estimates, rate curves, and the conceptual distance curve.
// Everything here is in nats and is a pure function of its arguments.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ccdae/scored_batch.hpp"

namespace ccdae {

struct GibbsPoint {
  double lambda = 0.0;
  std::vector<double> weights;
  double capacity = 0.0;
  double expected_loss = 0.0;
  double log_partition = 0.0;
};

struct CapacityCurve {
  std::vector<GibbsPoint> points;
  SampleIndex sample_index = SampleIndex::first;
};

/// Traced quantities for one compared item at each lambda of the grid.
struct RateTrace {
  std::vector<double> lambda;
  std::vector<double> capacity;
  std::vector<double> expected_loss;
  /// Expected loss of the *other* item under this item's Gibbs weights.
  std::vector<double> cross_loss;
};

struct DistanceCurve {
  std::vector<double> capacity_grid;
  std::vector<double> delta_2_to_1;
  std::vector<double> delta_1_to_2;
  std::vector<double> distance;
  double auc = 0.0;
  double c_max = 0.0;
  std::vector<double> lambda_grid;
  std::array<RateTrace, 2> traces;
};

struct DistanceOptions {
  std::size_t capacity_grid_size = 200;
  /// Upper integration limit; unset selects the smaller of the two traced
  /// maximum capacities.
  std::optional<double> c_max;
};

namespace core {

/// Evenly spaced values, endpoints included.
std::vector<double> linspace(double start, double stop, std::size_t count);

/// 200 evenly spaced values on [0, 100].
std::vector<double> default_lambda_grid();

/// Importance weights of the Gibbs family tilted by `target`'s losses.
std::vector<double> gibbs_weights(const ScoredBatch& batch, double lambda, SampleIndex target);

/// log of (1/N) sum_j m_j exp(-lambda l_j + log p_code_j - log pi_j), N = sum_j m_j.
double log_partition_estimate(const ScoredBatch& batch, double lambda, SampleIndex target);

/// Expected loss of `target` under its own Gibbs weights.
double expected_loss(const ScoredBatch& batch, double lambda, SampleIndex target);

/// KL of the Gibbs weights from the code distribution, -lambda*beta - log(Z_lambda / Z_0).
/// Estimates in [-1e-9, 0) are clamped to 0.
double capacity_estimate(const ScoredBatch& batch, double lambda, SampleIndex target);

GibbsPoint gibbs_point(const ScoredBatch& batch, double lambda, SampleIndex target);

CapacityCurve trace_rate_curve(const ScoredBatch& batch, std::span<const double> lambda_grid,
                               SampleIndex target);

/// Expected loss of `target` under the Gibbs weights of `source`.
double cross_expected_loss(const ScoredBatch& batch, double lambda, SampleIndex source,
                           SampleIndex target);

/// Delta from `source` to `target` at a shared lambda: cross loss minus optimal loss on target.
double delta_at_lambda(const ScoredBatch& batch, double lambda, SampleIndex source,
                       SampleIndex target);

/// Conceptual distance curve on a shared capacity grid, Delta curves
/// linearly interpolated from each item's own traced capacities.
DistanceCurve distance_curve(const ScoredBatch& batch, std::span<const double> lambda_grid,
                             const DistanceOptions& options = {});

/// Trapezoidal area under (c, d) from c.front() to c_max.
double auc(std::span<const double> c, std::span<const double> d, double c_max);

/// E_{q_cap}[l1 + l2] - E_{q1}[l1] - E_{q2}[l2] with q_cap the equal mixture at `lambda`.
double intersection_distance(const ScoredBatch& batch, double lambda);

/// 1 / sum(w^2).
double effective_sample_size(std::span<const double> weights);

/// Piecewise-linear lookup on a non-decreasing abscissa; constant outside.
double interpolate(std::span<const double> xs, std::span<const double> ys, double x);

}  // namespace core
}  // namespace ccdae

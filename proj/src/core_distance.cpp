#include "ccdae/core_distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ccdae/error.hpp"

namespace ccdae::core {
namespace {

constexpr double kCapacityClamp = 1e-9;

struct Tilt {
  std::vector<double> weights;
  double log_partition = 0.0;
};

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw InvalidInput("lambda must be finite and >= 0, got " + std::to_string(lambda));
  }
}

// Multiplicities stay outside the exponent so that lambda = 0 with
// p_code = pi gives log Z = log(sum m) - log(sum m) = 0 exactly.
Tilt tilt(const ScoredBatch& batch, double lambda, SampleIndex target) {
  check_lambda(lambda);
  const auto hyps = batch.hypotheses();
  const auto loss = batch.loss(target);
  const std::size_t n = hyps.size();
  if (n == 0) throw InvalidInput("empty batch");

  std::vector<double> z(n);
  double z_max = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    z[j] = -lambda * loss[j] + (hyps[j].log_pcode - hyps[j].log_proposal);
    z_max = std::max(z_max, z[j]);
  }
  Tilt t;
  t.weights.resize(n);
  double sum = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    t.weights[j] = static_cast<double>(hyps[j].multiplicity) * std::exp(z[j] - z_max);
    sum += t.weights[j];
  }
  for (double& w : t.weights) w /= sum;
  t.log_partition = z_max + std::log(sum) - std::log(batch.total_multiplicity());
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

double clamp_capacity(double c) {
  if (c <= 0.0 && c >= -kCapacityClamp) return 0.0;
  return c;
}

double capacity_from(double lambda, double beta, double log_z, double log_z0) {
  return clamp_capacity(-lambda * beta - (log_z - log_z0));
}

void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw InvalidInput("lambda grid is empty");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    check_lambda(grid[k]);
    if (k > 0 && !(grid[k] > grid[k - 1])) {
      throw InvalidInput("lambda grid must be strictly increasing");
    }
  }
}

RateTrace trace(const ScoredBatch& batch, std::span<const double> grid, SampleIndex s) {
  const double log_z0 = tilt(batch, 0.0, s).log_partition;
  RateTrace tr;
  tr.lambda.assign(grid.begin(), grid.end());
  for (double lambda : grid) {
    const Tilt t = tilt(batch, lambda, s);
    const double beta = dot(t.weights, batch.loss(s));
    tr.expected_loss.push_back(beta);
    tr.cross_loss.push_back(dot(t.weights, batch.loss(other(s))));
    tr.capacity.push_back(capacity_from(lambda, beta, t.log_partition, log_z0));
  }
  return tr;
}

std::vector<double> running_max(std::span<const double> xs) {
  std::vector<double> out(xs.begin(), xs.end());
  for (std::size_t k = 1; k < out.size(); ++k) out[k] = std::max(out[k], out[k - 1]);
  return out;
}

}  // namespace

std::vector<double> linspace(double start, double stop, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = start;
    return out;
  }
  const double step = (stop - start) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) out[k] = start + step * static_cast<double>(k);
  if (count > 1) out.back() = stop;
  return out;
}

std::vector<double> default_lambda_grid() { return linspace(0.0, 100.0, 200); }

std::vector<double> gibbs_weights(const ScoredBatch& batch, double lambda, SampleIndex target) {
  return tilt(batch, lambda, target).weights;
}

double log_partition_estimate(const ScoredBatch& batch, double lambda, SampleIndex target) {
  return tilt(batch, lambda, target).log_partition;
}

double expected_loss(const ScoredBatch& batch, double lambda, SampleIndex target) {
  return dot(tilt(batch, lambda, target).weights, batch.loss(target));
}

double capacity_estimate(const ScoredBatch& batch, double lambda, SampleIndex target) {
  const Tilt t = tilt(batch, lambda, target);
  const double log_z0 = tilt(batch, 0.0, target).log_partition;
  return capacity_from(lambda, dot(t.weights, batch.loss(target)), t.log_partition, log_z0);
}

GibbsPoint gibbs_point(const ScoredBatch& batch, double lambda, SampleIndex target) {
  Tilt t = tilt(batch, lambda, target);
  const double log_z0 = tilt(batch, 0.0, target).log_partition;
  GibbsPoint p;
  p.lambda = lambda;
  p.expected_loss = dot(t.weights, batch.loss(target));
  p.log_partition = t.log_partition;
  p.capacity = capacity_from(lambda, p.expected_loss, t.log_partition, log_z0);
  p.weights = std::move(t.weights);
  return p;
}

CapacityCurve trace_rate_curve(const ScoredBatch& batch, std::span<const double> lambda_grid,
                               SampleIndex target) {
  check_grid(lambda_grid);
  CapacityCurve curve;
  curve.sample_index = target;
  curve.points.reserve(lambda_grid.size());
  for (double lambda : lambda_grid) curve.points.push_back(gibbs_point(batch, lambda, target));
  return curve;
}

double cross_expected_loss(const ScoredBatch& batch, double lambda, SampleIndex source,
                           SampleIndex target) {
  return dot(tilt(batch, lambda, source).weights, batch.loss(target));
}

double delta_at_lambda(const ScoredBatch& batch, double lambda, SampleIndex source,
                       SampleIndex target) {
  return cross_expected_loss(batch, lambda, source, target) -
         expected_loss(batch, lambda, target);
}

double interpolate(std::span<const double> xs, std::span<const double> ys, double x) {
  if (xs.empty() || xs.size() != ys.size()) {
    throw InvalidInput("interpolate: abscissa and ordinate must be nonempty and equal length");
  }
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) {
    // first index attaining the maximum, so a saturated plateau maps to its start
    const auto it = std::lower_bound(xs.begin(), xs.end(), xs.back());
    if (x > xs.back()) return ys.back();
    return ys[static_cast<std::size_t>(it - xs.begin())];
  }
  const auto it = std::lower_bound(xs.begin(), xs.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - xs.begin());
  if (xs[k] == x) return ys[k];
  const double t = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
  return ys[k - 1] + t * (ys[k] - ys[k - 1]);
}

DistanceCurve distance_curve(const ScoredBatch& batch, std::span<const double> lambda_grid,
                             const DistanceOptions& options) {
  check_grid(lambda_grid);
  if (options.capacity_grid_size < 2) throw InvalidInput("capacity grid needs at least 2 points");

  DistanceCurve out;
  out.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());
  out.traces[0] = trace(batch, lambda_grid, SampleIndex::first);
  out.traces[1] = trace(batch, lambda_grid, SampleIndex::second);

  const std::vector<double> cap1 = running_max(out.traces[0].capacity);
  const std::vector<double> cap2 = running_max(out.traces[1].capacity);
  const double max1 = cap1.back();
  const double max2 = cap2.back();

  double c_max = std::min(max1, max2);
  if (options.c_max) {
    c_max = *options.c_max;
    if (!(c_max >= 0.0) || !std::isfinite(c_max)) throw InvalidInput("c_max must be finite and >= 0");
    if (c_max > max1 && c_max > max2) {
      throw InvalidInput("c_max " + std::to_string(c_max) +
                         " exceeds both traced capacity ranges (" + std::to_string(max1) + ", " +
                         std::to_string(max2) +
                         "); extend the lambda grid or pass a smaller c_max");
    }
  }
  out.c_max = c_max;
  out.capacity_grid = linspace(0.0, c_max, options.capacity_grid_size);

  const auto& t1 = out.traces[0];
  const auto& t2 = out.traces[1];
  const std::size_t n = out.capacity_grid.size();
  out.delta_2_to_1.resize(n);
  out.delta_1_to_2.resize(n);
  out.distance.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double c = out.capacity_grid[k];
    out.delta_2_to_1[k] = interpolate(cap2, t2.cross_loss, c) - interpolate(cap1, t1.expected_loss, c);
    out.delta_1_to_2[k] = interpolate(cap1, t1.cross_loss, c) - interpolate(cap2, t2.expected_loss, c);
    out.distance[k] = 0.5 * (out.delta_2_to_1[k] + out.delta_1_to_2[k]);
  }
  out.auc = auc(out.capacity_grid, out.distance, c_max);
  return out;
}

double auc(std::span<const double> c, std::span<const double> d, double c_max) {
  if (c.size() != d.size()) throw InvalidInput("auc: c and d must have equal length");
  if (c.size() < 2) throw InvalidInput("auc: need at least 2 points");
  for (std::size_t k = 1; k < c.size(); ++k) {
    if (c[k] < c[k - 1]) throw InvalidInput("auc: capacities must be increasing");
  }
  if (c_max < c.front() || c_max > c.back()) {
    throw InvalidInput("auc: c_max outside the sampled capacity range");
  }
  double area = 0.0;
  for (std::size_t k = 1; k < c.size(); ++k) {
    const double lo = c[k - 1];
    if (lo >= c_max) break;
    double hi = c[k];
    double d_hi = d[k];
    if (hi > c_max) {
      d_hi = d[k - 1] + (c_max - lo) / (hi - lo) * (d[k] - d[k - 1]);
      hi = c_max;
    }
    area += 0.5 * (hi - lo) * (d[k - 1] + d_hi);
  }
  return area;
}

double intersection_distance(const ScoredBatch& batch, double lambda) {
  const std::vector<double> q1 = gibbs_weights(batch, lambda, SampleIndex::first);
  const std::vector<double> q2 = gibbs_weights(batch, lambda, SampleIndex::second);
  const auto l1 = batch.loss(SampleIndex::first);
  const auto l2 = batch.loss(SampleIndex::second);
  double shared = 0.0;
  for (std::size_t j = 0; j < q1.size(); ++j) shared += 0.5 * (q1[j] + q2[j]) * (l1[j] + l2[j]);
  return shared - dot(q1, l1) - dot(q2, l2);
}

double effective_sample_size(std::span<const double> weights) {
  double s = 0.0;
  for (double w : weights) s += w * w;
  return s > 0.0 ? 1.0 / s : 0.0;
}

}  // namespace ccdae::core

#pragma once

// Exact computations over finite hypothesis tables. These are the reference
// values the importance-sampling estimators in core_distance are checked
// against, plus the discrete description problem and the two-part code
// (structure) function.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ccdae/core_distance.hpp"
#include "ccdae/scored_batch.hpp"

namespace ccdae::oracle {

/// Code lengths and losses (nats) for a finite hypothesis set.
/// exp(-code_lengths) may sum to less than one.
struct FiniteHypothesisTable {
  std::vector<std::string> labels;
  std::vector<double> code_lengths;
  /// One row per sample, one column per hypothesis.
  std::vector<std::vector<double>> loss;

  std::size_t hypothesis_count() const noexcept { return code_lengths.size(); }
  std::size_t sample_count() const noexcept { return loss.size(); }

  /// Throws InvalidInput on shape mismatch, non-finite entries, or a Kraft sum above 1 + 1e-9.
  void validate() const;
};

using SamplePair = std::pair<std::size_t, std::size_t>;

std::vector<double> exact_gibbs(const FiniteHypothesisTable& table, std::size_t sample,
                                double lambda);

/// KL(q || p) for probability vector q against the (possibly unnormalized)
/// measure exp(log_p).
double kl_divergence(std::span<const double> q, std::span<const double> log_p);

/// KL of the exact Gibbs distribution from the normalized code distribution.
double exact_capacity(const FiniteHypothesisTable& table, std::size_t sample, double lambda);

double exact_expected_loss(const FiniteHypothesisTable& table, std::size_t sample, double lambda);

/// Expected loss of `target` under the Gibbs distribution of `source`.
double exact_cross_loss(const FiniteHypothesisTable& table, std::size_t source,
                        std::size_t target, double lambda);

/// Smallest lambda in [0, lambda_max] whose exact capacity reaches `capacity`
/// (bisection). Returns lambda_max when the capacity is out of reach.
double lambda_for_capacity(const FiniteHypothesisTable& table, std::size_t sample,
                           double capacity, double lambda_max);

/// argmin of loss over hypotheses with code length <= capacity; ties go to
/// the shorter code, then the lower index. Throws NoFeasibleDescription.
std::size_t solve_discrete_description(const FiniteHypothesisTable& table, std::size_t sample,
                                       double capacity);

/// Minimum expected loss over Dirac distributions whose KL from the code
/// measure is within `capacity`.
double dirac_restricted_optimum(const FiniteHypothesisTable& table, std::size_t sample,
                                double capacity);

/// Two-part code min (loss + code length) over hypotheses with code length <= capacity.
double structure_function(const FiniteHypothesisTable& table, std::size_t sample,
                          double capacity);

/// Distance curve with exact expectations. Each capacity-grid point is
/// matched exactly (bisection on lambda per sample) rather than interpolated.
/// c_max defaults to the smaller exact capacity at the largest grid lambda.
DistanceCurve exact_distance_curve(const FiniteHypothesisTable& table, SamplePair pair,
                                   std::span<const double> lambda_grid,
                                   const DistanceOptions& options = {});

/// Exact Delta (source -> target) at a shared lambda.
double exact_delta_at_lambda(const FiniteHypothesisTable& table, std::size_t source,
                             std::size_t target, double lambda);

/// Intersection form E_{q_cap}[l1 + l2] - E_{q1}[l1] - E_{q2}[l2] with q1, q2
/// taken at lambdas lambda1, lambda2.
double exact_intersection_distance(const FiniteHypothesisTable& table, SamplePair pair,
                                   double lambda1, double lambda2);

/// Appends a hypothesis with code length epsilon_code attaining the optimal
/// two-part code for every sample, scaling the existing code mass down when
/// needed to keep the Kraft sum at most one.
FiniteHypothesisTable universal_augment(const FiniteHypothesisTable& table,
                                        double epsilon_code = 0.1);

/// ScoredBatch enumerating the table once per hypothesis with a uniform
/// proposal, so the batch's importance weights are the exact Gibbs weights.
ScoredBatch enumerate_batch(const FiniteHypothesisTable& table, SamplePair pair);

/// Plain-text table format:
///   hypotheses<TAB>label...
///   code<TAB>value...
///   loss<TAB>value...        (one line per sample)
/// Blank lines and lines starting with '#' are ignored.
FiniteHypothesisTable parse_table(std::istream& in);
FiniteHypothesisTable load_table(const std::string& path);
void write_table(std::ostream& out, const FiniteHypothesisTable& table);

}  // namespace ccdae::oracle

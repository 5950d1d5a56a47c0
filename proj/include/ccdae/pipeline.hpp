#pragma once

// Pair comparison end to end: sample descriptions from both inputs, score
// every pooled description under both, assemble the ScoredBatch and run the
// distance computation.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ccdae/backends.hpp"
#include "ccdae/core_distance.hpp"
#include "ccdae/scored_batch.hpp"

namespace ccdae {

enum class PcodeMode { proposal_mix, lm_code };

const char* to_string(PcodeMode mode) noexcept;
PcodeMode parse_pcode_mode(std::string_view name);
LossMode parse_loss_mode(std::string_view name);

struct CompareConfig {
  std::size_t samples_per_input = 20;
  std::size_t max_tokens = 20;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  PcodeMode pcode_mode = PcodeMode::proposal_mix;
  LossMode loss_mode = LossMode::encoder_only;
  std::vector<double> lambda_grid = core::default_lambda_grid();
  std::optional<double> c_max;
  std::size_t capacity_grid_size = 200;
  /// Overrides the backend's prompt when set.
  std::optional<std::string> prompt;
  /// Divide each loss by the token count of the scored sequence.
  bool length_normalize = false;
  /// Gibbs parameter at which explanations are computed.
  double explain_lambda = 1.0;
  /// Entries kept per ranked explanation list; 0 keeps all.
  std::size_t explain_top_k = 10;

  /// Throws InvalidInput on counts < 1, non-positive temperature or a bad grid.
  void validate() const;
};

struct RankedDescription {
  std::string text;
  double weight = 0.0;
};

struct Explanation {
  double lambda = 0.0;
  /// Ranked by q_∩ weight, descending.
  std::vector<RankedDescription> shared;
  /// Per sample, ranked by q_i - q_∩, descending.
  std::array<std::vector<RankedDescription>, 2> distinctive;
};

struct Diagnostics {
  std::size_t hypotheses = 0;
  std::size_t draws = 0;
  std::size_t dropped = 0;
  /// ESS of each sample's Gibbs weights at the first and last λ of the grid.
  std::array<double, 2> ess_lambda_min{};
  std::array<double, 2> ess_lambda_max{};
  std::vector<std::string> warnings;
};

struct DistanceReport {
  std::string x1;
  std::string x2;
  std::string backend_id;
  CompareConfig config;
  DistanceCurve curve;
  double auc = 0.0;
  Explanation explanation;
  Diagnostics diagnostics;
  bool cross_modal = false;
};

/// ESS below this triggers a warning in the diagnostics.
inline constexpr double kEssWarningThreshold = 5.0;

/// Samples, deduplicates and scores the pooled descriptions. Inputs are put
/// in a canonical order before sampling so that swapping x1 and x2 yields the
/// same hypotheses with exchanged loss rows.
ScoredBatch build_batch(std::string_view x1, std::string_view x2, const Backend& backend,
                        const CompareConfig& config);

DistanceReport compare(std::string_view x1, std::string_view x2, const Backend& backend,
                       const CompareConfig& config);

/// Same algorithm as compare; `x_other` is passed to the backend verbatim as a
/// context reference (for example an image id understood by a remote server).
DistanceReport cross_modal_compare(std::string_view x_text, std::string_view x_other, const Backend& backend,
                                   const CompareConfig& config);

/// Full rankings (no truncation). Ties are ordered by text, then batch order.
Explanation explain(const ScoredBatch& batch, double lambda);

Diagnostics diagnose(const ScoredBatch& batch, std::span<const double> lambda_grid);

}  // namespace ccdae

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ccdae {

/// Which of the two compared items a row of losses belongs to.
enum class SampleIndex : int { first = 0, second = 1 };

constexpr SampleIndex other(SampleIndex s) noexcept {
  return s == SampleIndex::first ? SampleIndex::second : SampleIndex::first;
}
constexpr std::size_t index_of(SampleIndex s) noexcept { return static_cast<std::size_t>(s); }

enum class LossMode { generative, encoder_only };

const char* to_string(LossMode mode) noexcept;

/// One candidate description. Log-probabilities are in nats.
struct Hypothesis {
  std::vector<std::int32_t> tokens;
  std::string text;
  double log_pcode = 0.0;
  double log_proposal = 0.0;
  /// Number of identical proposal draws merged into this entry.
  std::uint32_t multiplicity = 1;
  /// log p(h|x_1), log p(h|x_2) when the batch was built from encoder conditionals.
  std::optional<std::array<double, 2>> log_cond;
  /// True when the description ended with an explicit end-of-sequence.
  bool terminated = false;
};

/// Per-pair evaluation matrix: hypotheses with their code and proposal
/// log-probs, and the reconstruction loss of each compared item under each
/// hypothesis. Every stored loss is finite.
class ScoredBatch {
 public:
  /// Drops hypotheses with a non-finite loss (either row), non-finite
  /// log-probs, or no tokens; the number dropped is kept in `dropped()`.
  /// Throws DegenerateBatch when fewer than two survive.
  static ScoredBatch build(std::vector<Hypothesis> hypotheses,
                           std::array<std::vector<double>, 2> loss, LossMode mode);

  std::span<const Hypothesis> hypotheses() const noexcept { return hypotheses_; }
  std::span<const double> loss(SampleIndex s) const noexcept { return loss_[index_of(s)]; }
  LossMode mode() const noexcept { return mode_; }
  std::size_t size() const noexcept { return hypotheses_.size(); }
  std::size_t dropped() const noexcept { return dropped_; }
  double total_multiplicity() const noexcept { return total_multiplicity_; }

  /// Same hypotheses with the two loss rows (and log_cond entries) exchanged.
  ScoredBatch swapped() const;

 private:
  ScoredBatch() = default;

  std::vector<Hypothesis> hypotheses_;
  std::array<std::vector<double>, 2> loss_;
  LossMode mode_ = LossMode::encoder_only;
  std::size_t dropped_ = 0;
  double total_multiplicity_ = 0.0;
};

}  // namespace ccdae

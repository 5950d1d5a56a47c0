#include "ccdae/scored_batch.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "ccdae/error.hpp"

namespace ccdae {

const char* to_string(LossMode mode) noexcept {
  switch (mode) {
    case LossMode::generative:
      return "generative";
    case LossMode::encoder_only:
      return "encoder_only";
  }
  return "unknown";
}

ScoredBatch ScoredBatch::build(std::vector<Hypothesis> hypotheses,
                               std::array<std::vector<double>, 2> loss, LossMode mode) {
  if (loss[0].size() != hypotheses.size() || loss[1].size() != hypotheses.size()) {
    throw InvalidInput("loss rows must have one column per hypothesis (" +
                       std::to_string(hypotheses.size()) + " hypotheses, rows of " +
                       std::to_string(loss[0].size()) + " and " + std::to_string(loss[1].size()) +
                       ")");
  }
  ScoredBatch batch;
  batch.mode_ = mode;
  for (std::size_t j = 0; j < hypotheses.size(); ++j) {
    Hypothesis& h = hypotheses[j];
    const bool usable = std::isfinite(loss[0][j]) && std::isfinite(loss[1][j]) &&
                        std::isfinite(h.log_pcode) && std::isfinite(h.log_proposal) &&
                        !h.tokens.empty() && h.multiplicity > 0;
    if (!usable) {
      ++batch.dropped_;
      continue;
    }
    batch.total_multiplicity_ += static_cast<double>(h.multiplicity);
    batch.loss_[0].push_back(loss[0][j]);
    batch.loss_[1].push_back(loss[1][j]);
    batch.hypotheses_.push_back(std::move(h));
  }
  if (batch.hypotheses_.size() < 2) {
    throw DegenerateBatch("scored batch needs at least 2 usable hypotheses, got " +
                          std::to_string(batch.hypotheses_.size()) + " (" +
                          std::to_string(batch.dropped_) + " dropped)");
  }
  return batch;
}

ScoredBatch ScoredBatch::swapped() const {
  ScoredBatch out = *this;
  std::swap(out.loss_[0], out.loss_[1]);
  for (Hypothesis& h : out.hypotheses_) {
    if (h.log_cond) std::swap((*h.log_cond)[0], (*h.log_cond)[1]);
  }
  return out;
}

}  // namespace ccdae

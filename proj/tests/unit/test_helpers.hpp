#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "ccdae/oracle.hpp"
#include "ccdae/scored_batch.hpp"

namespace ccdae::testing {

/// Batch with p_code = pi unless explicit code/proposal log-probs are given.
inline ScoredBatch make_batch(const std::vector<double>& loss1, const std::vector<double>& loss2,
                              std::vector<double> log_pcode = {},
                              std::vector<double> log_proposal = {},
                              LossMode mode = LossMode::generative) {
  const std::size_t n = loss1.size();
  if (log_pcode.empty()) log_pcode.assign(n, -std::log(static_cast<double>(n)));
  if (log_proposal.empty()) log_proposal = log_pcode;
  std::vector<Hypothesis> hyps(n);
  for (std::size_t j = 0; j < n; ++j) {
    hyps[j].tokens = {static_cast<std::int32_t>(j)};
    hyps[j].text = "h" + std::to_string(j);
    hyps[j].log_pcode = log_pcode[j];
    hyps[j].log_proposal = log_proposal[j];
  }
  return ScoredBatch::build(std::move(hyps), {loss1, loss2}, mode);
}

/// Separable 2x2 table: each item has its own zero-loss hypothesis.
inline oracle::FiniteHypothesisTable separable_table() {
  oracle::FiniteHypothesisTable t;
  t.labels = {"describes-x1", "describes-x2"};
  t.code_lengths = {std::log(2.0), std::log(2.0)};
  t.loss = {{0.0, 10.0}, {10.0, 0.0}};
  return t;
}

/// Random table with `n` hypotheses and `samples` loss rows; codes are a
/// normalized random distribution, losses uniform on [0, spread].
inline oracle::FiniteHypothesisTable random_table(std::size_t n, std::size_t samples,
                                                  unsigned seed, double spread = 4.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::uniform_real_distribution<double> l(0.0, spread);
  oracle::FiniteHypothesisTable t;
  std::vector<double> p(n);
  double s = 0.0;
  for (double& x : p) {
    x = u(rng);
    s += x;
  }
  for (std::size_t j = 0; j < n; ++j) {
    t.labels.push_back("h" + std::to_string(j));
    t.code_lengths.push_back(-std::log(p[j] / s));
  }
  t.loss.assign(samples, std::vector<double>(n));
  for (auto& row : t.loss) {
    for (double& v : row) v = l(rng);
  }
  return t;
}

}  // namespace ccdae::testing

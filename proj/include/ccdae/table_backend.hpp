#pragma once

#include <map>
#include <string>

#include "ccdae/backends.hpp"

namespace ccdae {

/// Fixture backend: log-probs are looked up in a JSON document
///
///   {"conditional": {"<context>": {"<description>": logp, ...}, ...},
///    "unconditional": {"<description>": logp, ...}}
///
/// Values are returned verbatim as a single token. Sampling draws from the
/// listed descriptions of a context, weighted by exp(logp / T). The prompt
/// and the `terminated` flag do not affect lookups.
class TableBackend final : public Backend {
 public:
  using Row = std::map<std::string, double, std::less<>>;

  TableBackend(std::map<std::string, Row, std::less<>> conditional, Row unconditional);
  static TableBackend from_json(std::string_view text);
  static TableBackend load_file(const std::string& path);

  std::string id() const override;
  std::unique_ptr<Backend> with_prompt(std::optional<std::string> prompt) const override;
  LogProbResult cond_logprob(std::string_view context, std::string_view description,
                             bool terminated) const override;
  LogProbResult code_logprob(std::string_view description, bool terminated) const override;
  std::vector<SampledDescription> sample_descriptions(std::string_view context,
                                                      const SampleRequest& request) const override;
  /// Categorical over the union of both rows with weights from the mean log
  /// prob; descriptions missing from either row are excluded.
  std::vector<SampledDescription> ensemble_sample(std::string_view context_a,
                                                  std::string_view context_b,
                                                  const SampleRequest& request) const override;

 private:
  const Row& row(std::string_view context) const;

  std::map<std::string, Row, std::less<>> conditional_;
  Row unconditional_;
  std::string source_ = "inline";
};

}  // namespace ccdae

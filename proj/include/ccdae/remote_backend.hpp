#pragma once

#include <memory>
#include <string>

#include "ccdae/backends.hpp"

namespace ccdae {

/// HTTP client for the two-endpoint scoring protocol:
///
///   POST /v1/logprob  {context, continuation, prompt?, terminated}
///                     -> {per_token_logprobs: [...], total}
///   POST /v1/sample   {context, prompt?, num_samples, max_tokens, temperature, seed}
///                     -> {samples: [{text, per_token_logprobs, terminated?}]}
///
/// Non-2xx responses carry an "error" field. Transport failures and 5xx are
/// retried with exponential backoff up to `max_attempts`; batched scoring
/// keeps at most `max_in_flight` requests open.
class RemoteBackend final : public Backend {
 public:
  RemoteBackend(std::string endpoint, RemoteOptions options = {},
                std::optional<std::string> prompt = std::nullopt);
  ~RemoteBackend() override;

  std::string id() const override;
  /// The copy shares the in-flight limit with this backend.
  std::unique_ptr<Backend> with_prompt(std::optional<std::string> prompt) const override;
  LogProbResult cond_logprob(std::string_view context, std::string_view description,
                             bool terminated) const override;
  LogProbResult code_logprob(std::string_view description, bool terminated) const override;
  std::vector<SampledDescription> sample_descriptions(std::string_view context,
                                                      const SampleRequest& request) const override;
  /// The protocol has no token-level access; always throws BackendError.
  std::vector<SampledDescription> ensemble_sample(std::string_view context_a,
                                                  std::string_view context_b,
                                                  const SampleRequest& request) const override;
  std::vector<LogProbResult> cond_logprob_many(std::span<const DescriptionQuery> queries) const override;

  const std::string& endpoint() const noexcept { return endpoint_; }
  const RemoteOptions& options() const noexcept { return options_; }

 private:
  struct Impl;
  LogProbResult logprob(std::string_view context, std::string_view continuation, bool terminated,
                        bool with_prompt) const;

  std::string endpoint_;
  RemoteOptions options_;
  std::shared_ptr<Impl> impl_;
};

}  // namespace ccdae

#pragma once

// Description-scoring backends. A backend provides the conditional
// log-probability of a description given an input, the unconditional code
// log-probability of a description, and sampling of descriptions.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ccdae {

/// Log-probability of a description, nats.
struct LogProbResult {
  double total = 0.0;
  std::vector<double> per_token;
};

struct SampledDescription {
  std::string text;
  std::vector<std::int32_t> tokens;
  /// Per-token log-probs under the untempered model.
  std::vector<double> per_token;
  /// True when sampling stopped at end-of-sequence rather than max_tokens.
  bool terminated = false;

  double total() const noexcept;
};

struct SampleRequest {
  std::size_t count = 20;
  std::size_t max_tokens = 20;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

/// One scoring query for batched evaluation.
struct DescriptionQuery {
  std::string context;
  std::string description;
  bool terminated = false;
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string id() const = 0;

  /// log p(description | prompt, context). `terminated` adds the
  /// end-of-sequence term after the last token.
  virtual LogProbResult cond_logprob(std::string_view context, std::string_view description,
                                     bool terminated) const = 0;

  /// Unconditional log p_code(description); the prompt is not applied.
  virtual LogProbResult code_logprob(std::string_view description, bool terminated) const = 0;

  virtual std::vector<SampledDescription> sample_descriptions(std::string_view context,
                                                              const SampleRequest& request) const = 0;

  /// Samples from the token-level ensemble 0.5 log p(.|a) + 0.5 log p(.|b),
  /// renormalized. Backends without token-level access throw BackendError.
  virtual std::vector<SampledDescription> ensemble_sample(std::string_view context_a,
                                                          std::string_view context_b,
                                                          const SampleRequest& request) const;

  /// Scores many queries; the default runs them in order.
  virtual std::vector<LogProbResult> cond_logprob_many(std::span<const DescriptionQuery> queries) const;

  /// Copy of this backend with a different prompt. Model state is shared.
  virtual std::unique_ptr<Backend> with_prompt(std::optional<std::string> prompt) const = 0;

  const std::optional<std::string>& prompt() const noexcept { return prompt_; }
  void set_prompt(std::optional<std::string> prompt) { prompt_ = std::move(prompt); }

 protected:
  std::optional<std::string> prompt_;
};

enum class BackendKind { ngram, remote, table };

struct RemoteOptions {
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds timeout{30000};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
};

struct BackendDescriptor {
  BackendKind kind = BackendKind::ngram;
  /// Model path (ngram), endpoint URL (remote), or fixture path (table).
  std::string location;
  std::optional<std::string> prompt;
  RemoteOptions remote;
};

/// Validates the descriptor and constructs the backend.
std::unique_ptr<Backend> make_backend(const BackendDescriptor& descriptor);

BackendKind parse_backend_kind(std::string_view name);

}  // namespace ccdae

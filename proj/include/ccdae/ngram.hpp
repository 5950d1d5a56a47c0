#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ccdae/backends.hpp"

namespace ccdae {

/// Character-level n-gram model with additive smoothing.
///
/// Symbols are the bytes observed in training plus two reserved entries,
/// UNK and end-of-sequence. Counts are kept for every context length below
/// `order`; a history is scored with the longest suffix seen in training,
/// smoothed over the full vocabulary, so every conditional sums to one.
class NGramModel {
 public:
  using Symbol = std::int32_t;

  static NGramModel train(std::string_view corpus, int order = 5, double alpha = 0.01);

  static NGramModel load(std::istream& in);
  static NGramModel load_file(const std::string& path);
  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;

  int order() const noexcept { return order_; }
  double alpha() const noexcept { return alpha_; }
  std::size_t vocab_size() const noexcept { return bytes_.size() + 2; }
  Symbol unk() const noexcept { return static_cast<Symbol>(bytes_.size()); }
  Symbol eos() const noexcept { return static_cast<Symbol>(bytes_.size() + 1); }
  std::size_t context_count() const noexcept { return contexts_.size(); }

  Symbol symbol_of(unsigned char byte) const noexcept { return byte_to_symbol_[byte]; }
  /// Byte for an ordinary symbol; UNK and EOS have none.
  unsigned char byte_of(Symbol s) const { return bytes_.at(static_cast<std::size_t>(s)); }

  /// Log-probabilities of every symbol after `history` (raw bytes).
  std::vector<double> next_logprobs(std::string_view history) const;
  double next_logprob(std::string_view history, Symbol next) const;

 private:
  struct Context {
    std::uint64_t total = 0;
    std::vector<std::pair<Symbol, std::uint32_t>> counts;  // sorted by symbol
  };

  NGramModel() = default;
  const Context& lookup(std::string_view history) const;
  void finalize_vocab();

  int order_ = 5;
  double alpha_ = 0.01;
  std::vector<unsigned char> bytes_;
  std::array<Symbol, 256> byte_to_symbol_{};
  std::unordered_map<std::string, Context> contexts_;
};

/// Backend over an NGramModel. The conditioning prefix for an input is
/// `prompt + "\n"` (when a prompt is set), then the input, then
/// `separator` (empty by default); descriptions continue from there.
class NGramBackend final : public Backend {
 public:
  explicit NGramBackend(NGramModel model, std::optional<std::string> prompt = std::nullopt,
                        std::string separator = {});
  NGramBackend(std::shared_ptr<const NGramModel> model, std::optional<std::string> prompt,
               std::string separator = {});

  std::string id() const override;
  std::unique_ptr<Backend> with_prompt(std::optional<std::string> prompt) const override;
  LogProbResult cond_logprob(std::string_view context, std::string_view description,
                             bool terminated) const override;
  LogProbResult code_logprob(std::string_view description, bool terminated) const override;
  std::vector<SampledDescription> sample_descriptions(std::string_view context,
                                                      const SampleRequest& request) const override;
  std::vector<SampledDescription> ensemble_sample(std::string_view context_a,
                                                  std::string_view context_b,
                                                  const SampleRequest& request) const override;

  const NGramModel& model() const noexcept { return *model_; }
  std::string conditioning_prefix(std::string_view context) const;

 private:
  LogProbResult score(std::string history, std::string_view description, bool terminated) const;

  std::shared_ptr<const NGramModel> model_;
  std::string separator_;
};

}  // namespace ccdae

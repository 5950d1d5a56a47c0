#pragma once

// Description generation for qualitative curves: short atoms sampled from
// the backend, composed into longer descriptions by beam search, and the
// per-capacity best single description for each input.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccdae/backends.hpp"
#include "ccdae/pipeline.hpp"
#include "ccdae/report_io.hpp"

namespace ccdae {

enum class AtomSource { sample_1, sample_2, ensemble };

const char* to_string(AtomSource s) noexcept;

struct Atom {
  std::string text;
  AtomSource source = AtomSource::sample_1;
};

inline constexpr const char* kDefaultAtomPrompt = "List short facts about the following, one per line:";

/// Splits generated text into trimmed, nonempty single-line fragments.
/// Bullet markers (•, -, *, "1." / "1)") at the start of a line are removed.
std::vector<std::string> split_atoms(std::string_view text);

struct AtomConfig {
  std::size_t count = 40;
  /// Unset uses kDefaultAtomPrompt; an empty string disables the prompt.
  std::optional<std::string> prompt;
  std::size_t max_tokens = 20;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

/// Samples `count` descriptions of `context` under the prompt, splits them
/// into atoms and keeps the first `count` distinct ones in draw order.
std::vector<Atom> generate_atoms(const Backend& backend, std::string_view context, const AtomConfig& config,
                                 AtomSource source = AtomSource::sample_1);

/// Atoms of x1, then of x2, then ensemble atoms when the backend supports
/// ensemble sampling; duplicates keep their first source.
std::vector<Atom> generate_pair_atoms(const Backend& backend, std::string_view x1, std::string_view x2,
                                      const AtomConfig& config);

/// Maps (description, context) to a score; larger is better. Called from
/// several threads at once.
using ProxyScorer = std::function<double(std::string_view description, std::string_view context)>;

/// Negated encoder-only loss, log p(h|x) - log p(h), with p(h) the
/// equal mixture of p(h|x) and p(h|other) when `other` is given and the
/// backend's code distribution otherwise. Holds a reference to `backend`.
ProxyScorer encoder_proxy(const Backend& backend, std::optional<std::string> other = std::nullopt);

struct BeamConfig {
  std::size_t beam_width = 8;
  std::size_t max_atoms = 10;
  /// Weight of the negative-prompt similarity subtracted from the proxy score.
  double negative_prompt_penalty = 0.0;
  std::optional<std::string> negative_prompt;
  std::string joiner = ", ";
  std::size_t workers = 4;
};

struct BeamEntry {
  /// Increasing atom indices.
  std::vector<std::size_t> atoms_used;
  std::string text;
  double proxy_score = 0.0;
  /// -code_logprob of the text; NaN until fill_code_lengths runs.
  double code_length = std::numeric_limits<double>::quiet_NaN();
};

/// For L = 1..max_atoms, the top beam_width atom subsets of size L joined in
/// atom order, ranked by proxy score minus penalty; ties go to the smaller
/// text. Result[L-1] holds the entries of length L. Throws InvalidInput on
/// an empty atom list or beam_width 0.
std::vector<std::vector<BeamEntry>> beam_compose(std::span<const Atom> atoms, std::string_view context,
                                                 const ProxyScorer& scorer, const BeamConfig& config);

/// Every subset of size 1..max_atoms, ranked the same way; the reference
/// beam_compose is checked against. Exponential in the atom count.
std::vector<std::vector<BeamEntry>> exhaustive_compose(std::span<const Atom> atoms, std::string_view context,
                                                       const ProxyScorer& scorer, const BeamConfig& config);

/// Sets code_length on every entry.
void fill_code_lengths(std::vector<std::vector<BeamEntry>>& levels, const Backend& backend);

/// A description with its code length and its loss against each input.
struct ScoredDescription {
  std::string text;
  double code_length = 0.0;
  std::array<double, 2> loss{};
};

/// Code length is -code_logprob (terminated). Losses follow config.loss_mode:
/// encoder-only uses the two-input mixture as p(h), generative uses
/// -log p(x_i | h). Duplicated texts are scored once.
std::vector<ScoredDescription> score_descriptions(std::span<const std::string> texts, std::string_view x1,
                                                  std::string_view x2, const Backend& backend,
                                                  const CompareConfig& config);

struct DescriptionCurveRow {
  double capacity = 0.0;
  /// Index into the entries for x1, x2 and the summed loss; empty when no
  /// entry fits the capacity.
  std::array<std::optional<std::size_t>, 3> best;
  std::array<double, 3> loss{};
};

struct DescriptionCurve {
  std::vector<ScoredDescription> entries;
  std::vector<DescriptionCurveRow> rows;
};

/// 0 followed by the distinct code lengths in increasing order: the
/// capacities at which a best description can change.
std::vector<double> description_capacity_grid(std::span<const ScoredDescription> entries);

/// For each capacity C the entry with the lowest loss among those with code
/// length <= C, per input and for the summed loss. Ties go to the shorter
/// code, then the earlier entry.
DescriptionCurve best_single_description_curve(std::vector<ScoredDescription> entries,
                                               std::span<const double> capacity_grid);

/// CSV `capacity,best_h_x1,loss_x1,best_h_x2,loss_x2,best_common,loss_common`;
/// infeasible cells are empty.
void write_description_curve_csv(std::ostream& out, const DescriptionCurve& curve, Units units = Units::nats);

}  // namespace ccdae

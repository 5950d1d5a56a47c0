#pragma once

// Benchmark datasets, scoring loops and their metrics.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ccdae/backends.hpp"
#include "ccdae/pipeline.hpp"
#include "ccdae/report_io.hpp"

namespace ccdae {

struct PairRecord {
  std::string id;
  std::string text_a;
  std::string text_b;
  double human_score = 0.0;
};

struct ChoiceRecord {
  std::string id;
  std::string context;
  std::string positive;
  std::string negative;
};

struct LoadDiagnostics {
  std::size_t skipped = 0;
  /// One message per skipped line, prefixed with its line number.
  std::vector<std::string> messages;
};

template <typename Record>
struct Dataset {
  std::vector<Record> records;
  LoadDiagnostics diagnostics;
};

/// Tab-separated `[id]\ttext_a\ttext_b\tscore`. A first line whose last
/// column is not a number is taken as a header. Without an id column the id
/// is the line number. Throws InvalidInput when the file cannot be read or
/// holds no valid record.
Dataset<PairRecord> load_pairs(const std::filesystem::path& path);
Dataset<PairRecord> parse_pairs(std::string_view text);

/// Tab-separated `[id]\tcontext\tpositive\tnegative`. A first line naming
/// the positive and negative columns is a header.
Dataset<ChoiceRecord> load_choices(const std::filesystem::path& path);
Dataset<ChoiceRecord> parse_choices(std::string_view text);

/// Ranks starting at 1; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> xs);

/// Pearson correlation of average ranks. Throws InvalidInput on length
/// mismatch or fewer than two values, UndefinedCorrelation on constant input.
double spearman(std::span<const double> xs, std::span<const double> ys);

enum class ScoreKind { auc, d_at_c, traj, cond_lik };

/// Accepts auc, dc / d_at_c, traj, condlik / cond_lik.
ScoreKind parse_score_kind(std::string_view name);
const char* to_string(ScoreKind kind) noexcept;

/// Too many pairs failed to score.
class BenchFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BenchConfig {
  CompareConfig compare;
  ScoreKind score = ScoreKind::auc;
  /// Capacity (nats) at which d_at_c reads the distance curve.
  std::optional<double> capacity;
  /// Shared upper limit (nats) for the auc score when compare.c_max is
  /// unset: each pair integrates up to min(cap, its automatic c_max), so
  /// pairs are compared over the same capacity range. Unset keeps the
  /// per-pair automatic limit.
  std::optional<double> auc_cap = 0.5;
  std::size_t workers = 4;
  double failure_budget = 0.1;

  /// samples_per_input = 10, max_tokens = 10.
  static BenchConfig choice_defaults();
  void validate() const;
};

/// Similarity of a pair under the configured score. Distances are negated,
/// so larger always means more similar.
double pair_similarity(std::string_view x1, std::string_view x2, const Backend& backend, const BenchConfig& config);

struct PairScore {
  std::string id;
  double human = 0.0;
  /// Empty when the pair failed.
  std::optional<double> score;
  std::string error;
};

struct SimilarityReport {
  std::string backend_id;
  BenchConfig config;
  std::vector<PairScore> pairs;
  std::size_t failures = 0;
  double rho = 0.0;
  double rho_x100 = 0.0;
  double wall_seconds = 0.0;
};

/// Scores every pair concurrently and correlates similarity with the human
/// scores. Failed pairs are excluded; more than failure_budget of them throws
/// BenchFailure.
SimilarityReport run_similarity_bench(std::span<const PairRecord> records, const Backend& backend,
                                      const BenchConfig& config);

struct ChoiceOutcome {
  std::string id;
  std::optional<double> positive_score;
  std::optional<double> negative_score;
  /// 1 when the positive is more similar, 0.5 on a tie, 0 otherwise.
  double credit = 0.0;
  std::string error;
};

struct ChoiceReport {
  std::string backend_id;
  BenchConfig config;
  std::vector<ChoiceOutcome> records;
  std::size_t failures = 0;
  double accuracy = 0.0;
  double wall_seconds = 0.0;
};

ChoiceReport run_choice_bench(std::span<const ChoiceRecord> records, const Backend& backend,
                              const BenchConfig& config);

std::string similarity_report_json(const SimilarityReport& report, Units units = Units::nats);
std::string choice_report_json(const ChoiceReport& report, Units units = Units::nats);

/// `id,score,human`; failed pairs are omitted.
void write_scores_csv(std::ostream& out, const SimilarityReport& report, Units units = Units::nats);
/// `id,positive_score,negative_score,credit`; failed records are omitted.
void write_choice_csv(std::ostream& out, const ChoiceReport& report, Units units = Units::nats);

}  // namespace ccdae

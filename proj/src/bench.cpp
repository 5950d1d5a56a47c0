#include "ccdae/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ccdae/baselines.hpp"
#include "ccdae/error.hpp"

namespace ccdae {

using nlohmann::json;

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_real(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Calls fn(line_number, line) for every nonblank line, CR stripped.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++lineno;
    start = nl + 1;
    if (trim(line).empty()) continue;
    fn(lineno, line);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void skip(LoadDiagnostics& d, std::size_t lineno, const std::string& why) {
  ++d.skipped;
  d.messages.push_back("line " + std::to_string(lineno) + ": " + why);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

double score_scale(ScoreKind kind, Units units) {
  const double s = unit_scale(units);
  return kind == ScoreKind::auc ? s * s : s;
}

json config_json(const BenchConfig& b, Units units) {
  const auto& c = b.compare;
  const double s = unit_scale(units);
  return {{"score", to_string(b.score)},
          {"capacity", b.capacity ? json(*b.capacity * s) : json(nullptr)},
          {"auc_cap", b.auc_cap ? json(*b.auc_cap * s) : json(nullptr)},
          {"workers", b.workers},
          {"failure_budget", b.failure_budget},
          {"samples_per_input", c.samples_per_input},
          {"max_tokens", c.max_tokens},
          {"temperature", c.temperature},
          {"seed", c.seed},
          {"pcode_mode", to_string(c.pcode_mode)},
          {"loss_mode", to_string(c.loss_mode)},
          {"lambda_grid", {{"start", c.lambda_grid.front()}, {"stop", c.lambda_grid.back()}, {"count", c.lambda_grid.size()}}},
          {"c_max", c.c_max ? json(*c.c_max * s) : json(nullptr)},
          {"prompt", c.prompt ? json(*c.prompt) : json(nullptr)},
          {"length_normalize", c.length_normalize}};
}

// Runs fn(k) for k in [0, n) on up to `workers` threads. Each index is
// visited once; results are written by index, so the order of completion
// does not matter.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t k = next++; k < n; k = next++) fn(k);
  };
  const std::size_t extra = std::min(workers, n) > 0 ? std::min(workers, n) - 1 : 0;
  std::vector<std::jthread> pool;
  pool.reserve(extra);
  for (std::size_t t = 0; t < extra; ++t) pool.emplace_back(loop);
  loop();
}

void check_budget(std::size_t failures, std::size_t total, double budget, const std::string& first_error) {
  if (static_cast<double>(failures) > budget * static_cast<double>(total)) {
    throw BenchFailure(std::to_string(failures) + " of " + std::to_string(total) +
                       " records failed to score (budget " + std::to_string(budget) + "); first error: " + first_error);
  }
}

}  // namespace

Dataset<PairRecord> parse_pairs(std::string_view text) {
  Dataset<PairRecord> out;
  bool first = true;
  for_each_line(text, [&](std::size_t lineno, std::string_view line) {
    const auto cols = split_tabs(line);
    const bool is_first = std::exchange(first, false);
    if (cols.size() != 3 && cols.size() != 4) {
      skip(out.diagnostics, lineno, "expected 3 or 4 tab-separated columns, got " + std::to_string(cols.size()));
      return;
    }
    const auto score = parse_real(cols.back());
    if (!score) {
      if (!is_first) skip(out.diagnostics, lineno, "non-numeric score '" + std::string(cols.back()) + "'");
      return;
    }
    PairRecord r;
    const std::size_t off = cols.size() - 3;
    r.id = off ? std::string(trim(cols[0])) : std::to_string(lineno);
    r.text_a = std::string(cols[off]);
    r.text_b = std::string(cols[off + 1]);
    r.human_score = *score;
    out.records.push_back(std::move(r));
  });
  if (out.records.empty()) throw InvalidInput("pair file holds no valid record");
  return out;
}

Dataset<PairRecord> load_pairs(const std::filesystem::path& path) {
  try {
    return parse_pairs(read_file(path));
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

Dataset<ChoiceRecord> parse_choices(std::string_view text) {
  Dataset<ChoiceRecord> out;
  bool first = true;
  for_each_line(text, [&](std::size_t lineno, std::string_view line) {
    const auto cols = split_tabs(line);
    if (std::exchange(first, false) && cols.size() >= 2 && lower(trim(cols[cols.size() - 2])) == "positive" &&
        lower(trim(cols.back())) == "negative") {
      return;
    }
    if (cols.size() != 3 && cols.size() != 4) {
      skip(out.diagnostics, lineno, "expected 3 or 4 tab-separated columns, got " + std::to_string(cols.size()));
      return;
    }
    const std::size_t off = cols.size() - 3;
    ChoiceRecord r;
    r.id = off ? std::string(trim(cols[0])) : std::to_string(lineno);
    r.context = std::string(cols[off]);
    r.positive = std::string(cols[off + 1]);
    r.negative = std::string(cols[off + 2]);
    if (r.positive == r.negative) {
      skip(out.diagnostics, lineno, "positive and negative are identical");
      return;
    }
    out.records.push_back(std::move(r));
  });
  if (out.records.empty()) throw InvalidInput("choice file holds no valid record");
  return out;
}

Dataset<ChoiceRecord> load_choices(const std::filesystem::path& path) {
  try {
    return parse_choices(read_file(path));
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i + 1;
    while (j < order.size() && xs[order[j]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j + 1);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidInput("spearman: length mismatch");
  if (xs.size() < 2) throw InvalidInput("spearman: need at least two values");
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (!std::isfinite(xs[k]) || !std::isfinite(ys[k])) throw InvalidInput("spearman: non-finite value");
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double mean = 0.5 * static_cast<double>(xs.size() + 1);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < rx.size(); ++k) {
    const double a = rx[k] - mean;
    const double b = ry[k] - mean;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelation("spearman: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ScoreKind parse_score_kind(std::string_view name) {
  if (name == "auc") return ScoreKind::auc;
  if (name == "dc" || name == "d_at_c") return ScoreKind::d_at_c;
  if (name == "traj") return ScoreKind::traj;
  if (name == "condlik" || name == "cond_lik") return ScoreKind::cond_lik;
  throw InvalidInput("unknown score '" + std::string(name) + "' (expected auc, dc, traj or condlik)");
}

const char* to_string(ScoreKind kind) noexcept {
  switch (kind) {
    case ScoreKind::auc:
      return "auc";
    case ScoreKind::d_at_c:
      return "d_at_c";
    case ScoreKind::traj:
      return "traj";
    case ScoreKind::cond_lik:
      return "cond_lik";
  }
  return "?";
}

BenchConfig BenchConfig::choice_defaults() {
  BenchConfig c;
  c.compare.samples_per_input = 10;
  c.compare.max_tokens = 10;
  return c;
}

void BenchConfig::validate() const {
  compare.validate();
  if (score == ScoreKind::d_at_c && !(capacity && *capacity >= 0.0)) {
    throw InvalidInput("d_at_c score needs a capacity >= 0");
  }
  if (auc_cap && !(*auc_cap > 0.0 && std::isfinite(*auc_cap))) throw InvalidInput("auc_cap must be finite and > 0");
  if (workers == 0) throw InvalidInput("workers must be >= 1");
  if (!(failure_budget >= 0.0 && failure_budget <= 1.0)) throw InvalidInput("failure_budget must lie in [0, 1]");
}

double pair_similarity(std::string_view x1, std::string_view x2, const Backend& backend, const BenchConfig& config) {
  switch (config.score) {
    case ScoreKind::auc: {
      const auto r = compare(x1, x2, backend, config.compare);
      if (config.compare.c_max || !config.auc_cap || r.curve.c_max <= *config.auc_cap) return -r.auc;
      return -core::auc(r.curve.capacity_grid, r.curve.distance, *config.auc_cap);
    }
    case ScoreKind::d_at_c: {
      const auto r = compare(x1, x2, backend, config.compare);
      return -core::interpolate(r.curve.capacity_grid, r.curve.distance, *config.capacity);
    }
    case ScoreKind::traj:
      return -trajectory_distance(build_batch(x1, x2, backend, config.compare));
    case ScoreKind::cond_lik: {
      if (!config.compare.prompt) return cond_likelihood_score(x1, x2, backend);
      return cond_likelihood_score(x1, x2, *backend.with_prompt(config.compare.prompt));
    }
  }
  throw InvalidInput("unknown score kind");
}

SimilarityReport run_similarity_bench(std::span<const PairRecord> records, const Backend& backend,
                                      const BenchConfig& config) {
  if (records.empty()) throw InvalidInput("run_similarity_bench: no records");
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  SimilarityReport rep;
  rep.backend_id = backend.id();
  rep.config = config;
  rep.pairs.resize(records.size());
  parallel_for(records.size(), config.workers, [&](std::size_t k) {
    auto& out = rep.pairs[k];
    out.id = records[k].id;
    out.human = records[k].human_score;
    try {
      out.score = pair_similarity(records[k].text_a, records[k].text_b, backend, config);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  });

  std::vector<double> sims, humans;
  std::string first_error;
  for (const auto& p : rep.pairs) {
    if (p.score) {
      sims.push_back(*p.score);
      humans.push_back(p.human);
    } else {
      ++rep.failures;
      if (first_error.empty()) first_error = p.id + ": " + p.error;
    }
  }
  check_budget(rep.failures, records.size(), config.failure_budget, first_error);
  rep.rho = spearman(sims, humans);
  rep.rho_x100 = 100.0 * rep.rho;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

ChoiceReport run_choice_bench(std::span<const ChoiceRecord> records, const Backend& backend,
                              const BenchConfig& config) {
  if (records.empty()) throw InvalidInput("run_choice_bench: no records");
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  ChoiceReport rep;
  rep.backend_id = backend.id();
  rep.config = config;
  rep.records.resize(records.size());
  parallel_for(records.size(), config.workers, [&](std::size_t k) {
    auto& out = rep.records[k];
    out.id = records[k].id;
    try {
      out.positive_score = pair_similarity(records[k].context, records[k].positive, backend, config);
      out.negative_score = pair_similarity(records[k].context, records[k].negative, backend, config);
      out.credit = *out.positive_score > *out.negative_score    ? 1.0
                   : *out.positive_score == *out.negative_score ? 0.5
                                                                 : 0.0;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    if (!out.error.empty()) {
      out.positive_score.reset();
      out.negative_score.reset();
    }
  });

  double credit = 0.0;
  std::string first_error;
  for (const auto& r : rep.records) {
    if (r.error.empty()) {
      credit += r.credit;
    } else {
      ++rep.failures;
      if (first_error.empty()) first_error = r.id + ": " + r.error;
    }
  }
  check_budget(rep.failures, records.size(), config.failure_budget, first_error);
  const std::size_t scored = records.size() - rep.failures;
  if (scored == 0) throw BenchFailure("no record could be scored; first error: " + first_error);
  rep.accuracy = credit / static_cast<double>(scored);
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::string similarity_report_json(const SimilarityReport& r, Units units) {
  const double s = score_scale(r.config.score, units);
  json pairs = json::array();
  for (const auto& p : r.pairs) {
    json e = {{"id", p.id}, {"human", p.human}};
    e["score"] = p.score ? json(*p.score * s) : json(nullptr);
    if (!p.error.empty()) e["error"] = p.error;
    pairs.push_back(std::move(e));
  }
  json j = {{"kind", "pairs"},
            {"backend", r.backend_id},
            {"units", to_string(units)},
            {"config", config_json(r.config, units)},
            {"records", r.pairs.size()},
            {"failures", r.failures},
            {"spearman", r.rho},
            {"spearman_x100", r.rho_x100},
            {"wall_seconds", r.wall_seconds},
            {"pairs", std::move(pairs)}};
  return j.dump(2) + "\n";
}

std::string choice_report_json(const ChoiceReport& r, Units units) {
  const double s = score_scale(r.config.score, units);
  json recs = json::array();
  for (const auto& o : r.records) {
    json e = {{"id", o.id}};
    e["positive_score"] = o.positive_score ? json(*o.positive_score * s) : json(nullptr);
    e["negative_score"] = o.negative_score ? json(*o.negative_score * s) : json(nullptr);
    if (o.error.empty()) {
      e["credit"] = o.credit;
    } else {
      e["error"] = o.error;
    }
    recs.push_back(std::move(e));
  }
  json j = {{"kind", "choice"},
            {"backend", r.backend_id},
            {"units", to_string(units)},
            {"config", config_json(r.config, units)},
            {"records", r.records.size()},
            {"failures", r.failures},
            {"accuracy", r.accuracy},
            {"wall_seconds", r.wall_seconds},
            {"outcomes", std::move(recs)}};
  return j.dump(2) + "\n";
}

void write_scores_csv(std::ostream& out, const SimilarityReport& r, Units units) {
  const double s = score_scale(r.config.score, units);
  out << "id,score,human\n";
  for (const auto& p : r.pairs) {
    if (!p.score) continue;
    out << csv_field(p.id) << ',' << format_number(*p.score * s) << ',' << format_number(p.human) << '\n';
  }
}

void write_choice_csv(std::ostream& out, const ChoiceReport& r, Units units) {
  const double s = score_scale(r.config.score, units);
  out << "id,positive_score,negative_score,credit\n";
  for (const auto& o : r.records) {
    if (!o.error.empty()) continue;
    out << csv_field(o.id) << ',' << format_number(*o.positive_score * s) << ','
        << format_number(*o.negative_score * s) << ',' << format_number(o.credit) << '\n';
  }
}

}  // namespace ccdae

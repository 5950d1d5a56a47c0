#include "ccdae/descgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "ccdae/detail/logmath.hpp"
#include "ccdae/error.hpp"
#include "ccdae/oracle.hpp"
#include "ccdae/rng.hpp"

namespace ccdae {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string_view strip_bullet(std::string_view s) {
  for (std::string_view marker : {"•", "-", "*", "–"}) {
    if (s.starts_with(marker)) return trim(s.substr(marker.size()));
  }
  std::size_t k = 0;
  while (k < s.size() && k < 3 && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
  if (k > 0 && k < s.size() && (s[k] == '.' || s[k] == ')') && (k + 1 == s.size() || s[k + 1] == ' ')) {
    return trim(s.substr(k + 1));
  }
  return s;
}

bool ranks_before(const BeamEntry& a, const BeamEntry& b) {
  if (a.proxy_score != b.proxy_score) return a.proxy_score > b.proxy_score;
  return a.text < b.text;
}

std::unique_ptr<Backend> prompted(const Backend& backend, const std::optional<std::string>& prompt) {
  return backend.with_prompt(prompt && prompt->empty() ? std::nullopt : prompt);
}

class EntryScorer {
 public:
  EntryScorer(std::span<const Atom> atoms, std::string_view context, const ProxyScorer& scorer,
              const BeamConfig& config)
      : atoms_(atoms), context_(context), scorer_(scorer), config_(config) {
    if (atoms.empty()) throw InvalidInput("no atoms to compose");
    if (config.beam_width == 0) throw InvalidInput("beam_width must be >= 1");
    if (config.max_atoms == 0) throw InvalidInput("max_atoms must be >= 1");
    if (config.negative_prompt_penalty != 0.0 && !config.negative_prompt) {
      throw InvalidInput("negative_prompt_penalty needs a negative prompt");
    }
  }

  BeamEntry make(std::vector<std::size_t> used) const {
    BeamEntry e;
    for (std::size_t k = 0; k < used.size(); ++k) {
      if (k) e.text += config_.joiner;
      e.text += atoms_[used[k]].text;
    }
    e.atoms_used = std::move(used);
    return e;
  }

  // Scores every entry in place, concurrently.
  void score(std::vector<BeamEntry>& entries) const {
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto loop = [&] {
      try {
        for (std::size_t k = next++; k < entries.size(); k = next++) {
          auto& e = entries[k];
          e.proxy_score = scorer_(e.text, context_);
          if (config_.negative_prompt_penalty != 0.0) {
            e.proxy_score -= config_.negative_prompt_penalty * scorer_(e.text, *config_.negative_prompt);
          }
        }
      } catch (...) {
        // Keep the first failure and let the other workers drain.
        next = entries.size();
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    };
    const std::size_t threads = std::clamp<std::size_t>(config_.workers, 1, std::max<std::size_t>(entries.size(), 1));
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(loop);
      loop();
    }
    if (error) std::rethrow_exception(error);
  }

  std::vector<BeamEntry> top(std::vector<BeamEntry> entries) const {
    score(entries);
    std::sort(entries.begin(), entries.end(), ranks_before);
    if (entries.size() > config_.beam_width) entries.resize(config_.beam_width);
    return entries;
  }

  std::size_t atom_count() const { return atoms_.size(); }
  std::size_t max_length() const { return std::min(config_.max_atoms, atoms_.size()); }

 private:
  std::span<const Atom> atoms_;
  std::string_view context_;
  const ProxyScorer& scorer_;
  const BeamConfig& config_;
};

}  // namespace

const char* to_string(AtomSource s) noexcept {
  switch (s) {
    case AtomSource::sample_1:
      return "sample_1";
    case AtomSource::sample_2:
      return "sample_2";
    case AtomSource::ensemble:
      return "ensemble";
  }
  return "?";
}

std::vector<std::string> split_atoms(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    // A bullet glyph in mid-line also starts a new atom.
    std::string_view line = text.substr(start, nl - start);
    std::size_t from = 0;
    while (true) {
      const auto b = line.find("•", from == 0 ? 1 : from);
      const auto piece = strip_bullet(trim(line.substr(0, b)));
      if (!piece.empty()) out.emplace_back(piece);
      if (b == std::string_view::npos) break;
      line = line.substr(b);
      from = 1;
    }
    start = nl + 1;
  }
  return out;
}

std::vector<Atom> generate_atoms(const Backend& backend, std::string_view context, const AtomConfig& config,
                                 AtomSource source) {
  if (config.count == 0) throw InvalidInput("atom count must be >= 1");
  const auto be = prompted(backend, config.prompt ? config.prompt : std::optional<std::string>(kDefaultAtomPrompt));
  SampleRequest req;
  req.count = config.count;
  req.max_tokens = config.max_tokens;
  req.temperature = config.temperature;
  req.seed = mix_seed(config.seed, fnv1a(context));
  std::vector<Atom> out;
  std::set<std::string> seen;
  for (const auto& s : be->sample_descriptions(context, req)) {
    for (auto& a : split_atoms(s.text)) {
      if (out.size() < config.count && seen.insert(a).second) out.push_back({std::move(a), source});
    }
  }
  return out;
}

std::vector<Atom> generate_pair_atoms(const Backend& backend, std::string_view x1, std::string_view x2,
                                      const AtomConfig& config) {
  auto out = generate_atoms(backend, x1, config, AtomSource::sample_1);
  std::set<std::string> seen;
  for (const auto& a : out) seen.insert(a.text);
  auto add = [&](std::vector<Atom> more) {
    for (auto& a : more) {
      if (seen.insert(a.text).second) out.push_back(std::move(a));
    }
  };
  add(generate_atoms(backend, x2, config, AtomSource::sample_2));

  const auto be = prompted(backend, config.prompt ? config.prompt : std::optional<std::string>(kDefaultAtomPrompt));
  SampleRequest req;
  req.count = config.count;
  req.max_tokens = config.max_tokens;
  req.temperature = config.temperature;
  req.seed = mix_seed(config.seed, mix_seed(fnv1a(x1), fnv1a(x2)));
  try {
    std::vector<Atom> ens;
    for (const auto& s : be->ensemble_sample(x1, x2, req)) {
      for (auto& a : split_atoms(s.text)) ens.push_back({std::move(a), AtomSource::ensemble});
    }
    if (ens.size() > config.count) ens.resize(config.count);
    add(std::move(ens));
  } catch (const BackendError&) {
    // Backend has no token-level ensemble; the per-input atoms stand alone.
  }
  return out;
}

ProxyScorer encoder_proxy(const Backend& backend, std::optional<std::string> other) {
  return [&backend, other = std::move(other)](std::string_view description, std::string_view context) {
    const double lp = backend.cond_logprob(context, description, true).total;
    const double ref = other ? detail::log_mix_half(lp, backend.cond_logprob(*other, description, true).total)
                             : backend.code_logprob(description, true).total;
    return lp - ref;
  };
}

std::vector<std::vector<BeamEntry>> beam_compose(std::span<const Atom> atoms, std::string_view context,
                                                 const ProxyScorer& scorer, const BeamConfig& config) {
  const EntryScorer es(atoms, context, scorer, config);
  std::vector<std::vector<BeamEntry>> levels;
  std::vector<BeamEntry> cand;
  for (std::size_t a = 0; a < es.atom_count(); ++a) cand.push_back(es.make({a}));
  levels.push_back(es.top(std::move(cand)));
  while (levels.size() < es.max_length()) {
    std::set<std::vector<std::size_t>> seen;
    cand.clear();
    for (const auto& e : levels.back()) {
      for (std::size_t a = 0; a < es.atom_count(); ++a) {
        if (std::binary_search(e.atoms_used.begin(), e.atoms_used.end(), a)) continue;
        auto used = e.atoms_used;
        used.insert(std::upper_bound(used.begin(), used.end(), a), a);
        if (seen.insert(used).second) cand.push_back(es.make(std::move(used)));
      }
    }
    levels.push_back(es.top(std::move(cand)));
  }
  return levels;
}

std::vector<std::vector<BeamEntry>> exhaustive_compose(std::span<const Atom> atoms, std::string_view context,
                                                       const ProxyScorer& scorer, const BeamConfig& config) {
  const EntryScorer es(atoms, context, scorer, config);
  if (es.atom_count() > 20) throw InvalidInput("exhaustive_compose: too many atoms");
  std::vector<std::vector<BeamEntry>> cand(es.max_length());
  for (std::uint32_t mask = 1; mask < (1u << es.atom_count()); ++mask) {
    std::vector<std::size_t> used;
    for (std::size_t a = 0; a < es.atom_count(); ++a) {
      if (mask & (1u << a)) used.push_back(a);
    }
    if (used.size() <= es.max_length()) cand[used.size() - 1].push_back(es.make(std::move(used)));
  }
  std::vector<std::vector<BeamEntry>> levels;
  for (auto& c : cand) levels.push_back(es.top(std::move(c)));
  return levels;
}

void fill_code_lengths(std::vector<std::vector<BeamEntry>>& levels, const Backend& backend) {
  for (auto& level : levels) {
    for (auto& e : level) e.code_length = -backend.code_logprob(e.text, true).total;
  }
}

std::vector<ScoredDescription> score_descriptions(std::span<const std::string> texts, std::string_view x1,
                                                  std::string_view x2, const Backend& backend,
                                                  const CompareConfig& config) {
  const auto be = backend.with_prompt(config.prompt ? config.prompt : backend.prompt());
  std::vector<std::string> unique;
  std::set<std::string> seen;
  for (const auto& t : texts) {
    if (seen.insert(t).second) unique.push_back(t);
  }
  const std::array<std::string, 2> xs{std::string(x1), std::string(x2)};
  std::vector<DescriptionQuery> q;
  for (const auto& t : unique) {
    for (const auto& x : xs) {
      q.push_back(config.loss_mode == LossMode::encoder_only ? DescriptionQuery{x, t, true}
                                                             : DescriptionQuery{t, x, true});
    }
  }
  const auto cond = be->cond_logprob_many(q);
  std::vector<ScoredDescription> out;
  for (std::size_t j = 0; j < unique.size(); ++j) {
    ScoredDescription d;
    d.text = unique[j];
    d.code_length = -be->code_logprob(d.text, true).total;
    const auto& r1 = cond[2 * j];
    const auto& r2 = cond[2 * j + 1];
    const double log_pi = detail::log_mix_half(r1.total, r2.total);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto& r = i == 0 ? r1 : r2;
      double l = config.loss_mode == LossMode::encoder_only ? log_pi - r.total : -r.total;
      if (config.length_normalize && !r.per_token.empty()) l /= static_cast<double>(r.per_token.size());
      d.loss[i] = l;
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<double> description_capacity_grid(std::span<const ScoredDescription> entries) {
  std::vector<double> g{0.0};
  for (const auto& e : entries) g.push_back(e.code_length);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

DescriptionCurve best_single_description_curve(std::vector<ScoredDescription> entries,
                                               std::span<const double> capacity_grid) {
  if (entries.empty()) throw InvalidInput("best_single_description_curve: no entries");
  oracle::FiniteHypothesisTable table;
  table.loss.resize(3);
  for (const auto& e : entries) {
    if (!std::isfinite(e.code_length) || !std::isfinite(e.loss[0]) || !std::isfinite(e.loss[1])) {
      throw InvalidInput("best_single_description_curve: non-finite score for '" + e.text + "'");
    }
    table.labels.push_back(e.text);
    table.code_lengths.push_back(e.code_length);
    table.loss[0].push_back(e.loss[0]);
    table.loss[1].push_back(e.loss[1]);
    table.loss[2].push_back(e.loss[0] + e.loss[1]);
  }
  DescriptionCurve out;
  for (double c : capacity_grid) {
    DescriptionCurveRow row;
    row.capacity = c;
    for (std::size_t s = 0; s < 3; ++s) {
      try {
        const auto j = oracle::solve_discrete_description(table, s, c);
        row.best[s] = j;
        row.loss[s] = table.loss[s][j];
      } catch (const NoFeasibleDescription&) {
        row.loss[s] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    out.rows.push_back(row);
  }
  out.entries = std::move(entries);
  return out;
}

void write_description_curve_csv(std::ostream& out, const DescriptionCurve& curve, Units units) {
  const double s = unit_scale(units);
  auto field = [](const std::string& t) {
    if (t.find_first_of(",\"\n\r") == std::string::npos) return t;
    std::string q = "\"";
    for (char c : t) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  out << "capacity,best_h_x1,loss_x1,best_h_x2,loss_x2,best_common,loss_common\n";
  for (const auto& row : curve.rows) {
    out << format_number(row.capacity * s);
    for (std::size_t k = 0; k < 3; ++k) {
      out << ',';
      if (row.best[k]) out << field(curve.entries[*row.best[k]].text) << ',' << format_number(row.loss[k] * s);
      else out << ',';
    }
    out << '\n';
  }
}

}  // namespace ccdae

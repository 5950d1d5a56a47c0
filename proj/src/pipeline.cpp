#include "ccdae/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "ccdae/detail/logmath.hpp"
#include "ccdae/error.hpp"
#include "ccdae/rng.hpp"

namespace ccdae {

const char* to_string(PcodeMode mode) noexcept {
  return mode == PcodeMode::proposal_mix ? "proposal_mix" : "lm_code";
}

PcodeMode parse_pcode_mode(std::string_view name) {
  if (name == "proposal_mix") return PcodeMode::proposal_mix;
  if (name == "lm_code") return PcodeMode::lm_code;
  throw InvalidInput("unknown pcode mode '" + std::string(name) + "' (expected proposal_mix or lm_code)");
}

LossMode parse_loss_mode(std::string_view name) {
  if (name == "encoder_only") return LossMode::encoder_only;
  if (name == "generative") return LossMode::generative;
  throw InvalidInput("unknown loss mode '" + std::string(name) + "' (expected encoder_only or generative)");
}

void CompareConfig::validate() const {
  if (samples_per_input < 1) throw InvalidInput("samples_per_input must be >= 1");
  if (max_tokens < 1) throw InvalidInput("max_tokens must be >= 1");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidInput("temperature must be > 0");
  if (capacity_grid_size < 2) throw InvalidInput("capacity_grid_size must be >= 2");
  if (!(explain_lambda >= 0.0) || !std::isfinite(explain_lambda)) throw InvalidInput("explain_lambda must be >= 0");
  if (lambda_grid.empty()) throw InvalidInput("lambda grid is empty");
  for (std::size_t k = 0; k < lambda_grid.size(); ++k) {
    if (!std::isfinite(lambda_grid[k]) || lambda_grid[k] < 0.0) throw InvalidInput("lambda grid must be finite and >= 0");
    if (k > 0 && !(lambda_grid[k] > lambda_grid[k - 1])) throw InvalidInput("lambda grid must be strictly increasing");
  }
  if (c_max && (!std::isfinite(*c_max) || *c_max <= 0.0)) throw InvalidInput("c_max must be positive");
}

namespace {

struct Pooled {
  SampledDescription first;
  std::uint32_t multiplicity = 0;
};

double normalized(double loss, std::size_t tokens, bool enabled) {
  return enabled && tokens > 0 ? loss / static_cast<double>(tokens) : loss;
}

}  // namespace

ScoredBatch build_batch(std::string_view x1, std::string_view x2, const Backend& backend,
                        const CompareConfig& config) {
  config.validate();
  std::unique_ptr<Backend> prompted;
  const Backend* be = &backend;
  if (config.prompt && config.prompt != backend.prompt()) {
    prompted = backend.with_prompt(config.prompt);
    be = prompted.get();
  }

  // Canonical order: by content hash, content as tie-break.
  const std::uint64_t h1 = fnv1a(x1);
  const std::uint64_t h2 = fnv1a(x2);
  const bool swap = h2 < h1 || (h2 == h1 && x2 < x1);
  const std::array<std::string_view, 2> canon = swap ? std::array{x2, x1} : std::array{x1, x2};

  std::vector<Pooled> pool;
  std::map<std::pair<std::string, bool>, std::size_t> index;
  for (std::size_t k = 0; k < 2; ++k) {
    SampleRequest req;
    req.count = config.samples_per_input;
    req.max_tokens = config.max_tokens;
    req.temperature = config.temperature;
    req.seed = mix_seed(mix_seed(config.seed, k), fnv1a(canon[k]));
    for (auto& d : be->sample_descriptions(canon[k], req)) {
      auto key = std::make_pair(d.text, d.terminated);
      const auto [it, inserted] = index.emplace(std::move(key), pool.size());
      if (inserted) pool.push_back({std::move(d), 0});
      ++pool[it->second].multiplicity;
    }
  }

  // Conditional log-probs of every pooled description under both inputs.
  std::vector<DescriptionQuery> queries;
  queries.reserve(2 * pool.size());
  for (const auto& p : pool) {
    for (std::size_t k = 0; k < 2; ++k) queries.push_back({std::string(canon[k]), p.first.text, p.first.terminated});
  }
  const auto cond = be->cond_logprob_many(queries);

  std::vector<LogProbResult> recon;
  if (config.loss_mode == LossMode::generative) {
    std::vector<DescriptionQuery> gq;
    gq.reserve(2 * pool.size());
    for (const auto& p : pool) {
      for (std::size_t k = 0; k < 2; ++k) gq.push_back({p.first.text, std::string(canon[k]), true});
    }
    recon = be->cond_logprob_many(gq);
  }

  std::vector<Hypothesis> hyps;
  hyps.reserve(pool.size());
  std::array<std::vector<double>, 2> loss;
  for (std::size_t j = 0; j < pool.size(); ++j) {
    const auto& p = pool[j];
    // Indexed by canonical position.
    const std::array<double, 2> lc{cond[2 * j].total, cond[2 * j + 1].total};
    const double log_pi = detail::log_mix_half(lc[0], lc[1]);

    Hypothesis h;
    h.tokens = p.first.tokens;
    h.text = p.first.text;
    h.terminated = p.first.terminated;
    h.multiplicity = p.multiplicity;
    h.log_proposal = log_pi;
    h.log_pcode = config.pcode_mode == PcodeMode::proposal_mix ? log_pi
                                                                : be->code_logprob(h.text, h.terminated).total;
    const std::size_t first = swap ? 1 : 0;
    h.log_cond = std::array{lc[first], lc[1 - first]};

    for (std::size_t i = 0; i < 2; ++i) {
      const std::size_t c = swap ? 1 - i : i;
      double l;
      if (config.loss_mode == LossMode::encoder_only) {
        l = normalized(log_pi - lc[c], cond[2 * j + c].per_token.size(), config.length_normalize);
      } else {
        const auto& r = recon[2 * j + c];
        l = normalized(-r.total, r.per_token.size(), config.length_normalize);
      }
      loss[i].push_back(l);
    }
    hyps.push_back(std::move(h));
  }
  return ScoredBatch::build(std::move(hyps), std::move(loss), config.loss_mode);
}

Explanation explain(const ScoredBatch& batch, double lambda) {
  if (!(lambda >= 0.0)) throw InvalidInput("explain: lambda must be >= 0");
  const auto q1 = core::gibbs_weights(batch, lambda, SampleIndex::first);
  const auto q2 = core::gibbs_weights(batch, lambda, SampleIndex::second);
  const auto hyps = batch.hypotheses();
  const std::size_t n = hyps.size();
  std::vector<double> qi(n);
  for (std::size_t j = 0; j < n; ++j) qi[j] = 0.5 * (q1[j] + q2[j]);

  auto ranked = [&](const std::vector<double>& w) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (w[a] != w[b]) return w[a] > w[b];
      return hyps[a].text < hyps[b].text;
    });
    std::vector<RankedDescription> out;
    out.reserve(n);
    for (std::size_t j : order) out.push_back({hyps[j].text, w[j]});
    return out;
  };

  Explanation e;
  e.lambda = lambda;
  e.shared = ranked(qi);
  std::vector<double> d1(n), d2(n);
  for (std::size_t j = 0; j < n; ++j) {
    d1[j] = q1[j] - qi[j];
    d2[j] = q2[j] - qi[j];
  }
  e.distinctive = {ranked(d1), ranked(d2)};
  return e;
}

Diagnostics diagnose(const ScoredBatch& batch, std::span<const double> lambda_grid) {
  if (lambda_grid.empty()) throw InvalidInput("diagnose: empty lambda grid");
  Diagnostics d;
  d.hypotheses = batch.size();
  d.draws = static_cast<std::size_t>(batch.total_multiplicity());
  d.dropped = batch.dropped();
  for (std::size_t i = 0; i < 2; ++i) {
    const auto s = static_cast<SampleIndex>(i);
    d.ess_lambda_min[i] = core::effective_sample_size(core::gibbs_weights(batch, lambda_grid.front(), s));
    d.ess_lambda_max[i] = core::effective_sample_size(core::gibbs_weights(batch, lambda_grid.back(), s));
    for (const auto& [ess, lam] : {std::pair{d.ess_lambda_min[i], lambda_grid.front()},
                                  std::pair{d.ess_lambda_max[i], lambda_grid.back()}}) {
      if (ess < kEssWarningThreshold) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "low effective sample size %.3g for x%zu at lambda=%g", ess, i + 1, lam);
        d.warnings.emplace_back(buf);
      }
    }
  }
  if (d.dropped > 0) d.warnings.push_back(std::to_string(d.dropped) + " hypotheses dropped for non-finite scores");
  return d;
}

namespace {

void truncate(std::vector<RankedDescription>& v, std::size_t k) {
  if (k > 0 && v.size() > k) v.resize(k);
}

DistanceReport run(std::string_view x1, std::string_view x2, const Backend& backend, const CompareConfig& config,
                   bool cross_modal) {
  const ScoredBatch batch = build_batch(x1, x2, backend, config);
  DistanceReport r;
  r.x1 = std::string(x1);
  r.x2 = std::string(x2);
  r.backend_id = backend.id();
  r.config = config;
  r.cross_modal = cross_modal;
  DistanceOptions opt;
  opt.capacity_grid_size = config.capacity_grid_size;
  opt.c_max = config.c_max;
  r.curve = core::distance_curve(batch, config.lambda_grid, opt);
  r.auc = r.curve.auc;
  r.explanation = explain(batch, config.explain_lambda);
  truncate(r.explanation.shared, config.explain_top_k);
  for (auto& d : r.explanation.distinctive) truncate(d, config.explain_top_k);
  r.diagnostics = diagnose(batch, config.lambda_grid);
  return r;
}

}  // namespace

DistanceReport compare(std::string_view x1, std::string_view x2, const Backend& backend,
                       const CompareConfig& config) {
  return run(x1, x2, backend, config, false);
}

DistanceReport cross_modal_compare(std::string_view x_text, std::string_view x_other, const Backend& backend,
                                   const CompareConfig& config) {
  return run(x_text, x_other, backend, config, true);
}

}  // namespace ccdae

#include "ccdae/table_backend.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "ccdae/error.hpp"
#include "ccdae/rng.hpp"

namespace ccdae {

namespace {

using json = nlohmann::json;

TableBackend::Row parse_row(const json& j, const std::string& where) {
  if (!j.is_object()) throw InvalidInput("table fixture: '" + where + "' must be an object");
  TableBackend::Row row;
  for (const auto& [desc, v] : j.items()) {
    if (!v.is_number()) throw InvalidInput("table fixture: non-numeric log-prob at " + where + "/" + desc);
    const double lp = v.get<double>();
    if (std::isnan(lp) || lp > 0.0) throw InvalidInput("table fixture: log-prob must be <= 0 at " + where + "/" + desc);
    row.emplace(desc, lp);
  }
  return row;
}

std::vector<SampledDescription> draw_from(const std::vector<std::pair<std::string, double>>& entries,
                                          const SampleRequest& req) {
  if (req.count < 1) throw InvalidInput("sample: count must be >= 1");
  if (req.max_tokens < 1) throw InvalidInput("sample: max_tokens must be >= 1");
  if (!(req.temperature > 0.0)) throw InvalidInput("sample: temperature must be > 0");
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& e : entries) m = std::max(m, e.second / req.temperature);
  if (!std::isfinite(m)) throw BackendError("table fixture: no finite-probability descriptions to sample");
  std::vector<double> w;
  w.reserve(entries.size());
  for (const auto& e : entries) w.push_back(std::exp(e.second / req.temperature - m));

  std::mt19937_64 rng(req.seed);
  std::vector<SampledDescription> out;
  out.reserve(req.count);
  for (std::size_t s = 0; s < req.count; ++s) {
    const auto& [text, lp] = entries[draw_index(rng, w)];
    SampledDescription d;
    d.text = text;
    for (unsigned char c : text) d.tokens.push_back(c);
    if (d.tokens.empty()) d.tokens.push_back(-1);
    d.per_token = {lp};
    d.terminated = true;
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

TableBackend::TableBackend(std::map<std::string, Row, std::less<>> conditional, Row unconditional)
    : conditional_(std::move(conditional)), unconditional_(std::move(unconditional)) {}

TableBackend TableBackend::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("table fixture: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("conditional")) {
    throw InvalidInput("table fixture: missing 'conditional' object");
  }
  std::map<std::string, Row, std::less<>> cond;
  const auto& c = doc.at("conditional");
  if (!c.is_object()) throw InvalidInput("table fixture: 'conditional' must be an object");
  for (const auto& [ctx, row] : c.items()) cond.emplace(ctx, parse_row(row, "conditional/" + ctx));
  Row uncond;
  if (doc.contains("unconditional")) uncond = parse_row(doc.at("unconditional"), "unconditional");
  return TableBackend(std::move(cond), std::move(uncond));
}

TableBackend TableBackend::load_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open table fixture: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  auto t = from_json(ss.str());
  t.source_ = path;
  return t;
}

std::string TableBackend::id() const { return "table(" + source_ + ")"; }

std::unique_ptr<Backend> TableBackend::with_prompt(std::optional<std::string> prompt) const {
  auto copy = std::make_unique<TableBackend>(*this);
  copy->prompt_ = std::move(prompt);
  return copy;
}

const TableBackend::Row& TableBackend::row(std::string_view context) const {
  const auto it = conditional_.find(context);
  if (it == conditional_.end()) throw BackendError("table fixture: unknown context '" + std::string(context) + "'");
  return it->second;
}

LogProbResult TableBackend::cond_logprob(std::string_view context, std::string_view description, bool) const {
  const Row& r = row(context);
  const auto it = r.find(description);
  if (it == r.end()) {
    throw BackendError("table fixture: no entry for description '" + std::string(description) + "' under context '" +
                       std::string(context) + "'");
  }
  return LogProbResult{it->second, {it->second}};
}

LogProbResult TableBackend::code_logprob(std::string_view description, bool) const {
  const auto it = unconditional_.find(description);
  if (it == unconditional_.end()) {
    throw BackendError("table fixture: no unconditional entry for '" + std::string(description) + "'");
  }
  return LogProbResult{it->second, {it->second}};
}

std::vector<SampledDescription> TableBackend::sample_descriptions(std::string_view context,
                                                                  const SampleRequest& request) const {
  const Row& r = row(context);
  return draw_from({r.begin(), r.end()}, request);
}

std::vector<SampledDescription> TableBackend::ensemble_sample(std::string_view context_a, std::string_view context_b,
                                                              const SampleRequest& request) const {
  const Row& a = row(context_a);
  const Row& b = row(context_b);
  std::vector<std::pair<std::string, double>> entries;
  for (const auto& [desc, la] : a) {
    const auto it = b.find(desc);
    if (it != b.end()) entries.emplace_back(desc, 0.5 * (la + it->second));
  }
  if (entries.empty()) throw BackendError("table fixture: contexts share no descriptions");
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& e : entries) m = std::max(m, e.second);
  double s = 0.0;
  for (const auto& e : entries) s += std::exp(e.second - m);
  const double lz = m + std::log(s);
  for (auto& e : entries) e.second -= lz;
  return draw_from(entries, request);
}

}  // namespace ccdae

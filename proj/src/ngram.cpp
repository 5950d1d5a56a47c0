#include "ccdae/ngram.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "ccdae/detail/logmath.hpp"
#include "ccdae/error.hpp"
#include "ccdae/rng.hpp"

namespace ccdae {

namespace {

constexpr std::string_view kMagic = "CCDAE-NGRAM";
constexpr int kFormatVersion = 1;

std::string to_hex(std::string_view s) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * s.size());
  for (unsigned char c : s) {
    out.push_back(digits[c >> 4]);
    out.push_back(digits[c & 15]);
  }
  return out;
}

std::string from_hex(std::string_view s) {
  if (s.size() % 2 != 0) throw InvalidInput("ngram model: odd-length hex field");
  std::string out;
  out.reserve(s.size() / 2);
  for (std::size_t k = 0; k < s.size(); k += 2) {
    unsigned v = 0;
    const auto r = std::from_chars(s.data() + k, s.data() + k + 2, v, 16);
    if (r.ec != std::errc{} || r.ptr != s.data() + k + 2) throw InvalidInput("ngram model: bad hex field");
    out.push_back(static_cast<char>(v));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(std::string_view s, const char* what) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
    throw InvalidInput(std::string("ngram model: bad ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

std::string expect_keyword(std::istream& in, std::string_view key) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("ngram model: truncated before '" + std::string(key) + "'");
  if (line.size() < key.size() + 1 || line.compare(0, key.size(), key) != 0 || line[key.size()] != ' ') {
    throw InvalidInput("ngram model: expected '" + std::string(key) + "'");
  }
  return line.substr(key.size() + 1);
}

}  // namespace

NGramModel NGramModel::train(std::string_view corpus, int order, double alpha) {
  if (corpus.empty()) throw InvalidInput("train_ngram: empty corpus");
  if (order < 1) throw InvalidInput("train_ngram: order must be >= 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("train_ngram: alpha must be positive");

  NGramModel m;
  m.order_ = order;
  m.alpha_ = alpha;
  std::array<bool, 256> seen{};
  for (unsigned char c : corpus) seen[c] = true;
  for (int b = 0; b < 256; ++b) {
    if (seen[b]) m.bytes_.push_back(static_cast<unsigned char>(b));
  }
  m.finalize_vocab();

  std::unordered_map<std::string, std::map<Symbol, std::uint32_t>> counts;
  const std::size_t n = corpus.size();
  const std::size_t max_ctx = static_cast<std::size_t>(order - 1);
  for (std::size_t t = 0; t <= n; ++t) {
    const Symbol target = t < n ? m.symbol_of(static_cast<unsigned char>(corpus[t])) : m.eos();
    const std::size_t kmax = std::min(max_ctx, t);
    for (std::size_t k = 0; k <= kmax; ++k) {
      ++counts[std::string(corpus.substr(t - k, k))][target];
    }
  }
  m.contexts_.reserve(counts.size());
  for (auto& [ctx, per_symbol] : counts) {
    Context c;
    c.counts.assign(per_symbol.begin(), per_symbol.end());
    for (const auto& [sym, cnt] : c.counts) c.total += cnt;
    m.contexts_.emplace(ctx, std::move(c));
  }
  return m;
}

void NGramModel::finalize_vocab() {
  byte_to_symbol_.fill(unk());
  for (std::size_t k = 0; k < bytes_.size(); ++k) byte_to_symbol_[bytes_[k]] = static_cast<Symbol>(k);
}

const NGramModel::Context& NGramModel::lookup(std::string_view history) const {
  const std::size_t kmax = std::min(history.size(), static_cast<std::size_t>(order_ - 1));
  std::string key;
  for (std::size_t k = kmax + 1; k-- > 0;) {
    key.assign(history.substr(history.size() - k));
    const auto it = contexts_.find(key);
    if (it != contexts_.end()) return it->second;
  }
  // The empty context always exists for a trained model.
  return contexts_.at(std::string());
}

std::vector<double> NGramModel::next_logprobs(std::string_view history) const {
  const Context& c = lookup(history);
  const double v = static_cast<double>(vocab_size());
  const double denom = static_cast<double>(c.total) + alpha_ * v;
  std::vector<double> out(vocab_size(), std::log(alpha_ / denom));
  for (const auto& [sym, cnt] : c.counts) out[static_cast<std::size_t>(sym)] = std::log((cnt + alpha_) / denom);
  return out;
}

double NGramModel::next_logprob(std::string_view history, Symbol next) const {
  if (next < 0 || static_cast<std::size_t>(next) >= vocab_size()) throw InvalidInput("ngram: symbol out of range");
  const Context& c = lookup(history);
  const double denom = static_cast<double>(c.total) + alpha_ * static_cast<double>(vocab_size());
  const auto it = std::lower_bound(c.counts.begin(), c.counts.end(), next,
                                   [](const auto& e, Symbol s) { return e.first < s; });
  const double cnt = (it != c.counts.end() && it->first == next) ? it->second : 0.0;
  return std::log((cnt + alpha_) / denom);
}

void NGramModel::save(std::ostream& out) const {
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "order " << order_ << '\n';
  out << "alpha " << format_double(alpha_) << '\n';
  out << "vocab " << to_hex(std::string_view(reinterpret_cast<const char*>(bytes_.data()), bytes_.size())) << '\n';
  out << "contexts " << contexts_.size() << '\n';
  std::vector<const std::pair<const std::string, Context>*> sorted;
  sorted.reserve(contexts_.size());
  for (const auto& e : contexts_) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->first < b->first; });
  for (const auto* e : sorted) {
    out << (e->first.empty() ? "-" : to_hex(e->first));
    for (const auto& [sym, cnt] : e->second.counts) out << ' ' << sym << ':' << cnt;
    out << '\n';
  }
  if (!out) throw std::runtime_error("ngram model: write failed");
}

void NGramModel::save_file(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  save(f);
}

NGramModel NGramModel::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw InvalidInput("ngram model: empty input");
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  hs >> magic >> version;
  if (magic != kMagic) throw InvalidInput("ngram model: bad magic header");
  if (version != kFormatVersion) throw InvalidInput("ngram model: unsupported version " + std::to_string(version));

  NGramModel m;
  m.order_ = parse_number<int>(expect_keyword(in, "order"), "order");
  if (m.order_ < 1) throw InvalidInput("ngram model: order must be >= 1");
  m.alpha_ = parse_number<double>(expect_keyword(in, "alpha"), "alpha");
  if (!(m.alpha_ > 0.0)) throw InvalidInput("ngram model: alpha must be positive");
  const std::string vocab = from_hex(expect_keyword(in, "vocab"));
  m.bytes_.assign(vocab.begin(), vocab.end());
  if (!std::is_sorted(m.bytes_.begin(), m.bytes_.end()) ||
      std::adjacent_find(m.bytes_.begin(), m.bytes_.end()) != m.bytes_.end()) {
    throw InvalidInput("ngram model: vocabulary must be sorted and unique");
  }
  m.finalize_vocab();
  const auto n = parse_number<std::size_t>(expect_keyword(in, "contexts"), "context count");

  const auto vocab_size = static_cast<Symbol>(m.vocab_size());
  std::string line;
  m.contexts_.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::getline(in, line)) throw InvalidInput("ngram model: truncated context table");
    std::string_view rest(line);
    const auto sp = rest.find(' ');
    const std::string_view key_field = rest.substr(0, sp);
    std::string key = key_field == "-" ? std::string() : from_hex(key_field);
    if (key.size() >= static_cast<std::size_t>(m.order_)) throw InvalidInput("ngram model: context longer than order");
    Context c;
    rest = sp == std::string_view::npos ? std::string_view() : rest.substr(sp + 1);
    while (!rest.empty()) {
      const auto next_sp = rest.find(' ');
      const std::string_view item = rest.substr(0, next_sp);
      const auto colon = item.find(':');
      if (colon == std::string_view::npos) throw InvalidInput("ngram model: bad count entry");
      const auto sym = parse_number<Symbol>(item.substr(0, colon), "symbol");
      const auto cnt = parse_number<std::uint32_t>(item.substr(colon + 1), "count");
      if (sym < 0 || sym >= vocab_size) throw InvalidInput("ngram model: symbol out of range");
      if (!c.counts.empty() && c.counts.back().first >= sym) throw InvalidInput("ngram model: unsorted counts");
      c.counts.emplace_back(sym, cnt);
      c.total += cnt;
      rest = next_sp == std::string_view::npos ? std::string_view() : rest.substr(next_sp + 1);
    }
    if (!m.contexts_.emplace(std::move(key), std::move(c)).second) throw InvalidInput("ngram model: duplicate context");
  }
  if (m.contexts_.find(std::string()) == m.contexts_.end()) throw InvalidInput("ngram model: missing empty context");
  return m;
}

NGramModel NGramModel::load_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open ngram model: " + path);
  return load(f);
}

NGramBackend::NGramBackend(NGramModel model, std::optional<std::string> prompt, std::string separator)
    : NGramBackend(std::make_shared<const NGramModel>(std::move(model)), std::move(prompt), std::move(separator)) {}

NGramBackend::NGramBackend(std::shared_ptr<const NGramModel> model, std::optional<std::string> prompt,
                           std::string separator)
    : model_(std::move(model)), separator_(std::move(separator)) {
  if (!model_) throw InvalidInput("ngram backend: null model");
  prompt_ = std::move(prompt);
}

std::unique_ptr<Backend> NGramBackend::with_prompt(std::optional<std::string> prompt) const {
  return std::make_unique<NGramBackend>(model_, std::move(prompt), separator_);
}

std::string NGramBackend::id() const {
  return "ngram(order=" + std::to_string(model_->order()) + ",alpha=" + format_double(model_->alpha()) +
         ",vocab=" + std::to_string(model_->vocab_size()) + ")";
}

std::string NGramBackend::conditioning_prefix(std::string_view context) const {
  std::string prefix;
  if (prompt_) {
    prefix += *prompt_;
    prefix += '\n';
  }
  prefix += context;
  prefix += separator_;
  return prefix;
}

LogProbResult NGramBackend::score(std::string history, std::string_view description, bool terminated) const {
  if (description.empty() && !terminated) throw InvalidInput("cond_logprob: empty description");
  LogProbResult r;
  r.per_token.reserve(description.size() + 1);
  for (unsigned char c : description) {
    r.per_token.push_back(model_->next_logprob(history, model_->symbol_of(c)));
    history.push_back(static_cast<char>(c));
  }
  if (terminated) r.per_token.push_back(model_->next_logprob(history, model_->eos()));
  for (double v : r.per_token) r.total += v;
  return r;
}

LogProbResult NGramBackend::cond_logprob(std::string_view context, std::string_view description,
                                         bool terminated) const {
  return score(conditioning_prefix(context), description, terminated);
}

LogProbResult NGramBackend::code_logprob(std::string_view description, bool terminated) const {
  return score(std::string(), description, terminated);
}

namespace {

void check_request(const SampleRequest& req) {
  if (req.count < 1) throw InvalidInput("sample: count must be >= 1");
  if (req.max_tokens < 1) throw InvalidInput("sample: max_tokens must be >= 1");
  if (!(req.temperature > 0.0)) throw InvalidInput("sample: temperature must be > 0");
}

// Draws one symbol from exp(logp / T); UNK is never emitted since it has no
// surface form.
NGramModel::Symbol draw_symbol(std::mt19937_64& rng, const std::vector<double>& logp, double temperature,
                               NGramModel::Symbol unk) {
  std::vector<double> w(logp.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < logp.size(); ++k) {
    if (static_cast<NGramModel::Symbol>(k) != unk) m = std::max(m, logp[k] / temperature);
  }
  for (std::size_t k = 0; k < logp.size(); ++k) {
    w[k] = static_cast<NGramModel::Symbol>(k) == unk ? 0.0 : std::exp(logp[k] / temperature - m);
  }
  return static_cast<NGramModel::Symbol>(draw_index(rng, w));
}

template <class NextFn>
std::vector<SampledDescription> sample_with(const NGramModel& model, const SampleRequest& req, NextFn&& next) {
  check_request(req);
  std::mt19937_64 rng(req.seed);
  std::vector<SampledDescription> out;
  out.reserve(req.count);
  for (std::size_t s = 0; s < req.count; ++s) {
    SampledDescription d;
    while (d.tokens.size() < req.max_tokens) {
      const std::vector<double> logp = next(d.text);
      const auto sym = draw_symbol(rng, logp, req.temperature, model.unk());
      d.tokens.push_back(sym);
      d.per_token.push_back(logp[static_cast<std::size_t>(sym)]);
      if (sym == model.eos()) {
        d.terminated = true;
        break;
      }
      d.text.push_back(static_cast<char>(model.byte_of(sym)));
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace

std::vector<SampledDescription> NGramBackend::sample_descriptions(std::string_view context,
                                                                  const SampleRequest& request) const {
  const std::string prefix = conditioning_prefix(context);
  std::string history;
  return sample_with(*model_, request, [&](const std::string& text) {
    history.assign(prefix);
    history += text;
    return model_->next_logprobs(history);
  });
}

std::vector<SampledDescription> NGramBackend::ensemble_sample(std::string_view context_a, std::string_view context_b,
                                                              const SampleRequest& request) const {
  const std::string prefix_a = conditioning_prefix(context_a);
  const std::string prefix_b = conditioning_prefix(context_b);
  std::string ha, hb;
  return sample_with(*model_, request, [&](const std::string& text) {
    ha.assign(prefix_a);
    ha += text;
    hb.assign(prefix_b);
    hb += text;
    auto a = model_->next_logprobs(ha);
    if (prefix_a == prefix_b) return a;
    const auto b = model_->next_logprobs(hb);
    std::vector<double> mean(a.size());
    for (std::size_t k = 0; k < a.size(); ++k) mean[k] = 0.5 * (a[k] + b[k]);
    const double lz = detail::log_sum_exp(mean);
    for (double& v : mean) v -= lz;
    return mean;
  });
}

}  // namespace ccdae

#include "ccdae/remote_backend.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ccdae/error.hpp"

namespace ccdae {

namespace {

using json = nlohmann::json;

struct ParsedEndpoint {
  std::string origin;  // scheme://host[:port]
  std::string base_path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  constexpr std::string_view scheme = "http://";
  if (endpoint.rfind(scheme, 0) != 0) {
    throw InvalidInput("remote backend: endpoint must start with http:// (got '" + endpoint + "')");
  }
  const auto slash = endpoint.find('/', scheme.size());
  ParsedEndpoint p;
  p.origin = endpoint.substr(0, slash);
  if (p.origin.size() == scheme.size()) throw InvalidInput("remote backend: endpoint has no host");
  if (slash != std::string::npos) {
    p.base_path = endpoint.substr(slash);
    while (!p.base_path.empty() && p.base_path.back() == '/') p.base_path.pop_back();
  }
  return p;
}

std::vector<double> read_logprobs(const json& j, const std::string& endpoint) {
  if (!j.is_array()) throw BackendError("remote backend: per_token_logprobs is not a list", false, endpoint);
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw BackendError("remote backend: non-numeric log-prob", false, endpoint);
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

struct RemoteBackend::Impl {
  explicit Impl(std::ptrdiff_t slots) : in_flight(slots) {}

  ParsedEndpoint target;
  std::counting_semaphore<> in_flight;
};

RemoteBackend::RemoteBackend(std::string endpoint, RemoteOptions options, std::optional<std::string> prompt)
    : endpoint_(std::move(endpoint)), options_(options) {
  if (options_.max_in_flight < 1) throw InvalidInput("remote backend: max_in_flight must be >= 1");
  if (options_.max_attempts < 1) throw InvalidInput("remote backend: max_attempts must be >= 1");
  if (options_.timeout.count() <= 0) throw InvalidInput("remote backend: timeout must be positive");
  impl_ = std::make_shared<Impl>(static_cast<std::ptrdiff_t>(options_.max_in_flight));
  impl_->target = parse_endpoint(endpoint_);
  prompt_ = std::move(prompt);
}

RemoteBackend::~RemoteBackend() = default;

std::string RemoteBackend::id() const { return "remote(" + endpoint_ + ")"; }

std::unique_ptr<Backend> RemoteBackend::with_prompt(std::optional<std::string> prompt) const {
  auto copy = std::unique_ptr<RemoteBackend>(new RemoteBackend(*this));
  copy->prompt_ = std::move(prompt);
  return copy;
}

namespace {

json post_json(const ParsedEndpoint& target, std::counting_semaphore<>& slots, const RemoteOptions& opt,
               const std::string& endpoint, const std::string& path, const json& body) {
  const std::string payload = body.dump();
  const std::string full_path = target.base_path + path;
  auto backoff = opt.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    std::string failure;
    int status = 0;
    bool retryable = true;
    {
      slots.acquire();
      httplib::Client cli(target.origin);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(opt.timeout);
      const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(opt.timeout - secs);
      cli.set_connection_timeout(secs.count(), usecs.count());
      cli.set_read_timeout(secs.count(), usecs.count());
      cli.set_write_timeout(secs.count(), usecs.count());
      auto res = cli.Post(full_path, payload, "application/json");
      slots.release();
      if (!res) {
        failure = "transport error: " + httplib::to_string(res.error());
      } else if (res->status >= 200 && res->status < 300) {
        try {
          return json::parse(res->body);
        } catch (const json::parse_error& e) {
          throw BackendError(std::string("remote backend: malformed response: ") + e.what(), false, endpoint,
                             res->status);
        }
      } else {
        status = res->status;
        retryable = status >= 500;
        std::string detail = res->body;
        try {
          const auto err = json::parse(res->body);
          if (err.is_object() && err.contains("error")) {
            detail = err["error"].is_string() ? err["error"].get<std::string>() : err["error"].dump();
          }
        } catch (const json::parse_error&) {
        }
        failure = "HTTP " + std::to_string(status) + ": " + detail;
      }
    }
    if (!retryable || attempt >= opt.max_attempts) {
      throw BackendError("remote backend " + endpoint + path + " failed after " + std::to_string(attempt) +
                             " attempt(s): " + failure,
                         retryable, endpoint, status);
    }
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

}  // namespace

LogProbResult RemoteBackend::logprob(std::string_view context, std::string_view continuation, bool terminated,
                                     bool with_prompt) const {
  json body = {{"context", std::string(context)}, {"continuation", std::string(continuation)}, {"terminated", terminated}};
  if (with_prompt && prompt_) body["prompt"] = *prompt_;
  const json res = post_json(impl_->target, impl_->in_flight, options_, endpoint_, "/v1/logprob", body);
  if (!res.is_object() || !res.contains("per_token_logprobs")) {
    throw BackendError("remote backend: response lacks per_token_logprobs", false, endpoint_);
  }
  LogProbResult r;
  r.per_token = read_logprobs(res["per_token_logprobs"], endpoint_);
  for (double v : r.per_token) r.total += v;
  if (res.contains("total") && res["total"].is_number()) {
    const double reported = res["total"].get<double>();
    if (std::abs(reported - r.total) > 1e-6 * std::max(1.0, std::abs(reported))) {
      throw BackendError("remote backend: total disagrees with per-token sum", false, endpoint_);
    }
  }
  return r;
}

LogProbResult RemoteBackend::cond_logprob(std::string_view context, std::string_view description,
                                          bool terminated) const {
  return logprob(context, description, terminated, true);
}

LogProbResult RemoteBackend::code_logprob(std::string_view description, bool terminated) const {
  return logprob("", description, terminated, false);
}

std::vector<SampledDescription> RemoteBackend::sample_descriptions(std::string_view context,
                                                                   const SampleRequest& request) const {
  if (request.count < 1) throw InvalidInput("sample: count must be >= 1");
  if (request.max_tokens < 1) throw InvalidInput("sample: max_tokens must be >= 1");
  if (!(request.temperature > 0.0)) throw InvalidInput("sample: temperature must be > 0");
  json body = {{"context", std::string(context)},
               {"num_samples", request.count},
               {"max_tokens", request.max_tokens},
               {"temperature", request.temperature},
               {"seed", request.seed}};
  if (prompt_) body["prompt"] = *prompt_;
  const json res = post_json(impl_->target, impl_->in_flight, options_, endpoint_, "/v1/sample", body);
  if (!res.is_object() || !res.contains("samples") || !res["samples"].is_array()) {
    throw BackendError("remote backend: response lacks samples", false, endpoint_);
  }
  std::vector<SampledDescription> out;
  for (const auto& s : res["samples"]) {
    if (!s.is_object() || !s.contains("text") || !s["text"].is_string() || !s.contains("per_token_logprobs")) {
      throw BackendError("remote backend: malformed sample entry", false, endpoint_);
    }
    SampledDescription d;
    d.text = s["text"].get<std::string>();
    d.per_token = read_logprobs(s["per_token_logprobs"], endpoint_);
    // Server tokenization is opaque; token ids are positional.
    for (std::size_t k = 0; k < d.per_token.size(); ++k) d.tokens.push_back(static_cast<std::int32_t>(k));
    if (s.contains("terminated") && s["terminated"].is_boolean()) {
      d.terminated = s["terminated"].get<bool>();
    } else {
      d.terminated = d.per_token.size() < request.max_tokens;
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<SampledDescription> RemoteBackend::ensemble_sample(std::string_view, std::string_view,
                                                               const SampleRequest&) const {
  throw BackendError("remote backend: ensemble sampling needs token-level access, which the protocol lacks", false,
                     endpoint_);
}

std::vector<LogProbResult> RemoteBackend::cond_logprob_many(std::span<const DescriptionQuery> queries) const {
  std::vector<LogProbResult> out(queries.size());
  std::vector<std::exception_ptr> errors(queries.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::min(options_.max_in_flight, queries.size());
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k; (k = next.fetch_add(1)) < queries.size();) {
        try {
          out[k] = cond_logprob(queries[k].context, queries[k].description, queries[k].terminated);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace ccdae

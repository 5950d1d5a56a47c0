#include <filesystem>

#include "ccdae/backends.hpp"
#include "ccdae/error.hpp"
#include "ccdae/ngram.hpp"
#include "ccdae/remote_backend.hpp"
#include "ccdae/table_backend.hpp"

namespace ccdae {

double SampledDescription::total() const noexcept {
  double s = 0.0;
  for (double v : per_token) s += v;
  return s;
}

std::vector<SampledDescription> Backend::ensemble_sample(std::string_view, std::string_view,
                                                         const SampleRequest&) const {
  throw BackendError(id() + ": ensemble sampling not supported");
}

std::vector<LogProbResult> Backend::cond_logprob_many(std::span<const DescriptionQuery> queries) const {
  std::vector<LogProbResult> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(cond_logprob(q.context, q.description, q.terminated));
  return out;
}

BackendKind parse_backend_kind(std::string_view name) {
  if (name == "ngram") return BackendKind::ngram;
  if (name == "remote") return BackendKind::remote;
  if (name == "table") return BackendKind::table;
  throw InvalidInput("unknown backend kind '" + std::string(name) + "' (expected ngram, remote or table)");
}

std::unique_ptr<Backend> make_backend(const BackendDescriptor& d) {
  if (d.location.empty()) throw InvalidInput("backend descriptor: missing model path, endpoint or fixture path");
  switch (d.kind) {
    case BackendKind::ngram: {
      if (!std::filesystem::is_regular_file(d.location)) throw InvalidInput("ngram model not found: " + d.location);
      return std::make_unique<NGramBackend>(NGramModel::load_file(d.location), d.prompt);
    }
    case BackendKind::remote:
      return std::make_unique<RemoteBackend>(d.location, d.remote, d.prompt);
    case BackendKind::table: {
      if (!std::filesystem::is_regular_file(d.location)) throw InvalidInput("table fixture not found: " + d.location);
      auto t = std::make_unique<TableBackend>(TableBackend::load_file(d.location));
      t->set_prompt(d.prompt);
      return t;
    }
  }
  throw InvalidInput("backend descriptor: bad kind");
}

}  // namespace ccdae

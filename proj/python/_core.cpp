#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>

#include "ccdae/backends.hpp"
#include "ccdae/baselines.hpp"
#include "ccdae/bench.hpp"
#include "ccdae/core_distance.hpp"
#include "ccdae/descgen.hpp"
#include "ccdae/error.hpp"
#include "ccdae/ngram.hpp"
#include "ccdae/oracle.hpp"
#include "ccdae/pipeline.hpp"
#include "ccdae/report_io.hpp"
#include "ccdae/table_backend.hpp"

namespace py = pybind11;
using namespace ccdae;

namespace {

// Long computations release the GIL; backends are only ever used from C++.
template <typename F>
auto nogil(F&& f) {
  py::gil_scoped_release release;
  return f();
}

std::shared_ptr<Backend> open_backend(const std::string& kind, const std::string& location,
                                      std::optional<std::string> prompt) {
  BackendDescriptor d;
  d.kind = parse_backend_kind(kind);
  d.location = location;
  d.prompt = std::move(prompt);
  return make_backend(d);
}

std::string curve_csv(const DistanceCurve& c, const std::string& units) {
  std::ostringstream out;
  write_curve_csv(out, c, parse_units(units));
  return out.str();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conceptual distance between texts via capacity-constrained description distributions";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<NoFeasibleDescription>(m, "NoFeasibleDescription", PyExc_RuntimeError);
  py::register_exception<UndefinedCorrelation>(m, "UndefinedCorrelation", PyExc_ArithmeticError);
  py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);
  py::register_exception<BenchFailure>(m, "BenchFailure", PyExc_RuntimeError);

  // Backends
  py::class_<Backend, std::shared_ptr<Backend>>(m, "Backend")
      .def_property_readonly("id", &Backend::id)
      .def_property_readonly("prompt", &Backend::prompt)
      .def(
          "cond_logprob",
          [](const Backend& b, const std::string& ctx, const std::string& desc, bool terminated) {
            return b.cond_logprob(ctx, desc, terminated).total;
          },
          py::arg("context"), py::arg("description"), py::arg("terminated") = true)
      .def(
          "code_logprob",
          [](const Backend& b, const std::string& desc, bool terminated) {
            return b.code_logprob(desc, terminated).total;
          },
          py::arg("description"), py::arg("terminated") = true)
      .def(
          "sample",
          [](const Backend& b, const std::string& ctx, std::size_t count, std::size_t max_tokens,
             double temperature, std::uint64_t seed) {
            SampleRequest r{count, max_tokens, temperature, seed};
            std::vector<std::string> out;
            for (auto& s : nogil([&] { return b.sample_descriptions(ctx, r); })) out.push_back(std::move(s.text));
            return out;
          },
          py::arg("context"), py::arg("count") = 20, py::arg("max_tokens") = 20, py::arg("temperature") = 1.0,
          py::arg("seed") = 0)
      .def("with_prompt", [](const Backend& b, std::optional<std::string> p) {
        return std::shared_ptr<Backend>(b.with_prompt(std::move(p)));
      });

  m.def("open_backend", &open_backend, py::arg("kind"), py::arg("location"), py::arg("prompt") = py::none(),
        "Backend of kind 'ngram' (model path), 'remote' (URL) or 'table' (fixture JSON path).");
  m.def(
      "train_ngram",
      [](const std::string& corpus, int order, double alpha) {
        return std::shared_ptr<Backend>(std::make_shared<NGramBackend>(NGramModel::train(corpus, order, alpha)));
      },
      py::arg("corpus"), py::arg("order") = 5, py::arg("alpha") = 0.01, "n-gram backend trained on a string.");
  m.def(
      "table_backend",
      [](const std::string& json_text) {
        return std::shared_ptr<Backend>(std::make_shared<TableBackend>(TableBackend::from_json(json_text)));
      },
      py::arg("json_text"));

  // Comparison
  py::enum_<Units>(m, "Units").value("nats", Units::nats).value("bits", Units::bits);

  py::class_<CompareConfig>(m, "CompareConfig")
      .def(py::init<>())
      .def_readwrite("samples_per_input", &CompareConfig::samples_per_input)
      .def_readwrite("max_tokens", &CompareConfig::max_tokens)
      .def_readwrite("temperature", &CompareConfig::temperature)
      .def_readwrite("seed", &CompareConfig::seed)
      .def_property(
          "pcode_mode", [](const CompareConfig& c) { return std::string(to_string(c.pcode_mode)); },
          [](CompareConfig& c, const std::string& s) { c.pcode_mode = parse_pcode_mode(s); })
      .def_property(
          "loss_mode", [](const CompareConfig& c) { return std::string(to_string(c.loss_mode)); },
          [](CompareConfig& c, const std::string& s) { c.loss_mode = parse_loss_mode(s); })
      .def_readwrite("lambda_grid", &CompareConfig::lambda_grid)
      .def_readwrite("c_max", &CompareConfig::c_max)
      .def_readwrite("capacity_grid_size", &CompareConfig::capacity_grid_size)
      .def_readwrite("prompt", &CompareConfig::prompt)
      .def_readwrite("length_normalize", &CompareConfig::length_normalize)
      .def("validate", &CompareConfig::validate);

  py::class_<DistanceCurve>(m, "DistanceCurve")
      .def_readonly("capacity_grid", &DistanceCurve::capacity_grid)
      .def_readonly("delta_2_to_1", &DistanceCurve::delta_2_to_1)
      .def_readonly("delta_1_to_2", &DistanceCurve::delta_1_to_2)
      .def_readonly("distance", &DistanceCurve::distance)
      .def_readonly("auc", &DistanceCurve::auc)
      .def_readonly("c_max", &DistanceCurve::c_max)
      .def("to_csv", &curve_csv, py::arg("units") = "nats");

  py::class_<RankedDescription>(m, "RankedDescription")
      .def_readonly("text", &RankedDescription::text)
      .def_readonly("weight", &RankedDescription::weight);
  py::class_<Explanation>(m, "Explanation")
      .def_readonly("shared", &Explanation::shared)
      .def_readonly("distinctive", &Explanation::distinctive)
      .def("__str__", &render_explanation);

  py::class_<DistanceReport>(m, "DistanceReport")
      .def_readonly("auc", &DistanceReport::auc)
      .def_readonly("curve", &DistanceReport::curve)
      .def_readonly("explanation", &DistanceReport::explanation)
      .def_property_readonly("warnings", [](const DistanceReport& r) { return r.diagnostics.warnings; })
      .def(
          "to_json", [](const DistanceReport& r, const std::string& units) { return report_json(r, parse_units(units)); },
          py::arg("units") = "nats");

  m.def(
      "compare",
      [](const std::string& a, const std::string& b, const Backend& backend, const CompareConfig& config) {
        return nogil([&] { return compare(a, b, backend, config); });
      },
      py::arg("a"), py::arg("b"), py::arg("backend"), py::arg("config") = CompareConfig{});

  // Core numerics
  m.def("linspace", &core::linspace, py::arg("start"), py::arg("stop"), py::arg("count"));
  m.def(
      "auc", [](const std::vector<double>& c, const std::vector<double>& d, double c_max) { return core::auc(c, d, c_max); },
      py::arg("capacity"), py::arg("distance"), py::arg("c_max"));
  m.def(
      "spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); },
      py::arg("x"), py::arg("y"));

  // Oracle
  auto orc = m.def_submodule("oracle", "Exact computations on finite hypothesis tables");
  py::class_<oracle::FiniteHypothesisTable>(orc, "Table")
      .def(py::init([](std::vector<std::string> labels, std::vector<double> code, std::vector<std::vector<double>> loss) {
             oracle::FiniteHypothesisTable t{std::move(labels), std::move(code), std::move(loss)};
             t.validate();
             return t;
           }),
           py::arg("labels"), py::arg("code_lengths"), py::arg("loss"))
      .def_static("parse", [](const std::string& text) {
        std::istringstream in(text);
        return oracle::parse_table(in);
      })
      .def_readonly("labels", &oracle::FiniteHypothesisTable::labels)
      .def_readonly("code_lengths", &oracle::FiniteHypothesisTable::code_lengths)
      .def_readonly("loss", &oracle::FiniteHypothesisTable::loss);
  orc.def("exact_gibbs", &oracle::exact_gibbs, py::arg("table"), py::arg("sample"), py::arg("lam"));
  orc.def("exact_capacity", &oracle::exact_capacity, py::arg("table"), py::arg("sample"), py::arg("lam"));
  orc.def("exact_expected_loss", &oracle::exact_expected_loss, py::arg("table"), py::arg("sample"), py::arg("lam"));
  orc.def("solve_discrete_description", &oracle::solve_discrete_description, py::arg("table"), py::arg("sample"),
          py::arg("capacity"));
  orc.def("structure_function", &oracle::structure_function, py::arg("table"), py::arg("sample"),
          py::arg("capacity"));
  orc.def(
      "exact_distance_curve",
      [](const oracle::FiniteHypothesisTable& t, std::size_t i, std::size_t j, std::optional<std::vector<double>> grid) {
        const auto g = grid ? *grid : core::default_lambda_grid();
        return oracle::exact_distance_curve(t, {i, j}, g);
      },
      py::arg("table"), py::arg("i") = 0, py::arg("j") = 1, py::arg("lambda_grid") = py::none());
  orc.def("universal_augment", &oracle::universal_augment, py::arg("table"), py::arg("epsilon_code") = 0.1);

  // Baselines
  m.def(
      "ncd",
      [](const py::bytes& a, const py::bytes& b, const std::string& compressor) {
        const auto z = make_compressor(compressor);
        return ncd(std::string_view(a), std::string_view(b), *z).value;
      },
      py::arg("a"), py::arg("b"), py::arg("compressor") = "zlib");
  m.def("bernoulli_entropy", &bernoulli_entropy, py::arg("p"));
  m.def(
      "noise_experiment",
      [](const std::string& pattern, double p, const std::vector<std::size_t>& dims, std::uint64_t seed,
         const std::string& compressor) {
        const auto z = make_compressor(compressor);
        const auto pts = nogil([&] { return noise_experiment(parse_pattern(pattern), p, dims, seed, *z); });
        py::list out;
        for (const auto& pt : pts) {
          py::dict d;
          d["dimension"] = pt.dimension;
          d["ncd"] = pt.ncd;
          d["predicted"] = pt.predicted;
          d["z_s_bits"] = pt.z_s_bits;
          out.append(d);
        }
        return out;
      },
      py::arg("pattern") = "disk", py::arg("p") = 0.1, py::arg("dimensions") = std::vector<std::size_t>{4096},
      py::arg("seed") = 0, py::arg("compressor") = "zlib");
  m.def(
      "trajectory_distance",
      [](const std::vector<std::string>& labels, const std::vector<double>& p1, const std::vector<double>& p2) {
        return trajectory_distance(enumerate_encoder_batch(labels, p1, p2));
      },
      py::arg("labels"), py::arg("log_p1"), py::arg("log_p2"));

  // Bench
  m.def(
      "bench_pairs",
      [](const std::filesystem::path& path, const Backend& backend, const CompareConfig& compare_config,
         std::optional<double> auc_cap, std::size_t workers) {
        BenchConfig cfg;
        cfg.compare = compare_config;
        cfg.auc_cap = auc_cap;
        cfg.workers = workers;
        const auto data = load_pairs(path);
        const auto rep = nogil([&] { return run_similarity_bench(data.records, backend, cfg); });
        py::dict d;
        d["rho_x100"] = rep.rho_x100;
        d["failures"] = rep.failures;
        py::list scores;
        for (const auto& p : rep.pairs) scores.append(py::make_tuple(p.id, p.score, p.human));
        d["scores"] = scores;
        return d;
      },
      py::arg("path"), py::arg("backend"), py::arg("config") = CompareConfig{}, py::arg("auc_cap") = 0.5,
      py::arg("workers") = 4);
  m.def(
      "bench_choice",
      [](const std::filesystem::path& path, const Backend& backend, std::uint64_t seed) {
        auto cfg = BenchConfig::choice_defaults();
        cfg.compare.seed = seed;
        const auto data = load_choices(path);
        return nogil([&] { return run_choice_bench(data.records, backend, cfg).accuracy; });
      },
      py::arg("path"), py::arg("backend"), py::arg("seed") = 0);
}

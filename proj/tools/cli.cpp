#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "ccdae/backends.hpp"
#include "ccdae/baselines.hpp"
#include "ccdae/bench.hpp"
#include "ccdae/descgen.hpp"
#include "ccdae/error.hpp"
#include "ccdae/ngram.hpp"
#include "ccdae/pipeline.hpp"
#include "ccdae/report_io.hpp"

namespace ccdae::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string backend;
  std::string model;
  std::string endpoint;
  std::string fixture;
  std::uint64_t seed = 0;
  std::string units = "nats";
  std::string out;
  std::size_t max_in_flight = 4;
  int timeout_ms = 30000;
  int attempts = 3;
};

// Sampling and curve flags shared by compare, bench and describe.
struct SamplingFlags {
  std::size_t samples = 20;
  std::size_t max_tokens = 20;
  double temperature = 1.0;
  std::string lambda = "0:100:200";
  std::string cmax = "auto";
  std::string pcode = "proposal";
  std::string loss = "encoder";
  std::string prompt;
  bool length_normalize = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--samples", samples, "Descriptions sampled per input")->capture_default_str();
    cmd->add_option("--max-tokens", max_tokens, "Tokens per description")->capture_default_str();
    cmd->add_option("--temperature", temperature, "Sampling temperature")->capture_default_str();
    cmd->add_option("--lambda", lambda, "Lambda grid start:stop:count")->capture_default_str();
    cmd->add_option("--cmax", cmax, "Upper capacity for the AUC, or auto")->capture_default_str();
    cmd->add_option("--pcode", pcode, "Code distribution: proposal or lm")->capture_default_str();
    cmd->add_option("--loss", loss, "Loss: encoder or generative")->capture_default_str();
    cmd->add_option("--prompt", prompt, "Prompt prepended to every context");
    cmd->add_flag("--length-normalize", length_normalize, "Divide losses by token count");
  }
};

std::vector<double> parse_lambda_grid(const std::string& text) {
  const auto a = text.find(':');
  const auto b = a == std::string::npos ? std::string::npos : text.find(':', a + 1);
  if (b == std::string::npos) throw InvalidInput("--lambda expects start:stop:count, got '" + text + "'");
  try {
    std::size_t used = 0;
    const double start = std::stod(text.substr(0, a));
    const double stop = std::stod(text.substr(a + 1, b - a - 1));
    const std::string count_text = text.substr(b + 1);
    const long count = std::stol(count_text, &used);
    if (used != count_text.size() || count < 2) throw InvalidInput("count must be an integer >= 2");
    return core::linspace(start, stop, static_cast<std::size_t>(count));
  } catch (const std::logic_error& e) {
    throw InvalidInput("--lambda expects start:stop:count, got '" + text + "' (" + e.what() + ")");
  }
}

std::optional<double> parse_capacity(const std::string& text, const char* flag, Units units) {
  if (text == "auto") return std::nullopt;
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(text, &used);
    if (used != text.size()) throw InvalidInput("trailing characters");
  } catch (const std::logic_error&) {
    throw InvalidInput(std::string(flag) + " expects a number or auto, got '" + text + "'");
  }
  // Flags are given in the reporting units; computation is in nats.
  return v / unit_scale(units);
}

CompareConfig make_config(const SamplingFlags& f, const Globals& g, Units units) {
  CompareConfig c;
  c.samples_per_input = f.samples;
  c.max_tokens = f.max_tokens;
  c.temperature = f.temperature;
  c.seed = g.seed;
  c.lambda_grid = parse_lambda_grid(f.lambda);
  c.c_max = parse_capacity(f.cmax, "--cmax", units);
  if (f.pcode == "proposal" || f.pcode == "proposal_mix") {
    c.pcode_mode = PcodeMode::proposal_mix;
  } else if (f.pcode == "lm" || f.pcode == "lm_code") {
    c.pcode_mode = PcodeMode::lm_code;
  } else {
    throw InvalidInput("--pcode expects proposal or lm, got '" + f.pcode + "'");
  }
  if (f.loss == "encoder" || f.loss == "encoder_only") {
    c.loss_mode = LossMode::encoder_only;
  } else if (f.loss == "generative") {
    c.loss_mode = LossMode::generative;
  } else {
    throw InvalidInput("--loss expects encoder or generative, got '" + f.loss + "'");
  }
  if (!f.prompt.empty()) c.prompt = f.prompt;
  c.length_normalize = f.length_normalize;
  c.validate();
  return c;
}

std::unique_ptr<Backend> open_backend(const Globals& g) {
  std::string endpoint = g.endpoint;
  const bool other_source = !g.model.empty() || !g.fixture.empty();
  if (endpoint.empty() && (g.backend == "remote" || !other_source)) {
    if (const char* env = std::getenv("CCDAE_ENDPOINT"); env && *env) endpoint = env;
  }
  const int sources = !g.model.empty() + !endpoint.empty() + !g.fixture.empty();
  if (sources != 1) {
    throw InvalidInput("exactly one backend source is required: --model, --endpoint (or CCDAE_ENDPOINT) or --fixture");
  }
  BackendDescriptor d;
  d.kind = !g.model.empty() ? BackendKind::ngram : !endpoint.empty() ? BackendKind::remote : BackendKind::table;
  d.location = !g.model.empty() ? g.model : !endpoint.empty() ? endpoint : g.fixture;
  if (!g.backend.empty() && parse_backend_kind(g.backend) != d.kind) {
    throw InvalidInput("--backend " + g.backend + " does not match the source given (" +
                       (!g.model.empty() ? "--model" : !endpoint.empty() ? "--endpoint" : "--fixture") + ")");
  }
  d.remote.max_in_flight = g.max_in_flight;
  d.remote.timeout = std::chrono::milliseconds(g.timeout_ms);
  d.remote.max_attempts = g.attempts;
  return make_backend(d);
}

// A path to a readable file yields its contents minus one trailing newline;
// anything else is taken literally.
std::string read_input(const std::string& arg) {
  std::error_code ec;
  if (!fs::is_regular_file(arg, ec)) return arg;
  std::ifstream in(arg, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + arg);
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  if (!s.empty() && s.back() == '\n') s.pop_back();
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

fs::path out_dir(const Globals& g) {
  fs::path dir = g.out.empty() ? fs::path("ccdae-out") : fs::path(g.out);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conceptual distance between texts from capacity-constrained description distributions", "ccdae"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--backend", g.backend, "Backend kind: ngram, remote or table");
  app.add_option("--model", g.model, "n-gram model file");
  app.add_option("--endpoint", g.endpoint, "Remote server URL (default: $CCDAE_ENDPOINT)");
  app.add_option("--fixture", g.fixture, "Table fixture JSON");
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--units", g.units, "Reporting units: nats or bits")->capture_default_str();
  app.add_option("--out", g.out, "Output directory (model file for train-ngram)");
  app.add_option("--max-in-flight", g.max_in_flight, "Remote: concurrent requests")->capture_default_str();
  app.add_option("--timeout-ms", g.timeout_ms, "Remote: per-request timeout")->capture_default_str();
  app.add_option("--attempts", g.attempts, "Remote: attempts per request")->capture_default_str();

  // compare
  auto* compare_cmd = app.add_subcommand("compare", "Distance curve and AUC for two inputs")->fallthrough();
  std::string cmp_a, cmp_b;
  SamplingFlags cmp_flags;
  bool cross_modal = false;
  compare_cmd->add_option("a", cmp_a, "First input (file path or literal text)")->required();
  compare_cmd->add_option("b", cmp_b, "Second input (file path or literal text)")->required();
  cmp_flags.add_to(compare_cmd);
  compare_cmd->add_flag("--cross-modal", cross_modal, "Pass b to the backend verbatim as a context reference");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Similarity (pairs) or binary-choice benchmark")->fallthrough();
  std::string bench_kind, bench_path, bench_score = "auc", bench_capacity, bench_auc_cap = "0.5";
  std::size_t bench_workers = 4;
  SamplingFlags bench_flags;
  bench_cmd->add_option("kind", bench_kind, "pairs or choice")->required()->check(CLI::IsMember({"pairs", "choice"}));
  bench_cmd->add_option("data", bench_path, "Tab-separated data file")->required();
  bench_cmd->add_option("--score", bench_score, "auc, dc, traj or condlik")->capture_default_str();
  bench_cmd->add_option("--capacity", bench_capacity, "Capacity for the dc score");
  bench_cmd->add_option("--auc-cap", bench_auc_cap, "Shared AUC upper capacity (default 0.5 nats), or auto for per-pair");
  bench_cmd->add_option("--workers", bench_workers, "Pairs scored concurrently")->capture_default_str();
  bench_flags.add_to(bench_cmd);

  // ncd-demo
  auto* ncd_cmd = app.add_subcommand("ncd-demo", "NCD of two noisy copies of one pattern across resolutions")
                      ->fallthrough();
  double ncd_p = 0.1;
  std::vector<std::size_t> ncd_sides{64, 128, 256, 512};
  std::string ncd_pattern = "disk", ncd_compressor = "zlib";
  ncd_cmd->add_option("--p", ncd_p, "Bit-flip probability")->capture_default_str();
  ncd_cmd->add_option("--dims", ncd_sides, "Image side lengths; D is side squared")->delimiter(',')
      ->capture_default_str();
  ncd_cmd->add_option("--pattern", ncd_pattern, "disk, square or stripes")->capture_default_str();
  ncd_cmd->add_option("--compressor", ncd_compressor, "zlib or lzma")->capture_default_str();

  // train-ngram
  auto* train_cmd = app.add_subcommand("train-ngram", "Train a character n-gram model")->fallthrough();
  std::string corpus_path;
  std::size_t order = 5;
  double alpha = 0.01;
  train_cmd->add_option("corpus", corpus_path, "Training text")->required();
  train_cmd->add_option("--order", order, "n-gram order")->capture_default_str();
  train_cmd->add_option("--alpha", alpha, "Additive smoothing")->capture_default_str();

  // describe
  auto* describe_cmd = app.add_subcommand("describe", "Best single description per capacity for two inputs")
                           ->fallthrough();
  std::string desc_a, desc_b, atom_prompt, negative_prompt;
  std::size_t n_atoms = 40, beam_width = 8, max_atoms = 10;
  double penalty = 0.0;
  SamplingFlags desc_flags;
  describe_cmd->add_option("a", desc_a, "First input (file path or literal text)")->required();
  describe_cmd->add_option("b", desc_b, "Second input (file path or literal text)")->required();
  describe_cmd->add_option("--atoms", n_atoms, "Atoms sampled per input")->capture_default_str();
  describe_cmd->add_option("--beam", beam_width, "Beam width")->capture_default_str();
  describe_cmd->add_option("--max-atoms", max_atoms, "Longest composition")->capture_default_str();
  describe_cmd->add_option("--atom-prompt", atom_prompt, "Prompt used to sample atoms");
  describe_cmd->add_option("--negative-prompt", negative_prompt, "Text whose similarity is penalized");
  describe_cmd->add_option("--penalty", penalty, "Weight of the negative-prompt penalty")->capture_default_str();
  desc_flags.add_to(describe_cmd);

  std::vector<const char*> argv{"ccdae"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const Units units = parse_units(g.units);
    const double scale = unit_scale(units);

    if (compare_cmd->parsed()) {
      const auto cfg = make_config(cmp_flags, g, units);
      const auto backend = open_backend(g);
      const std::string a = read_input(cmp_a);
      const std::string b = read_input(cmp_b);
      const auto report = cross_modal ? cross_modal_compare(a, b, *backend, cfg) : compare(a, b, *backend, cfg);
      const auto dir = out_dir(g);
      std::ostringstream csv;
      write_curve_csv(csv, report.curve, units);
      write_file(dir / "curve.csv", csv.str());
      write_file(dir / "report.json", report_json(report, units));
      write_file(dir / "explanation.txt", render_explanation(report.explanation));
      for (const auto& w : report.diagnostics.warnings) err << "warning: " << w << '\n';
      out << "auc " << fixed(report.auc * scale * scale, 6) << '\n';
      return kExitOk;
    }

    if (bench_cmd->parsed()) {
      const bool choice = bench_kind == "choice";
      BenchConfig cfg = choice ? BenchConfig::choice_defaults() : BenchConfig{};
      if (choice) {
        if (bench_cmd->count("--samples") == 0) bench_flags.samples = cfg.compare.samples_per_input;
        if (bench_cmd->count("--max-tokens") == 0) bench_flags.max_tokens = cfg.compare.max_tokens;
      }
      cfg.compare = make_config(bench_flags, g, units);
      cfg.score = parse_score_kind(bench_score);
      if (!bench_capacity.empty()) cfg.capacity = parse_capacity(bench_capacity, "--capacity", units);
      // The default cap is fixed in nats so that --units only rescales output.
      if (bench_cmd->count("--auc-cap")) cfg.auc_cap = parse_capacity(bench_auc_cap, "--auc-cap", units);
      cfg.workers = bench_workers;
      cfg.validate();
      const auto backend = open_backend(g);
      const auto dir = out_dir(g);
      if (choice) {
        const auto data = load_choices(bench_path);
        for (const auto& m : data.diagnostics.messages) err << "skipped " << m << '\n';
        const auto rep = run_choice_bench(data.records, *backend, cfg);
        std::ostringstream csv;
        write_choice_csv(csv, rep, units);
        write_file(dir / "bench_scores.csv", csv.str());
        write_file(dir / "bench_report.json", choice_report_json(rep, units));
        out << "accuracy " << fixed(rep.accuracy, 4) << '\n';
      } else {
        const auto data = load_pairs(bench_path);
        for (const auto& m : data.diagnostics.messages) err << "skipped " << m << '\n';
        const auto rep = run_similarity_bench(data.records, *backend, cfg);
        std::ostringstream csv;
        write_scores_csv(csv, rep, units);
        write_file(dir / "bench_scores.csv", csv.str());
        write_file(dir / "bench_report.json", similarity_report_json(rep, units));
        out << "spearman_x100 " << fixed(rep.rho_x100, 2) << '\n';
      }
      return kExitOk;
    }

    if (ncd_cmd->parsed()) {
      if (!(ncd_p >= 0.0 && ncd_p <= 0.5)) throw InvalidInput("--p must lie in [0, 0.5]");
      if (ncd_sides.empty()) throw InvalidInput("--dims needs at least one side length");
      std::vector<std::size_t> dims;
      for (auto s : ncd_sides) {
        if (s == 0) throw InvalidInput("--dims entries must be positive");
        dims.push_back(s * s);
      }
      const auto z = make_compressor(ncd_compressor);
      const auto pts = noise_experiment(parse_pattern(ncd_pattern), ncd_p, dims, g.seed, *z);
      std::ostringstream csv;
      write_noise_csv(csv, pts);
      write_file(out_dir(g) / "ncd.csv", csv.str());
      out << csv.str();
      const auto& last = pts.back();
      out << "final D=" << last.dimension << " measured " << fixed(last.ncd, 4) << " predicted "
          << fixed(last.predicted, 4) << '\n';
      return kExitOk;
    }

    if (train_cmd->parsed()) {
      if (g.out.empty()) throw InvalidInput("train-ngram needs --out <model file>");
      std::ifstream in(corpus_path, std::ios::binary);
      if (!in) throw InvalidInput("cannot read corpus " + corpus_path);
      std::ostringstream ss;
      ss << in.rdbuf();
      const auto model = NGramModel::train(ss.str(), order, alpha);
      if (const auto parent = fs::path(g.out).parent_path(); !parent.empty()) fs::create_directories(parent);
      model.save_file(g.out);
      out << "order " << model.order() << ", " << model.vocab_size() << " symbols, " << model.context_count()
          << " contexts -> " << g.out << '\n';
      return kExitOk;
    }

    if (describe_cmd->parsed()) {
      const auto cfg = make_config(desc_flags, g, units);
      const auto backend = open_backend(g);
      const std::string a = read_input(desc_a);
      const std::string b = read_input(desc_b);

      AtomConfig ac;
      ac.count = n_atoms;
      if (describe_cmd->count("--atom-prompt")) ac.prompt = atom_prompt;
      ac.max_tokens = cfg.max_tokens;
      ac.temperature = cfg.temperature;
      ac.seed = g.seed;
      const auto atoms = generate_pair_atoms(*backend, a, b, ac);
      if (atoms.empty()) throw std::runtime_error("the backend produced no atoms");

      BeamConfig bc;
      bc.beam_width = beam_width;
      bc.max_atoms = max_atoms;
      bc.negative_prompt_penalty = penalty;
      if (!negative_prompt.empty()) bc.negative_prompt = negative_prompt;
      const auto scored_backend = backend->with_prompt(cfg.prompt ? cfg.prompt : backend->prompt());
      std::vector<std::string> texts;
      std::set<std::string> seen;
      for (const auto& [ctx, other] : {std::pair{a, b}, std::pair{b, a}}) {
        const auto levels = beam_compose(atoms, ctx, encoder_proxy(*scored_backend, other), bc);
        for (const auto& level : levels) {
          for (const auto& e : level) {
            if (seen.insert(e.text).second) texts.push_back(e.text);
          }
        }
      }
      auto scored = score_descriptions(texts, a, b, *backend, cfg);
      const auto grid = description_capacity_grid(scored);
      const auto curve = best_single_description_curve(std::move(scored), grid);
      std::ostringstream csv;
      write_description_curve_csv(csv, curve, units);
      write_file(out_dir(g) / "describe.csv", csv.str());
      out << csv.str();
      return kExitOk;
    }
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\nrun 'ccdae --help' for usage\n";
    return kExitUsage;
  } catch (const UndefinedCorrelation& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace ccdae::cli

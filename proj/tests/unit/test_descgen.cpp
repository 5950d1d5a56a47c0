#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>

#include "ccdae/descgen.hpp"
#include "ccdae/error.hpp"
#include "ccdae/ngram.hpp"
#include "ccdae/oracle.hpp"
#include "ccdae/table_backend.hpp"

using namespace ccdae;

namespace {

const NGramBackend& toy() {
  static const NGramBackend be(NGramModel::load_file(std::filesystem::path(CCDAE_DATA_DIR) / "toy_ngram.model"));
  return be;
}

std::vector<Atom> atoms_of(std::initializer_list<const char*> texts) {
  std::vector<Atom> out;
  for (const char* t : texts) out.push_back({t, AtomSource::sample_1});
  return out;
}

// Sum of per-atom weights plus pairwise bonuses, read back from the text.
struct HandScorer {
  std::vector<std::string> names;
  std::vector<double> weight;
  std::map<std::pair<std::size_t, std::size_t>, double> bonus;

  double operator()(std::string_view text, std::string_view) const {
    std::vector<std::size_t> used;
    for (std::size_t a = 0; a < names.size(); ++a) {
      std::size_t pos = 0;
      while ((pos = text.find(names[a], pos)) != std::string_view::npos) {
        const bool left = pos == 0 || text[pos - 1] == ' ';
        const std::size_t end = pos + names[a].size();
        const bool right = end == text.size() || text[end] == ',';
        if (left && right) {
          used.push_back(a);
          break;
        }
        pos = end;
      }
    }
    double s = 0.0;
    for (std::size_t i = 0; i < used.size(); ++i) {
      s += weight[used[i]];
      for (std::size_t j = i + 1; j < used.size(); ++j) {
        const auto it = bonus.find({used[i], used[j]});
        if (it != bonus.end()) s += it->second;
      }
    }
    return s;
  }
};

}  // namespace

TEST_CASE("split_atoms") {
  CHECK(split_atoms("• a\n• b") == std::vector<std::string>{"a", "b"});
  CHECK(split_atoms("1. red\n2) round\n- small\n* light\n\n") ==
        std::vector<std::string>{"red", "round", "small", "light"});
  CHECK(split_atoms("a • b •c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_atoms("  spaced out  \r\n") == std::vector<std::string>{"spaced out"});
  CHECK(split_atoms("").empty());
}

TEST_CASE("generate_atoms") {
  AtomConfig cfg;
  cfg.count = 5;
  SUBCASE("bullets from a fixture backend") {
    const auto t = TableBackend::from_json(R"({"conditional": {"img": {"• a\n• b": 0.0}}})");
    const auto atoms = generate_atoms(t, "img", cfg);
    REQUIRE(atoms.size() == 2);
    CHECK(atoms[0].text == "a");
    CHECK(atoms[1].text == "b");
  }
  SUBCASE("duplicates collapse") {
    const auto t = TableBackend::from_json(R"({"conditional": {"img": {"a\na\nb": 0.0}}})");
    CHECK(generate_atoms(t, "img", cfg).size() == 2);
  }
  SUBCASE("toy n-gram model") {
    cfg.count = 40;
    const auto atoms = generate_atoms(toy(), "kittens chase the mouse.", cfg);
    CHECK(atoms.size() >= 1);
    CHECK(atoms.size() <= 40);
    for (const auto& a : atoms) {
      CHECK_FALSE(a.text.empty());
      CHECK(a.text.find('\n') == std::string::npos);
    }
    const auto pair = generate_pair_atoms(toy(), "kittens chase the mouse.", "traders buy tech shares.", cfg);
    CHECK(pair.size() >= atoms.size());
    CHECK(std::any_of(pair.begin(), pair.end(), [](const Atom& a) { return a.source == AtomSource::ensemble; }));
  }
  cfg.count = 0;
  CHECK_THROWS_AS(generate_atoms(toy(), "x", cfg), InvalidInput);
}

TEST_CASE("beam_compose") {
  BeamConfig cfg;
  SUBCASE("argmax at length one") {
    const auto atoms = atoms_of({"three", "five"});
    const ProxyScorer s = [](std::string_view t, std::string_view) { return t == "five" ? 5.0 : 3.0; };
    cfg.beam_width = 1;
    cfg.max_atoms = 1;
    const auto levels = beam_compose(atoms, "ctx", s, cfg);
    REQUIRE(levels.size() == 1);
    REQUIRE(levels[0].size() == 1);
    CHECK(levels[0][0].text == "five");
    CHECK(levels[0][0].proxy_score == 5.0);
  }
  SUBCASE("length-L winner uses L atoms and no atom twice") {
    const auto atoms = atoms_of({"a", "b", "c", "d"});
    const ProxyScorer s = [](std::string_view t, std::string_view) {
      return static_cast<double>(std::count(t.begin(), t.end(), ',') + 1);
    };
    cfg.beam_width = 2;
    const auto levels = beam_compose(atoms, "ctx", s, cfg);
    REQUIRE(levels.size() == 4);
    for (std::size_t L = 1; L <= 4; ++L) {
      const auto& best = levels[L - 1].front();
      CHECK(best.atoms_used.size() == L);
      CHECK(best.proxy_score == static_cast<double>(L));
      CHECK(std::adjacent_find(best.atoms_used.begin(), best.atoms_used.end()) == best.atoms_used.end());
    }
    CHECK(levels[1].front().text == "a, b");
  }
  SUBCASE("matches exhaustive search on six atoms") {
    HandScorer hs;
    hs.names = {"sky", "sea", "sand", "sun", "gull", "boat"};
    hs.weight = {1.5, 0.75, -0.5, 2.0, 0.25, 1.0};
    hs.bonus = {{{0, 3}, -1.25}, {{1, 5}, 1.5}, {{2, 4}, 0.5}, {{3, 4}, -2.0}, {{0, 1}, 0.125}};
    std::vector<Atom> atoms;
    for (const auto& n : hs.names) atoms.push_back({n, AtomSource::sample_1});
    const ProxyScorer s = hs;
    cfg.max_atoms = 6;
    for (std::size_t width : {20u, 64u}) {
      cfg.beam_width = width;
      const auto beam = beam_compose(atoms, "ctx", s, cfg);
      const auto full = exhaustive_compose(atoms, "ctx", s, cfg);
      REQUIRE(beam.size() == full.size());
      for (std::size_t L = 0; L < beam.size(); ++L) {
        REQUIRE(beam[L].size() == full[L].size());
        for (std::size_t k = 0; k < beam[L].size(); ++k) {
          CHECK(beam[L][k].text == full[L][k].text);
          CHECK(beam[L][k].proxy_score == full[L][k].proxy_score);
        }
      }
    }
    cfg.beam_width = 1;
    const auto greedy = beam_compose(atoms, "ctx", s, cfg);
    const auto full = exhaustive_compose(atoms, "ctx", s, cfg);
    for (std::size_t L = 0; L < greedy.size(); ++L) CHECK(greedy[L][0].proxy_score <= full[L][0].proxy_score);
  }
  SUBCASE("negative prompt penalty") {
    const auto atoms = atoms_of({"dog", "cat"});
    const ProxyScorer s = [](std::string_view t, std::string_view ctx) {
      return (t == "dog" ? 2.0 : 1.5) + (ctx == "neg" && t == "dog" ? 1.0 : 0.0);
    };
    cfg.max_atoms = 1;
    CHECK(beam_compose(atoms, "ctx", s, cfg)[0][0].text == "dog");
    cfg.negative_prompt = "neg";
    cfg.negative_prompt_penalty = 1.0;
    const auto levels = beam_compose(atoms, "ctx", s, cfg);
    CHECK(levels[0][0].text == "cat");
    CHECK(levels[0][1].proxy_score == doctest::Approx(-1.0));
  }
  SUBCASE("deterministic across worker counts") {
    AtomConfig ac;
    ac.count = 8;
    const auto atoms = generate_atoms(toy(), "wrens guard the feeder.", ac);
    const auto proxy = encoder_proxy(toy());
    cfg.max_atoms = 3;
    cfg.beam_width = 3;
    cfg.workers = 1;
    const auto a = beam_compose(atoms, "wrens guard the feeder.", proxy, cfg);
    cfg.workers = 6;
    auto b = beam_compose(atoms, "wrens guard the feeder.", proxy, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t L = 0; L < a.size(); ++L) {
      for (std::size_t k = 0; k < a[L].size(); ++k) CHECK(a[L][k].text == b[L][k].text);
    }
    fill_code_lengths(b, toy());
    CHECK(b[0][0].code_length == doctest::Approx(-toy().code_logprob(b[0][0].text, true).total));
  }
  SUBCASE("a scorer failure on a worker thread reaches the caller") {
    const auto atoms = atoms_of({"a", "b", "c", "d", "e"});
    const ProxyScorer s = [](std::string_view t, std::string_view) -> double {
      if (t == "a, c") throw BackendError("no entry");
      return 1.0;
    };
    cfg.workers = 4;
    cfg.max_atoms = 2;
    CHECK_THROWS_AS(beam_compose(atoms, "ctx", s, cfg), BackendError);
  }
  CHECK_THROWS_AS(beam_compose({}, "ctx", encoder_proxy(toy()), cfg), InvalidInput);
  cfg.beam_width = 0;
  CHECK_THROWS_AS(beam_compose(atoms_of({"a"}), "ctx", encoder_proxy(toy()), cfg), InvalidInput);
}

TEST_CASE("best_single_description_curve") {
  SUBCASE("single entry") {
    const std::vector<ScoredDescription> e{{"only", 2.0, {1.0, 3.0}}};
    const auto curve = best_single_description_curve(e, description_capacity_grid(e));
    REQUIRE(curve.rows.size() == 2);
    CHECK_FALSE(curve.rows[0].best[0]);
    for (std::size_t s = 0; s < 3; ++s) CHECK(*curve.rows[1].best[s] == 0);
    CHECK(curve.rows[1].loss[2] == 4.0);
    std::ostringstream csv;
    write_description_curve_csv(csv, curve);
    CHECK(csv.str() ==
          "capacity,best_h_x1,loss_x1,best_h_x2,loss_x2,best_common,loss_common\n"
          "0,,,,,,\n"
          "2,only,1,only,3,only,4\n");
  }
  SUBCASE("switchover at the longer entry's code length") {
    const std::vector<ScoredDescription> e{{"short", 1.0, {5.0, 6.0}}, {"long, detailed", 3.0, {2.0, 1.0}}};
    const std::vector<double> grid{0.5, 1.0, 2.0, 2.999, 3.0, 4.0};
    const auto curve = best_single_description_curve(e, grid);
    const std::vector<std::optional<std::size_t>> expect{std::nullopt, 0, 0, 0, 1, 1};
    for (std::size_t k = 0; k < grid.size(); ++k) {
      for (std::size_t s = 0; s < 3; ++s) CHECK(curve.rows[k].best[s] == expect[k]);
    }
  }
  SUBCASE("common column is the discrete solution on the summed loss") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.5, 6.0);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<ScoredDescription> e;
      oracle::FiniteHypothesisTable t;
      t.loss.resize(1);
      for (int j = 0; j < 7; ++j) {
        e.push_back({"h" + std::to_string(j), u(rng) + 2.0, {u(rng), u(rng)}});
        t.labels.push_back(e.back().text);
        t.code_lengths.push_back(e.back().code_length);
        t.loss[0].push_back(e.back().loss[0] + e.back().loss[1]);
      }
      const auto grid = description_capacity_grid(e);
      const auto curve = best_single_description_curve(e, grid);
      for (std::size_t k = 1; k < grid.size(); ++k) {
        CHECK(*curve.rows[k].best[2] == oracle::solve_discrete_description(t, 0, grid[k]));
        for (std::size_t s = 0; s < 3; ++s) {
          if (k > 1) CHECK(curve.rows[k].loss[s] <= curve.rows[k - 1].loss[s]);
        }
      }
    }
  }
  SUBCASE("bits change the numbers, not the choices") {
    const std::vector<ScoredDescription> e{{"a", 1.0, {2.0, 1.0}}, {"b", 2.0, {1.0, 3.0}}};
    const auto curve = best_single_description_curve(e, description_capacity_grid(e));
    std::ostringstream nats, bits;
    write_description_curve_csv(nats, curve);
    write_description_curve_csv(bits, curve, Units::bits);
    auto names = [](const std::string& s) {
      std::string out;
      std::istringstream in(s);
      std::string line;
      while (std::getline(in, line)) {
        std::istringstream f(line);
        std::string cell;
        for (int k = 0; std::getline(f, cell, ','); ++k) {
          if (k % 2 == 1) out += cell + "|";
        }
      }
      return out;
    };
    CHECK(nats.str() != bits.str());
    CHECK(names(nats.str()) == names(bits.str()));
  }
  CHECK_THROWS_AS(best_single_description_curve({}, std::vector<double>{0.0}), InvalidInput);
}

TEST_CASE("score_descriptions") {
  const auto& be = toy();
  const std::string x1 = "kittens chase the mouse.";
  const std::string x2 = "lenders cut the loan.";
  const std::vector<std::string> texts{"\ncats watch", "\nbankers cut", "\ncats watch"};
  CompareConfig cfg;
  const auto s = score_descriptions(texts, x1, x2, be, cfg);
  REQUIRE(s.size() == 2);
  for (const auto& d : s) {
    const double a = be.cond_logprob(x1, d.text, true).total;
    const double b = be.cond_logprob(x2, d.text, true).total;
    const double pi = std::log(0.5 * std::exp(a) + 0.5 * std::exp(b));
    CHECK(d.loss[0] == doctest::Approx(pi - a).epsilon(1e-12));
    CHECK(d.loss[1] == doctest::Approx(pi - b).epsilon(1e-12));
    CHECK(d.code_length == -be.code_logprob(d.text, true).total);
  }
  CHECK(s[0].loss[0] < s[0].loss[1]);
  CHECK(s[1].loss[1] < s[1].loss[0]);

  SUBCASE("self-compare: common column equals the individual columns") {
    const auto self = score_descriptions(texts, x1, x1, be, cfg);
    const auto curve = best_single_description_curve(self, description_capacity_grid(self));
    for (const auto& row : curve.rows) {
      CHECK(row.best[0] == row.best[1]);
      CHECK(row.best[0] == row.best[2]);
    }
  }
  SUBCASE("generative losses") {
    cfg.loss_mode = LossMode::generative;
    const auto g = score_descriptions(texts, x1, x2, be, cfg);
    CHECK(g[0].loss[0] == -be.cond_logprob(texts[0], x1, true).total);
  }
}

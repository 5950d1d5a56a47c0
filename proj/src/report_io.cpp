#include "ccdae/report_io.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "ccdae/error.hpp"

namespace ccdae {

namespace {

using json = nlohmann::json;

json scaled(const std::vector<double>& v, double s) {
  json a = json::array();
  for (double x : v) a.push_back(x * s);
  return a;
}

json curve_json(const DistanceCurve& c, Units u) {
  const double s = unit_scale(u);
  json j;
  j["capacity"] = scaled(c.capacity_grid, s);
  j["delta_2_to_1"] = scaled(c.delta_2_to_1, s);
  j["delta_1_to_2"] = scaled(c.delta_1_to_2, s);
  j["distance"] = scaled(c.distance, s);
  j["c_max"] = c.c_max * s;
  j["auc"] = c.auc * s * s;
  j["lambda_grid"] = c.lambda_grid;
  return j;
}

json ranked_json(const std::vector<RankedDescription>& v) {
  json a = json::array();
  for (const auto& r : v) a.push_back({{"description", r.text}, {"weight", r.weight}});
  return a;
}

std::string printable(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\n') {
      out += "\\n";
    } else if (c == '\t') {
      out += "\\t";
    } else {
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace

Units parse_units(std::string_view name) {
  if (name == "nats") return Units::nats;
  if (name == "bits") return Units::bits;
  throw InvalidInput("unknown units '" + std::string(name) + "' (expected nats or bits)");
}

const char* to_string(Units u) noexcept { return u == Units::nats ? "nats" : "bits"; }

double unit_scale(Units u) noexcept { return u == Units::nats ? 1.0 : 1.0 / std::numbers::ln2; }

std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void write_curve_csv(std::ostream& out, const DistanceCurve& curve, Units units) {
  const double s = unit_scale(units);
  out << "capacity,delta_2_to_1,delta_1_to_2,distance\n";
  for (std::size_t k = 0; k < curve.capacity_grid.size(); ++k) {
    out << format_number(curve.capacity_grid[k] * s) << ',' << format_number(curve.delta_2_to_1[k] * s) << ','
        << format_number(curve.delta_1_to_2[k] * s) << ',' << format_number(curve.distance[k] * s) << '\n';
  }
}

std::string curve_report_json(const DistanceCurve& curve, LossMode mode, Units units) {
  json j = curve_json(curve, units);
  j["mode"] = to_string(mode);
  j["units"] = to_string(units);
  return j.dump(2) + "\n";
}

std::string report_json(const DistanceReport& r, Units units) {
  const double s = unit_scale(units);
  json j;
  j["x1"] = r.x1;
  j["x2"] = r.x2;
  j["backend"] = r.backend_id;
  j["cross_modal"] = r.cross_modal;
  j["units"] = to_string(units);
  j["auc"] = r.auc * s * s;
  const auto& c = r.config;
  j["config"] = {{"samples_per_input", c.samples_per_input},
                 {"max_tokens", c.max_tokens},
                 {"temperature", c.temperature},
                 {"seed", c.seed},
                 {"pcode_mode", to_string(c.pcode_mode)},
                 {"loss_mode", to_string(c.loss_mode)},
                 {"capacity_grid_size", c.capacity_grid_size},
                 {"c_max", c.c_max ? json(*c.c_max * s) : json(nullptr)},
                 {"prompt", c.prompt ? json(*c.prompt) : json(nullptr)},
                 {"length_normalize", c.length_normalize},
                 {"explain_lambda", c.explain_lambda}};
  j["curve"] = curve_json(r.curve, units);
  j["explanation"] = {{"lambda", r.explanation.lambda},
                      {"shared", ranked_json(r.explanation.shared)},
                      {"distinctive_x1", ranked_json(r.explanation.distinctive[0])},
                      {"distinctive_x2", ranked_json(r.explanation.distinctive[1])}};
  const auto& d = r.diagnostics;
  j["diagnostics"] = {{"hypotheses", d.hypotheses},
                      {"draws", d.draws},
                      {"dropped", d.dropped},
                      {"ess_lambda_min", d.ess_lambda_min},
                      {"ess_lambda_max", d.ess_lambda_max},
                      {"warnings", d.warnings}};
  return j.dump(2) + "\n";
}

std::string render_explanation(const Explanation& e) {
  std::ostringstream out;
  auto table = [&](const char* title, const std::vector<RankedDescription>& v) {
    out << title << " (lambda=" << format_number(e.lambda) << ")\n";
    out << "rank\tweight\tdescription\n";
    std::size_t rank = 1;
    for (const auto& r : v) {
      char w[32];
      std::snprintf(w, sizeof w, "%.6f", r.weight);
      out << rank++ << '\t' << w << '\t' << printable(r.text) << '\n';
    }
  };
  table("shared", e.shared);
  out << '\n';
  table("distinctive x1", e.distinctive[0]);
  out << '\n';
  table("distinctive x2", e.distinctive[1]);
  return out.str();
}

}  // namespace ccdae

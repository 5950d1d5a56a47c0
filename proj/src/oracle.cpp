#include "ccdae/oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ccdae/error.hpp"

namespace ccdae::oracle {
namespace {

void check_sample(const FiniteHypothesisTable& t, std::size_t sample) {
  if (sample >= t.sample_count()) {
    throw InvalidInput("sample index " + std::to_string(sample) + " out of range (table has " +
                       std::to_string(t.sample_count()) + " samples)");
  }
}

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> normalized_log_code(const FiniteHypothesisTable& t) {
  std::vector<double> lp(t.hypothesis_count());
  for (std::size_t j = 0; j < lp.size(); ++j) lp[j] = -t.code_lengths[j];
  const double log_mass = log_sum_exp(lp);
  for (double& x : lp) x -= log_mass;
  return lp;
}

double expectation(std::span<const double> q, std::span<const double> f) {
  double s = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) s += q[j] * f[j];
  return s;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidInput("table: not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

void FiniteHypothesisTable::validate() const {
  const std::size_t n = code_lengths.size();
  if (n == 0) throw InvalidInput("table has no hypotheses");
  if (!labels.empty() && labels.size() != n) throw InvalidInput("table: label count mismatch");
  double kraft = 0.0;
  for (double c : code_lengths) {
    if (!std::isfinite(c)) throw InvalidInput("table: non-finite code length");
    kraft += std::exp(-c);
  }
  if (kraft > 1.0 + 1e-9) {
    throw InvalidInput("table: code lengths violate the Kraft inequality (sum " +
                       std::to_string(kraft) + ")");
  }
  for (const auto& row : loss) {
    if (row.size() != n) throw InvalidInput("table: loss row length mismatch");
    for (double v : row) {
      if (!std::isfinite(v)) throw InvalidInput("table: non-finite loss");
    }
  }
}

std::vector<double> exact_gibbs(const FiniteHypothesisTable& table, std::size_t sample,
                                double lambda) {
  check_sample(table, sample);
  if (!(lambda >= 0.0)) throw InvalidInput("lambda must be >= 0");
  const std::size_t n = table.hypothesis_count();
  std::vector<double> logits(n);
  for (std::size_t j = 0; j < n; ++j) {
    logits[j] = -table.code_lengths[j] - lambda * table.loss[sample][j];
  }
  const double lz = log_sum_exp(logits);
  std::vector<double> q(n);
  for (std::size_t j = 0; j < n; ++j) q[j] = std::exp(logits[j] - lz);
  return q;
}

double kl_divergence(std::span<const double> q, std::span<const double> log_p) {
  double kl = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (q[j] > 0.0) kl += q[j] * (std::log(q[j]) - log_p[j]);
  }
  return kl;
}

double exact_capacity(const FiniteHypothesisTable& table, std::size_t sample, double lambda) {
  const std::vector<double> q = exact_gibbs(table, sample, lambda);
  return std::max(0.0, kl_divergence(q, normalized_log_code(table)));
}

double exact_expected_loss(const FiniteHypothesisTable& table, std::size_t sample, double lambda) {
  return expectation(exact_gibbs(table, sample, lambda), table.loss[sample]);
}

double exact_cross_loss(const FiniteHypothesisTable& table, std::size_t source,
                        std::size_t target, double lambda) {
  check_sample(table, target);
  return expectation(exact_gibbs(table, source, lambda), table.loss[target]);
}

double lambda_for_capacity(const FiniteHypothesisTable& table, std::size_t sample,
                           double capacity, double lambda_max) {
  if (capacity <= 0.0) return 0.0;
  if (exact_capacity(table, sample, lambda_max) <= capacity) return lambda_max;
  double lo = 0.0;
  double hi = lambda_max;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (exact_capacity(table, sample, mid) < capacity) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

std::size_t solve_discrete_description(const FiniteHypothesisTable& table, std::size_t sample,
                                       double capacity) {
  check_sample(table, sample);
  const auto& loss = table.loss[sample];
  std::size_t best = table.hypothesis_count();
  for (std::size_t j = 0; j < table.hypothesis_count(); ++j) {
    if (table.code_lengths[j] > capacity) continue;
    if (best == table.hypothesis_count() || loss[j] < loss[best] ||
        (loss[j] == loss[best] && table.code_lengths[j] < table.code_lengths[best])) {
      best = j;
    }
  }
  if (best == table.hypothesis_count()) {
    throw NoFeasibleDescription("no description with code length <= " +
                                std::to_string(capacity) + " nats");
  }
  return best;
}

double dirac_restricted_optimum(const FiniteHypothesisTable& table, std::size_t sample,
                                double capacity) {
  check_sample(table, sample);
  const std::size_t n = table.hypothesis_count();
  std::vector<double> log_code(n);
  for (std::size_t j = 0; j < n; ++j) log_code[j] = -table.code_lengths[j];
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> dirac(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    dirac.assign(n, 0.0);
    dirac[j] = 1.0;
    if (kl_divergence(dirac, log_code) > capacity) continue;
    best = std::min(best, expectation(dirac, table.loss[sample]));
  }
  if (!std::isfinite(best)) {
    throw NoFeasibleDescription("no Dirac description within capacity " + std::to_string(capacity));
  }
  return best;
}

double structure_function(const FiniteHypothesisTable& table, std::size_t sample,
                          double capacity) {
  check_sample(table, sample);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < table.hypothesis_count(); ++j) {
    if (table.code_lengths[j] > capacity) continue;
    best = std::min(best, table.loss[sample][j] + table.code_lengths[j]);
  }
  if (!std::isfinite(best)) {
    throw NoFeasibleDescription("no description with code length <= " +
                                std::to_string(capacity) + " nats");
  }
  return best;
}

double exact_delta_at_lambda(const FiniteHypothesisTable& table, std::size_t source,
                             std::size_t target, double lambda) {
  return exact_cross_loss(table, source, target, lambda) -
         exact_expected_loss(table, target, lambda);
}

double exact_intersection_distance(const FiniteHypothesisTable& table, SamplePair pair,
                                   double lambda1, double lambda2) {
  const auto [a, b] = pair;
  const std::vector<double> q1 = exact_gibbs(table, a, lambda1);
  const std::vector<double> q2 = exact_gibbs(table, b, lambda2);
  const auto& l1 = table.loss[a];
  const auto& l2 = table.loss[b];
  double shared = 0.0;
  for (std::size_t j = 0; j < q1.size(); ++j) shared += 0.5 * (q1[j] + q2[j]) * (l1[j] + l2[j]);
  return shared - expectation(q1, l1) - expectation(q2, l2);
}

DistanceCurve exact_distance_curve(const FiniteHypothesisTable& table, SamplePair pair,
                                   std::span<const double> lambda_grid,
                                   const DistanceOptions& options) {
  table.validate();
  const auto [a, b] = pair;
  check_sample(table, a);
  check_sample(table, b);
  if (lambda_grid.empty()) throw InvalidInput("lambda grid is empty");
  for (std::size_t k = 1; k < lambda_grid.size(); ++k) {
    if (!(lambda_grid[k] > lambda_grid[k - 1])) {
      throw InvalidInput("lambda grid must be strictly increasing");
    }
  }
  if (options.capacity_grid_size < 2) throw InvalidInput("capacity grid needs at least 2 points");

  DistanceCurve out;
  out.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());
  const std::size_t samples[2] = {a, b};
  for (int s = 0; s < 2; ++s) {
    RateTrace& tr = out.traces[s];
    tr.lambda = out.lambda_grid;
    for (double lambda : lambda_grid) {
      tr.capacity.push_back(exact_capacity(table, samples[s], lambda));
      tr.expected_loss.push_back(exact_expected_loss(table, samples[s], lambda));
      tr.cross_loss.push_back(exact_cross_loss(table, samples[s], samples[1 - s], lambda));
    }
  }
  const double lambda_max = lambda_grid.back();
  const double max1 = exact_capacity(table, a, lambda_max);
  const double max2 = exact_capacity(table, b, lambda_max);
  double c_max = std::min(max1, max2);
  if (options.c_max) {
    c_max = *options.c_max;
    if (c_max > max1 && c_max > max2) {
      throw InvalidInput("c_max exceeds both traced capacity ranges; extend the lambda grid or "
                         "pass a smaller c_max");
    }
  }
  out.c_max = c_max;
  out.capacity_grid = core::linspace(0.0, c_max, options.capacity_grid_size);
  const std::size_t n = out.capacity_grid.size();
  out.delta_2_to_1.resize(n);
  out.delta_1_to_2.resize(n);
  out.distance.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double c = out.capacity_grid[k];
    const double lam1 = lambda_for_capacity(table, a, c, lambda_max);
    const double lam2 = lambda_for_capacity(table, b, c, lambda_max);
    const std::vector<double> q1 = exact_gibbs(table, a, lam1);
    const std::vector<double> q2 = exact_gibbs(table, b, lam2);
    out.delta_2_to_1[k] = expectation(q2, table.loss[a]) - expectation(q1, table.loss[a]);
    out.delta_1_to_2[k] = expectation(q1, table.loss[b]) - expectation(q2, table.loss[b]);
    out.distance[k] = 0.5 * (out.delta_2_to_1[k] + out.delta_1_to_2[k]);
  }
  out.auc = core::auc(out.capacity_grid, out.distance, c_max);
  return out;
}

FiniteHypothesisTable universal_augment(const FiniteHypothesisTable& table, double epsilon_code) {
  if (!(epsilon_code > 0.0)) throw InvalidInput("epsilon_code must be > 0");
  table.validate();
  FiniteHypothesisTable out = table;
  double mass = 0.0;
  for (double c : table.code_lengths) mass += std::exp(-c);
  const double room = -std::expm1(-epsilon_code);  // 1 - e^{-eps}
  if (mass > room) {
    const double shift = std::log(mass) - std::log(room);
    for (double& c : out.code_lengths) c += shift;
  }
  if (out.labels.empty()) {
    for (std::size_t j = 0; j < table.hypothesis_count(); ++j) out.labels.push_back("h" + std::to_string(j));
  }
  out.labels.push_back("h_search");
  out.code_lengths.push_back(epsilon_code);
  for (auto& row : out.loss) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < table.hypothesis_count(); ++j) {
      best = std::min(best, row[j] + out.code_lengths[j]);
    }
    row.push_back(best - epsilon_code);
  }
  return out;
}

ScoredBatch enumerate_batch(const FiniteHypothesisTable& table, SamplePair pair) {
  table.validate();
  check_sample(table, pair.first);
  check_sample(table, pair.second);
  const std::size_t n = table.hypothesis_count();
  const double log_uniform = -std::log(static_cast<double>(n));
  std::vector<Hypothesis> hyps(n);
  for (std::size_t j = 0; j < n; ++j) {
    hyps[j].tokens = {static_cast<std::int32_t>(j)};
    hyps[j].text = table.labels.empty() ? "h" + std::to_string(j) : table.labels[j];
    hyps[j].log_pcode = -table.code_lengths[j];
    hyps[j].log_proposal = log_uniform;
  }
  return ScoredBatch::build(std::move(hyps), {table.loss[pair.first], table.loss[pair.second]},
                            LossMode::generative);
}

FiniteHypothesisTable parse_table(std::istream& in) {
  FiniteHypothesisTable t;
  bool have_labels = false;
  bool have_code = false;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields = split_tabs(line);
    const std::string key = fields.front();
    fields.erase(fields.begin());
    if (key == "hypotheses") {
      t.labels = std::move(fields);
      have_labels = true;
    } else if (key == "code") {
      for (const auto& f : fields) t.code_lengths.push_back(parse_double(f));
      have_code = true;
    } else if (key == "loss") {
      std::vector<double> row;
      for (const auto& f : fields) row.push_back(parse_double(f));
      t.loss.push_back(std::move(row));
    } else {
      throw InvalidInput("table: unknown line key '" + key + "'");
    }
  }
  if (!have_labels || !have_code) throw InvalidInput("table: missing 'hypotheses' or 'code' line");
  t.validate();
  return t;
}

FiniteHypothesisTable load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open table file: " + path);
  return parse_table(in);
}

void write_table(std::ostream& out, const FiniteHypothesisTable& table) {
  out << "hypotheses";
  for (std::size_t j = 0; j < table.hypothesis_count(); ++j) {
    out << '\t' << (table.labels.empty() ? "h" + std::to_string(j) : table.labels[j]);
  }
  out << "\ncode";
  for (double c : table.code_lengths) out << '\t' << format_double(c);
  out << '\n';
  for (const auto& row : table.loss) {
    out << "loss";
    for (double v : row) out << '\t' << format_double(v);
    out << '\n';
  }
}

}  // namespace ccdae::oracle

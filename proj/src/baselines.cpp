#include "ccdae/baselines.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include <lzma.h>
#include <zlib.h>

#include "ccdae/detail/logmath.hpp"
#include "ccdae/error.hpp"
#include "ccdae/report_io.hpp"
#include "ccdae/rng.hpp"

namespace ccdae {

double trajectory_distance(const ScoredBatch& batch) {
  const auto hyps = batch.hypotheses();
  std::vector<double> logw(hyps.size());
  std::vector<double> absr(hyps.size());
  for (std::size_t j = 0; j < hyps.size(); ++j) {
    const auto& h = hyps[j];
    if (!h.log_cond) throw InvalidInput("trajectory_distance: batch lacks conditional log-probs");
    const auto [a, b] = *h.log_cond;
    logw[j] = std::log(static_cast<double>(h.multiplicity)) + detail::log_mix_half(a, b) - h.log_proposal;
    absr[j] = std::abs(a - b);
  }
  const double lz = detail::log_sum_exp(logw);
  double s = 0.0;
  for (std::size_t j = 0; j < hyps.size(); ++j) s += std::exp(logw[j] - lz) * absr[j];
  return s;
}

ScoredBatch enumerate_encoder_batch(std::span<const std::string> labels, std::span<const double> log_p1,
                                    std::span<const double> log_p2) {
  if (labels.size() != log_p1.size() || labels.size() != log_p2.size()) {
    throw InvalidInput("enumerate_encoder_batch: length mismatch");
  }
  const double log_uniform = -std::log(static_cast<double>(labels.size()));
  std::vector<Hypothesis> hyps;
  std::array<std::vector<double>, 2> loss;
  for (std::size_t j = 0; j < labels.size(); ++j) {
    Hypothesis h;
    h.text = labels[j];
    h.tokens = {static_cast<std::int32_t>(j)};
    h.terminated = true;
    const double log_pi = detail::log_mix_half(log_p1[j], log_p2[j]);
    h.log_pcode = log_pi;
    h.log_proposal = log_uniform;
    h.log_cond = std::array{log_p1[j], log_p2[j]};
    loss[0].push_back(log_pi - log_p1[j]);
    loss[1].push_back(log_pi - log_p2[j]);
    hyps.push_back(std::move(h));
  }
  return ScoredBatch::build(std::move(hyps), std::move(loss), LossMode::encoder_only);
}

double cond_likelihood_score(std::string_view x1, std::string_view x2, const Backend& backend) {
  const double a = backend.cond_logprob(x1, x2, true).total;
  const double b = backend.cond_logprob(x2, x1, true).total;
  return 0.5 * (a + b);
}

std::string ZlibCompressor::id() const { return std::string("zlib-") + zlibVersion() + "-level9"; }

std::size_t ZlibCompressor::compressed_bits(std::span<const std::uint8_t> data) const {
  uLongf out_len = compressBound(static_cast<uLong>(data.size()));
  std::vector<Bytef> out(out_len);
  const int rc = compress2(out.data(), &out_len, data.data(), static_cast<uLong>(data.size()), Z_BEST_COMPRESSION);
  if (rc != Z_OK) throw std::runtime_error("zlib compress2 failed with code " + std::to_string(rc));
  return static_cast<std::size_t>(out_len) * 8;
}

std::string LzmaCompressor::id() const { return std::string("lzma2-") + lzma_version_string() + "-preset9e"; }

std::size_t LzmaCompressor::compressed_bits(std::span<const std::uint8_t> data) const {
  lzma_options_lzma opt;
  if (lzma_lzma_preset(&opt, 9 | LZMA_PRESET_EXTREME)) throw std::runtime_error("lzma: preset unsupported");
  const lzma_filter filters[] = {{LZMA_FILTER_LZMA2, &opt}, {LZMA_VLI_UNKNOWN, nullptr}};
  std::vector<std::uint8_t> out(data.size() + data.size() / 2 + 1024);
  std::size_t pos = 0;
  const lzma_ret rc = lzma_raw_buffer_encode(filters, nullptr, data.data(), data.size(), out.data(), &pos, out.size());
  if (rc != LZMA_OK) throw std::runtime_error("lzma encode failed with code " + std::to_string(rc));
  return pos * 8;
}

std::unique_ptr<Compressor> make_compressor(std::string_view name) {
  if (name == "zlib") return std::make_unique<ZlibCompressor>();
  if (name == "lzma") return std::make_unique<LzmaCompressor>();
  throw InvalidInput("unknown compressor '" + std::string(name) + "' (expected zlib or lzma)");
}

NcdResult ncd(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, const Compressor& z) {
  if (a.empty() || b.empty()) throw InvalidInput("ncd: inputs must be nonempty");
  std::vector<std::uint8_t> ab(a.begin(), a.end());
  ab.insert(ab.end(), b.begin(), b.end());
  NcdResult r;
  r.z_x = z.compressed_bits(a);
  r.z_y = z.compressed_bits(b);
  r.z_xy = z.compressed_bits(ab);
  r.compressor_id = z.id();
  const double lo = static_cast<double>(std::min(r.z_x, r.z_y));
  const double hi = static_cast<double>(std::max(r.z_x, r.z_y));
  r.value = (static_cast<double>(r.z_xy) - lo) / hi;
  return r;
}

NcdResult ncd(std::string_view a, std::string_view b, const Compressor& z) {
  const auto* pa = reinterpret_cast<const std::uint8_t*>(a.data());
  const auto* pb = reinterpret_cast<const std::uint8_t*>(b.data());
  return ncd(std::span(pa, a.size()), std::span(pb, b.size()), z);
}

double bernoulli_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("bernoulli_entropy: p must lie in [0, 1]");
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

double ncd_joint_lower_bound(double z_x, double z_y, double z_s) {
  if (!(z_x > 0.0 && z_y > 0.0 && z_s > 0.0)) throw InvalidInput("ncd_joint_lower_bound: sizes must be positive");
  const double v = z_x + z_y - z_s;
  if (!(v > 0.0)) throw InvalidInput("ncd_joint_lower_bound: z_s must be smaller than z_x + z_y");
  return v;
}

Pattern parse_pattern(std::string_view name) {
  if (name == "disk") return Pattern::disk;
  if (name == "square") return Pattern::square;
  if (name == "stripes") return Pattern::stripes;
  throw InvalidInput("unknown pattern '" + std::string(name) + "' (expected disk, square or stripes)");
}

BinaryImage render_pattern(Pattern pattern, std::size_t dimension) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(dimension))));
  if (dimension == 0 || side * side != dimension) {
    throw InvalidInput("render_pattern: dimension must be a positive perfect square, got " + std::to_string(dimension));
  }
  BinaryImage img;
  img.side = side;
  img.pixels.assign(dimension, 0);
  const double c = 0.5 * static_cast<double>(side);
  const double r = 0.3 * static_cast<double>(side);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double px = static_cast<double>(x) + 0.5 - c;
      const double py = static_cast<double>(y) + 0.5 - c;
      bool on = false;
      switch (pattern) {
        case Pattern::disk:
          on = px * px + py * py <= r * r;
          break;
        case Pattern::square:
          on = std::abs(px) <= r && std::abs(py) <= r;
          break;
        case Pattern::stripes:
          on = (y * 8 / side) % 2 == 1;
          break;
      }
      img.pixels[y * side + x] = on ? 1 : 0;
    }
  }
  return img;
}

std::vector<std::uint8_t> pack_bits(const BinaryImage& image) {
  std::vector<std::uint8_t> out((image.pixels.size() + 7) / 8, 0);
  for (std::size_t k = 0; k < image.pixels.size(); ++k) {
    if (image.pixels[k]) out[k / 8] |= static_cast<std::uint8_t>(0x80u >> (k % 8));
  }
  return out;
}

std::vector<NoiseExperimentPoint> noise_experiment(Pattern pattern, double p, std::span<const std::size_t> dimensions,
                                                   std::uint64_t seed, const Compressor& z) {
  if (!(p >= 0.0 && p <= 0.5)) throw InvalidInput("noise_experiment: p must lie in [0, 0.5]");
  std::vector<NoiseExperimentPoint> out;
  for (std::size_t d : dimensions) {
    const BinaryImage s = render_pattern(pattern, d);
    std::mt19937_64 rng(mix_seed(seed, d));
    BinaryImage x = s, y = s;
    for (auto& px : x.pixels) px ^= uniform01(rng) < p ? 1 : 0;
    for (auto& px : y.pixels) px ^= uniform01(rng) < p ? 1 : 0;

    const auto ps = pack_bits(s);
    const auto r = ncd(pack_bits(x), pack_bits(y), z);
    NoiseExperimentPoint pt;
    pt.dimension = d;
    pt.p = p;
    pt.ncd = r.value;
    pt.z_s_bits = static_cast<double>(z.compressed_bits(ps));
    const double h_bits = bernoulli_entropy(p) / std::numbers::ln2;
    pt.predicted = h_bits > 0.0 ? std::clamp(1.0 - pt.z_s_bits / (static_cast<double>(d) * h_bits), 0.0, 1.0) : 0.0;
    const double zx = static_cast<double>(r.z_x);
    const double zy = static_cast<double>(r.z_y);
    if (zx + zy > pt.z_s_bits) {
      pt.ncd_bound = (ncd_joint_lower_bound(zx, zy, pt.z_s_bits) - std::min(zx, zy)) / std::max(zx, zy);
    } else {
      pt.ncd_bound = std::numeric_limits<double>::quiet_NaN();
    }
    out.push_back(pt);
  }
  return out;
}

void write_noise_csv(std::ostream& out, std::span<const NoiseExperimentPoint> points) {
  out << "dimension,p,ncd_measured,ncd_predicted,z_s_bits\n";
  for (const auto& pt : points) {
    out << pt.dimension << ',' << format_number(pt.p) << ',' << format_number(pt.ncd) << ','
        << format_number(pt.predicted) << ',' << format_number(pt.z_s_bits) << '\n';
  }
}

}  // namespace ccdae

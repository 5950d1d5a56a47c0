#pragma once

// Reference similarity measures: trajectory distance, conditional
// likelihood and normalized compression distance.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccdae/backends.hpp"
#include "ccdae/scored_batch.hpp"

namespace ccdae {

/// E_π |log p(h|x1) - log p(h|x2)| with π the equal mixture of the two
/// conditionals. Each hypothesis is weighted by multiplicity × π / proposal,
/// which is the plain Monte-Carlo mean for pipeline batches (proposal = π)
/// and the exact expectation for enumerated ones. Requires log_cond.
double trajectory_distance(const ScoredBatch& batch);

/// Enumerates a finite description set with exact conditionals as an
/// encoder-only, proposal_mix batch: log π = log(½p1 + ½p2), loss_i =
/// log π - log p_i, uniform proposal over the entries.
ScoredBatch enumerate_encoder_batch(std::span<const std::string> labels, std::span<const double> log_p1,
                                    std::span<const double> log_p2);

/// ½ (log p(x2 | x1) + log p(x1 | x2)), each continuation terminated.
/// Higher means more similar.
double cond_likelihood_score(std::string_view x1, std::string_view x2, const Backend& backend);

/// Lossless compressor behind a byte-in, size-out contract.
class Compressor {
 public:
  virtual ~Compressor() = default;
  virtual std::string id() const = 0;
  /// Compressed size in bits.
  virtual std::size_t compressed_bits(std::span<const std::uint8_t> data) const = 0;
};

/// zlib deflate at level 9.
class ZlibCompressor final : public Compressor {
 public:
  std::string id() const override;
  std::size_t compressed_bits(std::span<const std::uint8_t> data) const override;
};

/// Raw LZMA2 stream at preset 9 extreme. Its dictionary covers the whole
/// input, unlike deflate's 32 KiB window.
class LzmaCompressor final : public Compressor {
 public:
  std::string id() const override;
  std::size_t compressed_bits(std::span<const std::uint8_t> data) const override;
};

/// "zlib" or "lzma".
std::unique_ptr<Compressor> make_compressor(std::string_view name);

struct NcdResult {
  double value = 0.0;
  std::size_t z_x = 0;
  std::size_t z_y = 0;
  std::size_t z_xy = 0;
  std::string compressor_id;
};

/// (Z(ab) - min(Z(a), Z(b))) / max(Z(a), Z(b)). Throws on empty input.
NcdResult ncd(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, const Compressor& z);
NcdResult ncd(std::string_view a, std::string_view b, const Compressor& z);

/// Bernoulli entropy in nats; 0 ln 0 = 0.
double bernoulli_entropy(double p);

/// z_x + z_y - z_s, the lower bound on the joint size; throws when <= 0.
double ncd_joint_lower_bound(double z_x, double z_y, double z_s);

/// Square binary raster, row-major, one byte per pixel (0 or 1).
struct BinaryImage {
  std::size_t side = 0;
  std::vector<std::uint8_t> pixels;
};

enum class Pattern { disk, square, stripes };

Pattern parse_pattern(std::string_view name);

/// Low-complexity image of `dimension` pixels; dimension must be a perfect
/// square. The disk has radius 0.3·side around the centre.
BinaryImage render_pattern(Pattern pattern, std::size_t dimension);

/// Packs pixels 8 per byte, most significant bit first.
std::vector<std::uint8_t> pack_bits(const BinaryImage& image);

struct NoiseExperimentPoint {
  std::size_t dimension = 0;
  double p = 0.0;
  double ncd = 0.0;
  /// 1 - Z(s) / (D·H(p)) with H in bits, clamped to [0, 1].
  double predicted = 0.0;
  double z_s_bits = 0.0;
  /// NCD with Z(xy) replaced by the joint lower bound.
  double ncd_bound = 0.0;
};

/// For each D: render s, draw independent Bernoulli(p) noise n_x, n_y,
/// measure ncd(s xor n_x, s xor n_y). Each D uses its own seed derived from
/// `seed`, so points do not depend on the list order.
std::vector<NoiseExperimentPoint> noise_experiment(Pattern pattern, double p, std::span<const std::size_t> dimensions,
                                                   std::uint64_t seed, const Compressor& z);

/// CSV with header `dimension,p,ncd_measured,ncd_predicted,z_s_bits`.
void write_noise_csv(std::ostream& out, std::span<const NoiseExperimentPoint> points);

}  // namespace ccdae

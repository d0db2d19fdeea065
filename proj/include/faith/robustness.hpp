#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "faith/dataset.hpp"
#include "faith/metrics.hpp"
#include "faith/tensor.hpp"

namespace faith {

// One post-processing attack on a test image. `none` is the identity and
// anchors sweep tables with a clean row.
struct Perturbation {
  enum class Kind { none, jpeg_like, gaussian_noise };

  Kind kind = Kind::none;
  double level = 0.0;      // percentage in (0,100); unused for none
  std::uint64_t seed = 0;  // noise only; mixed with the record id per image

  // Canonical filename-safe descriptor: "none", "jpeg-50", "noise-10-s7".
  std::string label() const;
  // Inverse of label(). Throws std::invalid_argument on malformed input.
  static Perturbation parse(std::string_view text);

  void validate() const;  // throws std::invalid_argument

  // Applies the perturbation. record_id keys the per-image noise stream so a
  // sweep is deterministic yet images get independent draws.
  Tensor apply(const Tensor& image, std::string_view record_id) const;
};

// The lossy stage of a JPEG round trip at quality q = 100 - ratio_percent:
// RGB -> YCbCr, per-plane 8x8 block DCT, quantize/dequantize with the
// standard tables scaled for q, inverse, clamp to [0,1]. No entropy coding.
// Requires H and W divisible by 8; ratio_percent in (0,100).
Tensor jpeg_like_compress(const Tensor& image, double ratio_percent);

// The luminance/chrominance quantization tables used at this ratio, in
// row-major zig-zag-free order. Exposed so tests can check scaling directly.
struct QuantTables {
  std::array<int, 64> luma{};
  std::array<int, 64> chroma{};
};
QuantTables jpeg_quant_tables(double ratio_percent);

// Adds i.i.d. N(0, (intensity/100)^2) to every channel value, clamped to
// [0,1]. intensity_percent in (0,100); deterministic per seed.
Tensor gaussian_noise(const Tensor& image, double intensity_percent, std::uint64_t seed);

// Peak signal-to-noise ratio in dB over a unit dynamic range; +inf for
// identical inputs. Shapes must match.
double psnr(const Tensor& a, const Tensor& b);

// Evaluates `predict` on every record under each perturbation in turn.
// Reports come back in input order; an empty perturbation list yields {}.
std::vector<MetricsReport> robustness_sweep(
    const std::function<EditSequence(const Tensor&)>& predict,
    const std::vector<SampleRecord>& records, const ImageCache& images,
    const std::vector<Perturbation>& perturbations);

}  // namespace faith

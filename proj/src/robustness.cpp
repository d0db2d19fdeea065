#include "faith/robustness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "faith/rng.hpp"

namespace faith {

namespace {

// Standard luminance/chrominance quantization tables (quality 50 baseline).
constexpr std::array<int, 64> kLumaBase = {
    16, 11, 10, 16, 24,  40,  51,  61,   //
    12, 12, 14, 19, 26,  58,  60,  55,   //
    14, 13, 16, 24, 40,  57,  69,  56,   //
    14, 17, 22, 29, 51,  87,  80,  62,   //
    18, 22, 37, 56, 68,  109, 103, 77,   //
    24, 35, 55, 64, 81,  104, 113, 92,   //
    49, 64, 78, 87, 103, 121, 120, 101,  //
    72, 92, 95, 98, 112, 100, 103, 99,
};
constexpr std::array<int, 64> kChromaBase = {
    17, 18, 24, 47, 99, 99, 99, 99,  //
    18, 21, 26, 66, 99, 99, 99, 99,  //
    24, 26, 56, 99, 99, 99, 99, 99,  //
    47, 66, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,  //
    99, 99, 99, 99, 99, 99, 99, 99,
};

// Orthonormal 8x8 DCT-II basis; equals the JPEG FDCT normalization exactly.
struct DctBasis {
  double t[8][8];
  DctBasis() {
    const double pi = 3.14159265358979323846;
    for (int u = 0; u < 8; ++u) {
      const double c = u == 0 ? std::sqrt(1.0 / 8.0) : 0.5;
      for (int x = 0; x < 8; ++x) t[u][x] = c * std::cos((2 * x + 1) * u * pi / 16.0);
    }
  }
};
const DctBasis& basis() {
  static const DctBasis b;
  return b;
}

void check_ratio(double ratio, const char* who) {
  if (!(ratio > 0.0 && ratio < 100.0))
    throw std::invalid_argument(std::string(who) + ": ratio must lie in (0,100), got " +
                                std::to_string(ratio));
}

// Quantize/dequantize one 8x8 block of `plane` in place.
void crush_block(std::vector<double>& plane, int w, int by, int bx,
                 const std::array<int, 64>& q) {
  const auto& tb = basis().t;
  double block[8][8], tmp[8][8];
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) block[y][x] = plane[static_cast<size_t>(by + y) * w + bx + x];

  // F = T B T^t, rounded to multiples of the quantization step.
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += tb[u][y] * block[y][x];
      tmp[u][x] = s;
    }
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += tmp[u][x] * tb[v][x];
      const double step = q[static_cast<size_t>(u) * 8 + v];
      block[u][v] = std::round(s / step) * step;
    }

  // B = T^t F T back into the plane.
  for (int y = 0; y < 8; ++y)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int u = 0; u < 8; ++u) s += tb[u][y] * block[u][v];
      tmp[y][v] = s;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int v = 0; v < 8; ++v) s += tmp[y][v] * tb[v][x];
      plane[static_cast<size_t>(by + y) * w + bx + x] = s;
    }
}

double parse_double(std::string_view s, const char* who) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument(std::string(who) + ": bad number '" + std::string(s) + "'");
  return v;
}

std::string format_level(double level) {
  std::ostringstream out;
  out << level;
  return out.str();
}

}  // namespace

QuantTables jpeg_quant_tables(double ratio_percent) {
  check_ratio(ratio_percent, "jpeg_quant_tables");
  const double q = 100.0 - ratio_percent;
  const double scale = q < 50.0 ? 5000.0 / q : 200.0 - 2.0 * q;
  QuantTables out;
  for (int i = 0; i < 64; ++i) {
    out.luma[i] = static_cast<int>(
        std::clamp(std::floor((kLumaBase[i] * scale + 50.0) / 100.0), 1.0, 255.0));
    out.chroma[i] = static_cast<int>(
        std::clamp(std::floor((kChromaBase[i] * scale + 50.0) / 100.0), 1.0, 255.0));
  }
  return out;
}

Tensor jpeg_like_compress(const Tensor& image, double ratio_percent) {
  check_ratio(ratio_percent, "jpeg_like_compress");
  const Shape& s = image.shape();
  if (s.size() != 3 || s[0] != 3)
    throw std::invalid_argument("jpeg_like_compress: expected a 3xHxW image");
  const int h = static_cast<int>(s[1]), w = static_cast<int>(s[2]);
  if (h % 8 != 0 || w % 8 != 0)
    throw std::invalid_argument("jpeg_like_compress: H and W must be multiples of 8, got " +
                                std::to_string(h) + "x" + std::to_string(w));

  const QuantTables qt = jpeg_quant_tables(ratio_percent);
  const auto& v = image.values();
  const size_t plane = static_cast<size_t>(h) * w;

  // Full-range BT.601, in 0..255 scale and level-shifted by 128 so the
  // coefficient magnitudes match what the tables were designed for.
  std::vector<double> py(plane), pcb(plane), pcr(plane);
  for (size_t i = 0; i < plane; ++i) {
    const double r = 255.0 * v[i], g = 255.0 * v[plane + i], b = 255.0 * v[2 * plane + i];
    py[i] = 0.299 * r + 0.587 * g + 0.114 * b - 128.0;
    pcb[i] = -0.168736 * r - 0.331264 * g + 0.5 * b;
    pcr[i] = 0.5 * r - 0.418688 * g - 0.081312 * b;
  }
  for (int by = 0; by < h; by += 8)
    for (int bx = 0; bx < w; bx += 8) {
      crush_block(py, w, by, bx, qt.luma);
      crush_block(pcb, w, by, bx, qt.chroma);
      crush_block(pcr, w, by, bx, qt.chroma);
    }

  std::vector<double> out(3 * plane);
  for (size_t i = 0; i < plane; ++i) {
    const double y = py[i] + 128.0, cb = pcb[i], cr = pcr[i];
    out[i] = std::clamp((y + 1.402 * cr) / 255.0, 0.0, 1.0);
    out[plane + i] = std::clamp((y - 0.344136 * cb - 0.714136 * cr) / 255.0, 0.0, 1.0);
    out[2 * plane + i] = std::clamp((y + 1.772 * cb) / 255.0, 0.0, 1.0);
  }
  return Tensor::from(Shape(s), std::move(out));
}

Tensor gaussian_noise(const Tensor& image, double intensity_percent, std::uint64_t seed) {
  if (!(intensity_percent > 0.0 && intensity_percent < 100.0))
    throw std::invalid_argument("gaussian_noise: intensity must lie in (0,100), got " +
                                std::to_string(intensity_percent));
  const double sigma = intensity_percent / 100.0;
  auto rng = make_rng(seed);
  std::vector<double> out = image.values();
  for (double& x : out) x = std::clamp(x + sigma * gaussian(rng), 0.0, 1.0);
  return Tensor::from(Shape(image.shape()), std::move(out));
}

double psnr(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("psnr: shape mismatch");
  const auto& va = a.values();
  const auto& vb = b.values();
  double mse = 0.0;
  for (size_t i = 0; i < va.size(); ++i) mse += (va[i] - vb[i]) * (va[i] - vb[i]);
  mse /= static_cast<double>(va.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

void Perturbation::validate() const {
  switch (kind) {
    case Kind::none:
      return;
    case Kind::jpeg_like:
      check_ratio(level, "Perturbation");
      return;
    case Kind::gaussian_noise:
      if (!(level > 0.0 && level < 100.0))
        throw std::invalid_argument("Perturbation: noise intensity must lie in (0,100), got " +
                                    std::to_string(level));
      return;
  }
  throw std::invalid_argument("Perturbation: unknown kind");
}

std::string Perturbation::label() const {
  switch (kind) {
    case Kind::none:
      return "none";
    case Kind::jpeg_like:
      return "jpeg-" + format_level(level);
    case Kind::gaussian_noise:
      return "noise-" + format_level(level) + "-s" + std::to_string(seed);
  }
  return "none";
}

Perturbation Perturbation::parse(std::string_view text) {
  Perturbation p;
  if (text == "none") return p;

  const size_t dash = text.find('-');
  const std::string_view head = text.substr(0, dash);
  if (dash == std::string_view::npos || (head != "jpeg" && head != "noise"))
    throw std::invalid_argument("Perturbation: expected none, jpeg-<ratio> or "
                                "noise-<intensity>[-s<seed>], got '" +
                                std::string(text) + "'");
  std::string_view rest = text.substr(dash + 1);

  if (head == "jpeg") {
    p.kind = Kind::jpeg_like;
    p.level = parse_double(rest, "Perturbation");
  } else {
    p.kind = Kind::gaussian_noise;
    const size_t sep = rest.find("-s");
    if (sep != std::string_view::npos) {
      const std::string_view seed_part = rest.substr(sep + 2);
      std::uint64_t seed = 0;
      const auto [ptr, ec] =
          std::from_chars(seed_part.data(), seed_part.data() + seed_part.size(), seed);
      if (ec != std::errc() || ptr != seed_part.data() + seed_part.size())
        throw std::invalid_argument("Perturbation: bad seed in '" + std::string(text) + "'");
      p.seed = seed;
      rest = rest.substr(0, sep);
    }
    p.level = parse_double(rest, "Perturbation");
  }
  p.validate();
  return p;
}

Tensor Perturbation::apply(const Tensor& image, std::string_view record_id) const {
  switch (kind) {
    case Kind::none:
      return image;
    case Kind::jpeg_like:
      return jpeg_like_compress(image, level);
    case Kind::gaussian_noise:
      return gaussian_noise(image, level, mix_seed(seed, fnv1a64(record_id)));
  }
  throw std::invalid_argument("Perturbation: unknown kind");
}

std::vector<MetricsReport> robustness_sweep(
    const std::function<EditSequence(const Tensor&)>& predict,
    const std::vector<SampleRecord>& records, const ImageCache& images,
    const std::vector<Perturbation>& perturbations) {
  std::vector<MetricsReport> reports;
  reports.reserve(perturbations.size());
  for (const Perturbation& p : perturbations) {
    p.validate();
    reports.push_back(evaluate(
        [&](const SampleRecord& rec) { return predict(p.apply(images.get(rec), rec.id)); },
        records));
  }
  return reports;
}

}  // namespace faith

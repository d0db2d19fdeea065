#include "faith/frequency.hpp"

#include <cmath>

#include "faith/types.hpp"
#include <complex>
#include <stdexcept>
#include <vector>

namespace faith {

namespace {

void require_chw(const Tensor& image, const char* who) {
  if (image.rank() != 3)
    throw std::invalid_argument(std::string(who) + ": expected C×H×W input, got " +
                                shape_str(image.shape()));
}

// Orthonormal DCT-II basis: rows are basis vectors, C[u][j].
std::vector<double> dct_matrix(int n) {
  std::vector<double> c(static_cast<size_t>(n) * n);
  const double s0 = std::sqrt(1.0 / n), s = std::sqrt(2.0 / n);
  for (int u = 0; u < n; ++u)
    for (int j = 0; j < n; ++j)
      c[u * n + j] = (u == 0 ? s0 : s * std::cos(M_PI * (2 * j + 1) * u / (2.0 * n)));
  return c;
}

// out = A·X or Aᵀ·X on an h×w plane, A is h×h.
void apply_rows(const std::vector<double>& a, bool transpose, const double* x, double* out,
                int h, int w) {
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double s = 0.0;
      for (int k = 0; k < h; ++k) s += (transpose ? a[k * h + i] : a[i * h + k]) * x[k * w + j];
      out[i * w + j] = s;
    }
}

// out = X·Bᵀ or X·B on an h×w plane, B is w×w.
void apply_cols(const std::vector<double>& b, bool transpose, const double* x, double* out,
                int h, int w) {
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double s = 0.0;
      for (int k = 0; k < w; ++k) s += x[i * w + k] * (transpose ? b[j * w + k] : b[k * w + j]);
      out[i * w + j] = s;
    }
}

Tensor dct2_impl(const Tensor& image, bool inverse) {
  require_chw(image, inverse ? "idct2" : "dct2");
  const int c = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
  const auto ah = dct_matrix(h), aw = dct_matrix(w);
  std::vector<double> out(image.size()), tmp(static_cast<size_t>(h) * w);
  for (int ch = 0; ch < c; ++ch) {
    const double* x = image.values().data() + static_cast<size_t>(ch) * h * w;
    double* y = out.data() + static_cast<size_t>(ch) * h * w;
    // forward: C_h · X · C_wᵀ ; inverse: C_hᵀ · Y · C_w
    apply_rows(ah, inverse, x, tmp.data(), h, w);
    apply_cols(aw, !inverse, tmp.data(), y, h, w);
  }
  return Tensor::from(image.shape(), std::move(out));
}

using cd = std::complex<double>;

// Naive 1D DFT along rows of an h×w complex plane (length w each).
void dft_rows(std::vector<cd>& plane, int h, int w, bool inverse) {
  std::vector<cd> row(w);
  const double sign = inverse ? 1.0 : -1.0;
  for (int i = 0; i < h; ++i) {
    cd* p = plane.data() + static_cast<size_t>(i) * w;
    for (int k = 0; k < w; ++k) {
      cd s = 0.0;
      for (int j = 0; j < w; ++j) s += p[j] * std::polar(1.0, sign * 2.0 * M_PI * k * j / w);
      row[k] = inverse ? s / static_cast<double>(w) : s;
    }
    std::copy(row.begin(), row.end(), p);
  }
}

void dft_cols(std::vector<cd>& plane, int h, int w, bool inverse) {
  std::vector<cd> col(h);
  const double sign = inverse ? 1.0 : -1.0;
  for (int j = 0; j < w; ++j) {
    for (int k = 0; k < h; ++k) {
      cd s = 0.0;
      for (int i = 0; i < h; ++i)
        s += plane[static_cast<size_t>(i) * w + j] * std::polar(1.0, sign * 2.0 * M_PI * k * i / h);
      col[k] = inverse ? s / static_cast<double>(h) : s;
    }
    for (int k = 0; k < h; ++k) plane[static_cast<size_t>(k) * w + j] = col[k];
  }
}

}  // namespace

Subbands dwt_haar(const Tensor& image) {
  require_chw(image, "dwt_haar");
  const int c = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
  if (h % 2 != 0 || w % 2 != 0)
    throw std::invalid_argument("dwt_haar: spatial dims must be even, got " +
                                std::to_string(h) + "x" + std::to_string(w));
  const int hh2 = h / 2, ww2 = w / 2;
  const Shape sub_shape{c, hh2, ww2};
  std::vector<double> ll(numel(sub_shape)), lh(ll.size()), hl(ll.size()), hhv(ll.size());
  const auto& x = image.values();
  for (int ch = 0; ch < c; ++ch)
    for (int by = 0; by < hh2; ++by)
      for (int bx = 0; bx < ww2; ++bx) {
        const size_t base = (static_cast<size_t>(ch) * h + 2 * by) * w + 2 * bx;
        const double a = x[base], b = x[base + 1], cc = x[base + w], d = x[base + w + 1];
        const size_t o = (static_cast<size_t>(ch) * hh2 + by) * ww2 + bx;
        ll[o] = (a + b + cc + d) / 2.0;
        lh[o] = (a + b - cc - d) / 2.0;
        hl[o] = (a - b + cc - d) / 2.0;
        hhv[o] = (a - b - cc + d) / 2.0;
      }
  return Subbands{Tensor::from(sub_shape, std::move(ll)), Tensor::from(sub_shape, std::move(lh)),
                  Tensor::from(sub_shape, std::move(hl)), Tensor::from(sub_shape, std::move(hhv))};
}

Tensor idwt_haar(const Subbands& sb) {
  require_chw(sb.ll, "idwt_haar");
  if (sb.lh.shape() != sb.ll.shape() || sb.hl.shape() != sb.ll.shape() ||
      sb.hh.shape() != sb.ll.shape())
    throw std::invalid_argument("idwt_haar: sub-band shapes differ: ll " +
                                shape_str(sb.ll.shape()) + " vs lh " + shape_str(sb.lh.shape()) +
                                " hl " + shape_str(sb.hl.shape()) + " hh " +
                                shape_str(sb.hh.shape()));
  const int c = sb.ll.shape()[0], hh2 = sb.ll.shape()[1], ww2 = sb.ll.shape()[2];
  const int h = 2 * hh2, w = 2 * ww2;
  std::vector<double> out(static_cast<size_t>(c) * h * w);
  for (int ch = 0; ch < c; ++ch)
    for (int by = 0; by < hh2; ++by)
      for (int bx = 0; bx < ww2; ++bx) {
        const size_t o = (static_cast<size_t>(ch) * hh2 + by) * ww2 + bx;
        const double ll = sb.ll.values()[o], lh = sb.lh.values()[o], hl = sb.hl.values()[o],
                     hh = sb.hh.values()[o];
        const size_t base = (static_cast<size_t>(ch) * h + 2 * by) * w + 2 * bx;
        out[base] = (ll + lh + hl + hh) / 2.0;
        out[base + 1] = (ll + lh - hl - hh) / 2.0;
        out[base + w] = (ll - lh + hl - hh) / 2.0;
        out[base + w + 1] = (ll - lh - hl + hh) / 2.0;
      }
  return Tensor::from({c, h, w}, std::move(out));
}

Tensor dct2(const Tensor& image) { return dct2_impl(image, false); }

Tensor idct2(const Tensor& coeffs) { return dct2_impl(coeffs, true); }

Tensor fft2_magnitude_highpass(const Tensor& image, double r) {
  require_chw(image, "fft2_magnitude_highpass");
  if (!(r > 0.0 && r < 1.0))
    throw std::invalid_argument("fft2_magnitude_highpass: radius fraction must be in (0,1), got " +
                                format_double(r));
  const int c = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
  const double cutoff = r * std::sqrt(2.0);
  std::vector<double> out(image.size());
  std::vector<cd> plane(static_cast<size_t>(h) * w);
  for (int ch = 0; ch < c; ++ch) {
    const double* x = image.values().data() + static_cast<size_t>(ch) * h * w;
    for (size_t i = 0; i < plane.size(); ++i) plane[i] = x[i];
    dft_rows(plane, h, w, false);
    dft_cols(plane, h, w, false);
    for (int fy = 0; fy < h; ++fy)
      for (int fx = 0; fx < w; ++fx) {
        // centered frequency, normalized so the per-axis Nyquist bin sits at 1
        const int sy = fy <= h / 2 ? fy : fy - h;
        const int sx = fx <= w / 2 ? fx : fx - w;
        const double dy = std::abs(sy) / (h / 2.0), dx = std::abs(sx) / (w / 2.0);
        if (std::sqrt(dy * dy + dx * dx) < cutoff) plane[static_cast<size_t>(fy) * w + fx] = 0.0;
      }
    dft_cols(plane, h, w, true);
    dft_rows(plane, h, w, true);
    double* y = out.data() + static_cast<size_t>(ch) * h * w;
    for (size_t i = 0; i < plane.size(); ++i) y[i] = plane[i].real();
  }
  return Tensor::from(image.shape(), std::move(out));
}

Tensor extract_frequency_map(const Tensor& image, const FrequencyMethod& method) {
  switch (method.kind) {
    case FrequencyKind::DWT:
      return dwt_haar(image).hh;
    case FrequencyKind::DCT: {
      require_chw(image, "extract_frequency_map[dct]");
      const int c = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
      const int b = method.dct_block > 0 ? method.dct_block : h / 8;
      if (b <= 0 || b >= std::min(h, w))
        throw std::invalid_argument("extract_frequency_map[dct]: block size " + std::to_string(b) +
                                    " out of range for " + std::to_string(h) + "x" +
                                    std::to_string(w));
      Tensor coeffs = dct2(image);
      std::vector<double> v = coeffs.values();
      for (int ch = 0; ch < c; ++ch)
        for (int u = 0; u < b; ++u)
          for (int vv = 0; vv < b; ++vv) v[(static_cast<size_t>(ch) * h + u) * w + vv] = 0.0;
      return idct2(Tensor::from(coeffs.shape(), std::move(v)));
    }
    case FrequencyKind::FFT:
      return fft2_magnitude_highpass(image, method.fft_radius);
  }
  throw std::invalid_argument("extract_frequency_map: unknown method");
}

FrequencyMethod FrequencyMethod::parse(const std::string& name) {
  if (name == "dwt") return {FrequencyKind::DWT, 0, 0.25};
  if (name == "dct") return {FrequencyKind::DCT, 0, 0.25};
  if (name == "fft") return {FrequencyKind::FFT, 0, 0.25};
  throw std::invalid_argument("unknown frequency method '" + name + "' (expected dwt|dct|fft)");
}

std::string FrequencyMethod::name() const {
  switch (kind) {
    case FrequencyKind::DWT: return "dwt";
    case FrequencyKind::DCT: return "dct";
    case FrequencyKind::FFT: return "fft";
  }
  return "?";
}

}  // namespace faith

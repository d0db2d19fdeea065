#pragma once

#include <string>

#include "faith/tensor.hpp"

namespace faith {

// Single-level orthonormal Haar decomposition of a C×H×W image. All four
// sub-bands are C×(H/2)×(W/2).
struct Subbands {
  Tensor ll, lh, hl, hh;
};

enum class FrequencyKind { DWT, DCT, FFT };

// Which transform feeds the model's frequency branch, plus the cutoff that
// defines "high frequency" for the non-wavelet variants.
struct FrequencyMethod {
  FrequencyKind kind = FrequencyKind::DWT;
  // DCT: side length of the low-frequency coefficient block that gets zeroed.
  // 0 means "H/8, chosen at call time".
  int dct_block = 0;
  // FFT: radial cutoff as a fraction of the Nyquist radius (the centered
  // corner bin, at distance sqrt(2) in per-axis-normalized units).
  double fft_radius = 0.25;

  static FrequencyMethod parse(const std::string& name);
  std::string name() const;
};

// Analysis: per 2x2 block [[a,b],[c,d]] ->
//   LL=(a+b+c+d)/2, LH=(a+b-c-d)/2, HL=(a-b+c-d)/2, HH=(a-b-c+d)/2.
// Requires even H and W.
Subbands dwt_haar(const Tensor& image);

// Exact inverse of dwt_haar (orthonormal synthesis).
Tensor idwt_haar(const Subbands& sb);

// Orthonormal type-II 2D DCT per channel (separable).
Tensor dct2(const Tensor& image);

// Inverse of dct2.
Tensor idct2(const Tensor& coeffs);

// 2D DFT per channel, zero every bin whose centered radial distance is below
// r * sqrt(2) (per-axis-normalized frequencies, so sqrt(2) is the corner
// Nyquist bin), inverse DFT, real part. Requires 0 < r < 1.
Tensor fft2_magnitude_highpass(const Tensor& image, double r);

// The spatial-domain high-frequency evidence map the model's frequency branch
// consumes. DWT -> HH sub-band (H/2 x W/2); DCT -> inverse transform after
// zeroing the top-left b x b coefficient block (H x W); FFT -> radial
// high-pass residual (H x W).
Tensor extract_frequency_map(const Tensor& image, const FrequencyMethod& method);

}  // namespace faith

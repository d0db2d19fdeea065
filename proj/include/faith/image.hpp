#pragma once

#include <string>

#include "faith/tensor.hpp"

namespace faith {

// Binary PPM (P6, maxval 255). Images are 3×H×W tensors with values in [0,1];
// writing clamps and rounds to 8 bits.
Tensor read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Tensor& image);

// Binary PGM (P5, maxval 255) for single-channel masks, H×W tensors in [0,1].
// Masks conventionally hold only 0 and 1 (stored as 0 and 255).
Tensor read_pgm(const std::string& path);
void write_pgm(const std::string& path, const Tensor& mask);

}  // namespace faith

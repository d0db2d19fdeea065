#include "faith/image.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace faith {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error(path + ": " + what);
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

std::vector<uint8_t> read_payload(std::istream& in, const std::string& path, size_t n) {
  std::vector<uint8_t> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n) fail(path, "truncated pixel data");
  return buf;
}

uint8_t to_byte(double v) {
  const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<uint8_t>(std::llround(c * 255.0));
}

}  // namespace

Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  if (next_token(in) != "P6") fail(path, "not a binary PPM (expected P6)");
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  if (std::stoi(next_token(in)) != 255) fail(path, "unsupported maxval (expected 255)");
  if (w <= 0 || h <= 0) fail(path, "bad dimensions");
  auto buf = read_payload(in, path, static_cast<size_t>(w) * h * 3);
  std::vector<double> v(buf.size());
  // interleaved RGB -> planar C×H×W
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        v[(static_cast<size_t>(c) * h + y) * w + x] = buf[(static_cast<size_t>(y) * w + x) * 3 + c] / 255.0;
  return Tensor::from({3, h, w}, std::move(v));
}

void write_ppm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || image.shape()[0] != 3)
    throw std::invalid_argument("write_ppm: expected 3×H×W image, got " + shape_str(image.shape()));
  const int h = image.shape()[1], w = image.shape()[2];
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<uint8_t> buf(static_cast<size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        buf[(static_cast<size_t>(y) * w + x) * 3 + c] =
            to_byte(image.values()[(static_cast<size_t>(c) * h + y) * w + x]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(path, "write failed");
}

Tensor read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  if (next_token(in) != "P5") fail(path, "not a binary PGM (expected P5)");
  const int w = std::stoi(next_token(in));
  const int h = std::stoi(next_token(in));
  if (std::stoi(next_token(in)) != 255) fail(path, "unsupported maxval (expected 255)");
  if (w <= 0 || h <= 0) fail(path, "bad dimensions");
  auto buf = read_payload(in, path, static_cast<size_t>(w) * h);
  std::vector<double> v(buf.size());
  for (size_t i = 0; i < buf.size(); ++i) v[i] = buf[i] / 255.0;
  return Tensor::from({h, w}, std::move(v));
}

void write_pgm(const std::string& path, const Tensor& mask) {
  if (mask.rank() != 2)
    throw std::invalid_argument("write_pgm: expected H×W mask, got " + shape_str(mask.shape()));
  const int h = mask.shape()[0], w = mask.shape()[1];
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << "P5\n" << w << " " << h << "\n255\n";
  std::vector<uint8_t> buf(mask.size());
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = to_byte(mask.values()[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) fail(path, "write failed");
}

}  // namespace faith

#include "faith/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "faith/image.hpp"
#include "faith/rng.hpp"
#include "faith/threading.hpp"

namespace fs = std::filesystem;

namespace faith {

EditSequence SampleRecord::sequence() const {
  EditSequence seq;
  seq.reserve(steps.size());
  for (const auto& s : steps) seq.push_back(s.attribute);
  return seq;
}

namespace {

[[noreturn]] void line_error(const std::string& path, int line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_score(const std::string& s, const std::string& path, int line, const char* what) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    line_error(path, line, std::string("bad ") + what + " value '" + s + "'");
  }
}

void check_no_tabs(const std::string& s, const std::string& id, const char* what) {
  if (s.find('\t') != std::string::npos || s.find('\n') != std::string::npos)
    throw std::runtime_error("record '" + id + "': " + what + " contains tab or newline");
}

}  // namespace

void validate_records(const std::vector<SampleRecord>& records) {
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (r.id.empty()) throw std::runtime_error("record with empty id");
    if (!seen.insert(r.id).second) throw std::runtime_error("duplicate record id '" + r.id + "'");
    check_no_tabs(r.id, r.id, "id");
    check_no_tabs(r.image_ref, r.id, "image path");
    if (r.image_ref.empty()) throw std::runtime_error("record '" + r.id + "': empty image path");
    if (r.steps.size() > static_cast<size_t>(kMaxSequenceLength))
      throw std::runtime_error("record '" + r.id + "': " + std::to_string(r.steps.size()) +
                               " steps exceeds the cap of 4");
    std::set<Attribute> attrs;
    for (const auto& s : r.steps) {
      if (s.prompt.empty())
        throw std::runtime_error("record '" + r.id + "': empty prompt");
      check_no_tabs(s.prompt, r.id, "prompt");
      check_no_tabs(s.mask_ref, r.id, "mask path");
      if (!attrs.insert(s.attribute).second)
        throw std::runtime_error("record '" + r.id + "': attribute '" +
                                 std::string(to_string(s.attribute)) + "' repeats");
    }
    if (!(r.quality.ssim >= 0.0 && r.quality.ssim <= 1.0))
      throw std::runtime_error("record '" + r.id + "': ssim " + format_double(r.quality.ssim) +
                               " outside [0,1]");
  }
}

std::vector<SampleRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::vector<SampleRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() < 5) line_error(path, lineno, "expected at least 5 fields, got " +
                                                   std::to_string(f.size()));
    SampleRecord r;
    r.id = f[0];
    r.image_ref = f[1];
    const auto src = source_from_string(f[2]);
    if (!src) line_error(path, lineno, "unknown source '" + f[2] + "'");
    r.source = *src;
    r.quality.ssim = parse_score(f[3], path, lineno, "ssim");
    int nsteps = 0;
    try {
      nsteps = std::stoi(f[4]);
    } catch (const std::exception&) {
      line_error(path, lineno, "bad step count '" + f[4] + "'");
    }
    if (nsteps < 0 || nsteps > kMaxSequenceLength)
      line_error(path, lineno, "record '" + r.id + "': step count " + std::to_string(nsteps) +
                                   " outside [0,4]");
    size_t pos = 5;
    for (int s = 0; s < nsteps; ++s) {
      if (pos + 4 > f.size())
        line_error(path, lineno, "record '" + r.id + "': truncated step " + std::to_string(s));
      EditStep step;
      const auto attr = attribute_from_string(f[pos]);
      if (!attr) line_error(path, lineno, "unknown attribute '" + f[pos] + "'");
      step.attribute = *attr;
      const auto method = method_from_string(f[pos + 1]);
      if (!method) line_error(path, lineno, "unknown method '" + f[pos + 1] + "'");
      step.method = *method;
      step.prompt = f[pos + 2];
      step.mask_ref = f[pos + 3] == "-" ? "" : f[pos + 3];
      r.steps.push_back(std::move(step));
      pos += 4;
    }
    for (; pos < f.size(); ++pos) {
      if (f[pos].rfind("dino=", 0) == 0)
        r.quality.dino = parse_score(f[pos].substr(5), path, lineno, "dino");
      else if (f[pos].rfind("clip=", 0) == 0)
        r.quality.clip = parse_score(f[pos].substr(5), path, lineno, "clip");
      else
        line_error(path, lineno, "unexpected trailing field '" + f[pos] + "'");
    }
    records.push_back(std::move(r));
  }
  try {
    validate_records(records);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return records;
}

void write_manifest(const std::string& path, const std::vector<SampleRecord>& records) {
  validate_records(records);
  std::ostringstream out;
  for (const auto& r : records) {
    out << r.id << '\t' << r.image_ref << '\t' << to_string(r.source) << '\t'
        << format_double(r.quality.ssim) << '\t' << r.steps.size();
    for (const auto& s : r.steps)
      out << '\t' << to_string(s.attribute) << '\t' << to_string(s.method) << '\t' << s.prompt
          << '\t' << (s.mask_ref.empty() ? "-" : s.mask_ref);
    if (r.quality.dino) out << "\tdino=" << format_double(*r.quality.dino);
    if (r.quality.clip) out << "\tclip=" << format_double(*r.quality.clip);
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error(path + ": cannot open for writing");
  file << out.str();
  if (!file) throw std::runtime_error(path + ": write failed");
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::optional<Split> split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  return std::nullopt;
}

std::vector<std::string> SplitAssignment::ids(Split s) const {
  std::vector<std::string> out;
  for (const auto& [id, sp] : by_id)
    if (sp == s) out.push_back(id);
  return out;
}

SplitAssignment balanced_partition(const std::vector<SampleRecord>& records, int per_length,
                                   std::array<int, 3> ratios, std::uint64_t seed) {
  if (per_length <= 0) throw std::invalid_argument("balanced_partition: per_length must be > 0");
  const long rsum = static_cast<long>(ratios[0]) + ratios[1] + ratios[2];
  if (ratios[0] <= 0 || ratios[1] < 0 || ratios[2] < 0 || rsum <= 0)
    throw std::invalid_argument("balanced_partition: bad ratios");
  validate_records(records);

  std::array<std::vector<std::string>, kMaxSequenceLength + 1> buckets;
  for (const auto& r : records) buckets[r.steps.size()].push_back(r.id);

  SplitAssignment out;
  for (int len = 0; len <= kMaxSequenceLength; ++len) {
    auto& ids = buckets[len];
    if (static_cast<int>(ids.size()) < per_length)
      throw std::runtime_error("balanced_partition: length " + std::to_string(len) + ": need " +
                               std::to_string(per_length) + ", have " + std::to_string(ids.size()));
    std::sort(ids.begin(), ids.end());
    auto rng = make_rng(mix_seed(seed, 0x5917AB10ULL + static_cast<std::uint64_t>(len)));
    // partial Fisher-Yates: the first per_length entries are a uniform draw
    for (int i = 0; i < per_length; ++i) {
      const int j = i + uniform_int(rng, 0, static_cast<int>(ids.size()) - 1 - i);
      std::swap(ids[i], ids[j]);
    }
    const int nval = static_cast<int>(static_cast<long>(per_length) * ratios[1] / rsum);
    const int ntest = static_cast<int>(static_cast<long>(per_length) * ratios[2] / rsum);
    const int ntrain = per_length - nval - ntest;
    for (int i = 0; i < per_length; ++i) {
      const Split s = i < ntrain ? Split::train : (i < ntrain + nval ? Split::val : Split::test);
      out.by_id.emplace(ids[i], s);
    }
  }
  return out;
}

void write_splits(const std::string& path, const SplitAssignment& splits) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  for (const auto& [id, s] : splits.by_id) out << id << '\t' << to_string(s) << '\n';
  if (!out) throw std::runtime_error(path + ": write failed");
}

SplitAssignment load_splits(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  SplitAssignment out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 2) line_error(path, lineno, "expected 'id<TAB>split'");
    const auto s = split_from_string(f[1]);
    if (!s) line_error(path, lineno, "unknown split '" + f[1] + "'");
    if (!out.by_id.emplace(f[0], *s).second)
      line_error(path, lineno, "duplicate id '" + f[0] + "'");
  }
  return out;
}

double ssim(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw std::invalid_argument("ssim: shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  if (a.rank() != 3)
    throw std::invalid_argument("ssim: expected C×H×W, got " + shape_str(a.shape()));
  const int c = a.shape()[0], h = a.shape()[1], w = a.shape()[2];
  constexpr int kWin = 8;
  if (h < kWin || w < kWin)
    throw std::invalid_argument("ssim: image smaller than the 8×8 window");
  constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  const int rows = h + 1, cols = w + 1;
  // integral tables for x, y, x², y², xy
  std::vector<double> sa(static_cast<size_t>(rows) * cols, 0.0), sb = sa, saa = sa, sbb = sa,
                      sab = sa;
  double total = 0.0;
  long windows = 0;
  for (int ch = 0; ch < c; ++ch) {
    const double* pa = a.values().data() + static_cast<size_t>(ch) * h * w;
    const double* pb = b.values().data() + static_cast<size_t>(ch) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const size_t i = static_cast<size_t>(y + 1) * cols + (x + 1);
        const size_t up = i - cols, left = i - 1, diag = up - 1;
        const double va = pa[y * w + x], vb = pb[y * w + x];
        sa[i] = va + sa[up] + sa[left] - sa[diag];
        sb[i] = vb + sb[up] + sb[left] - sb[diag];
        saa[i] = va * va + saa[up] + saa[left] - saa[diag];
        sbb[i] = vb * vb + sbb[up] + sbb[left] - sbb[diag];
        sab[i] = va * vb + sab[up] + sab[left] - sab[diag];
      }
    auto window_sum = [&](const std::vector<double>& s, int y, int x) {
      return s[static_cast<size_t>(y + kWin) * cols + (x + kWin)] -
             s[static_cast<size_t>(y) * cols + (x + kWin)] -
             s[static_cast<size_t>(y + kWin) * cols + x] + s[static_cast<size_t>(y) * cols + x];
    };
    constexpr double kN = kWin * kWin;
    for (int y = 0; y + kWin <= h; ++y)
      for (int x = 0; x + kWin <= w; ++x) {
        const double mua = window_sum(sa, y, x) / kN, mub = window_sum(sb, y, x) / kN;
        const double va = window_sum(saa, y, x) / kN - mua * mua;
        const double vb = window_sum(sbb, y, x) / kN - mub * mub;
        const double cov = window_sum(sab, y, x) / kN - mua * mub;
        total += ((2.0 * mua * mub + kC1) * (2.0 * cov + kC2)) /
                 ((mua * mua + mub * mub + kC1) * (va + vb + kC2));
        ++windows;
      }
  }
  return total / static_cast<double>(windows);
}

std::vector<SampleRecord> quality_filter(const std::vector<SampleRecord>& records,
                                         const std::map<std::string, ImagePair>& images,
                                         double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw std::invalid_argument("quality_filter: threshold must be in [0,1]");
  std::vector<SampleRecord> kept;
  for (const auto& r : records) {
    const auto it = images.find(r.id);
    if (it == images.end())
      throw std::runtime_error("quality_filter: no images for record '" + r.id + "'");
    // negative scores (anti-correlated windows) count as "no similarity"
    const double score = std::max(0.0, ssim(it->second.edited, it->second.base));
    if (score >= threshold) kept.push_back(r);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// synthetic generator

namespace {

// Region layout on the 64×64 reference canvas (half-open pixel ranges).
// Rows are pairwise disjoint, which keeps the edits spatially separable.
struct Layout64 {
  int y0, y1, x0, x1;
};
// Two-row gaps between regions leave room for the 1px mask margin while
// keeping the recorded masks pairwise disjoint.
constexpr Layout64 kRegions64[kNumAttributes] = {
    {30, 38, 16, 48},  // eyes
    {49, 58, 20, 44},  // lips
    {12, 20, 12, 52},  // hair
    {22, 28, 16, 48},  // eyebrows
    {40, 46, 14, 50},  // glasses
    {2, 10, 14, 50},   // hat
};

// Per-attribute edit palette: additive color shift direction and texture
// channel weights, sized so edited pixels stay (almost) inside [0,1]:
// contrast squeeze to ±0.05 around ½, shift ≤ 0.18, texture ≤ 0.23.
constexpr double kShift[kNumAttributes][3] = {
    {0.14, -0.12, 0.16},  {-0.16, 0.15, -0.12}, {-0.16, 0.14, 0.10},
    {0.12, 0.16, -0.14},  {-0.14, -0.10, 0.18}, {0.16, 0.12, -0.16},
};
constexpr double kChanWeight[kNumAttributes][3] = {
    {1.0, 0.9, 0.8}, {1.0, 0.7, 0.7}, {0.9, 1.0, 0.8},
    {0.8, 0.9, 1.0}, {1.0, 1.0, 0.9}, {0.9, 0.8, 1.0},
};
// Spatial period of the texture's amplitude envelope, per attribute.
constexpr int kEnvelopePeriod[kNumAttributes] = {4, 5, 6, 7, 8, 9};
constexpr double kTexAmp = 0.20;
constexpr double kSqueeze = 0.10;
constexpr double kSmoothAlpha = 0.25;

double smoothstep(double edge0, double edge1, double x) {
  double t = (x - edge0) / (edge1 - edge0);
  t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
  return t * t * (3.0 - 2.0 * t);
}

// Round-trip through the 8-bit image format, so in-memory tensors match what
// a reader of the saved file sees.
Tensor quantize8(const Tensor& t) {
  std::vector<double> v(t.size());
  for (size_t i = 0; i < v.size(); ++i) {
    const double x = t.values()[i];
    const double cl = x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x);
    v[i] = std::llround(cl * 255.0) / 255.0;
  }
  return Tensor::from(t.shape(), std::move(v));
}

int weighted_choice(const std::array<double, 5>& w, std::mt19937_64& rng) {
  double total = 0.0;
  for (double x : w) {
    if (x < 0.0) throw std::invalid_argument("synth_generate: negative length weight");
    total += x;
  }
  if (total <= 0.0) throw std::invalid_argument("synth_generate: all length weights are zero");
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  for (int i = 0; i < 5; ++i) {
    acc += w[i];
    if (u < acc) return i;
  }
  return 4;
}

}  // namespace

RegionRect attribute_region(Attribute a, int size) {
  const auto& r = kRegions64[static_cast<int>(a)];
  return RegionRect{r.y0 * size / 64, r.y1 * size / 64, r.x0 * size / 64, r.x1 * size / 64};
}

Tensor region_mask(Attribute a, int size) {
  // One pixel wider than the painted rectangle on every side, so the halo the
  // smoothing passes push outward still lands inside the recorded mask.
  const RegionRect r = attribute_region(a, size);
  const int margin = std::max(1, size / 64);
  std::vector<double> m(static_cast<size_t>(size) * size, 0.0);
  for (int y = std::max(0, r.y0 - margin); y < std::min(size, r.y1 + margin); ++y)
    for (int x = std::max(0, r.x0 - margin); x < std::min(size, r.x1 + margin); ++x)
      m[static_cast<size_t>(y) * size + x] = 1.0;
  return Tensor::from({size, size}, std::move(m));
}

Tensor render_base_face(std::mt19937_64& rng, int size) {
  const double s = size;
  const double bg_base = 0.12 + uniform(rng, -0.02, 0.02);
  const double skin[3] = {0.82 + uniform(rng, -0.03, 0.03), 0.64 + uniform(rng, -0.03, 0.03),
                          0.52 + uniform(rng, -0.03, 0.03)};
  const double cx = s * (0.5 + uniform(rng, -0.01, 0.01));
  const double cy = s * (0.56 + uniform(rng, -0.01, 0.01));
  const double rx = s * 0.27 * (1.0 + uniform(rng, -0.03, 0.03));
  const double ry = s * 0.38 * (1.0 + uniform(rng, -0.03, 0.03));
  const double hair_col[3] = {0.24 + uniform(rng, -0.04, 0.04), 0.17, 0.11};
  const double lip_col[3] = {0.68, 0.30, 0.30};

  std::vector<double> img(3 * static_cast<size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double px[3];
      const double grad = bg_base + 0.10 * y / s;
      px[0] = grad;
      px[1] = grad + 0.02;
      px[2] = grad + 0.05;
      // face oval with a soft rim
      const double rr = std::sqrt(((y - cy) / ry) * ((y - cy) / ry) +
                                  ((x - cx) / rx) * ((x - cx) / rx));
      const double wf = smoothstep(1.10, 0.90, rr);
      for (int ch = 0; ch < 3; ++ch) px[ch] += wf * (skin[ch] - px[ch]);
      // hair band across the upper head
      const double hy = (y - 0.24 * s) / (0.085 * s), hx = (x - cx) / (0.31 * s);
      const double wh = smoothstep(1.25, 0.80, std::sqrt(hy * hy + hx * hx));
      for (int ch = 0; ch < 3; ++ch) px[ch] += wh * (hair_col[ch] - px[ch]);
      // eyes and eyebrows: two soft dark marks each (kept wide and weak so
      // repeated smoothing barely moves them)
      for (int side = -1; side <= 1; side += 2) {
        const double ex = cx + side * 0.17 * s;
        const double de = ((y - 0.53 * s) / (0.045 * s)) * ((y - 0.53 * s) / (0.045 * s)) +
                          ((x - ex) / (0.06 * s)) * ((x - ex) / (0.06 * s));
        const double we = 0.6 * std::exp(-de);
        const double db = ((y - 0.39 * s) / (0.032 * s)) * ((y - 0.39 * s) / (0.032 * s)) +
                          ((x - ex) / (0.075 * s)) * ((x - ex) / (0.075 * s));
        const double wb = 0.5 * std::exp(-db);
        for (int ch = 0; ch < 3; ++ch) px[ch] += (we + wb) * (0.15 - px[ch]) * 0.85;
      }
      // lips
      const double ly = (y - 0.835 * s) / (0.045 * s), lx = (x - cx) / (0.12 * s);
      const double wl = smoothstep(1.3, 0.7, std::sqrt(ly * ly + lx * lx));
      for (int ch = 0; ch < 3; ++ch) px[ch] += wl * (lip_col[ch] - px[ch]);
      for (int ch = 0; ch < 3; ++ch) {
        const double v = px[ch] < 0.0 ? 0.0 : (px[ch] > 1.0 ? 1.0 : px[ch]);
        img[(static_cast<size_t>(ch) * size + y) * size + x] = v;
      }
    }
  Tensor t = Tensor::from({3, size, size}, std::move(img));
  // pre-settle so that later smoothing passes barely move un-edited pixels
  for (int i = 0; i < 10; ++i) t = smooth_global(t, kSmoothAlpha);
  return t;
}

Tensor smooth_global(const Tensor& image, double alpha) {
  if (image.rank() != 3)
    throw std::invalid_argument("smooth_global: expected C×H×W, got " + shape_str(image.shape()));
  const int c = image.shape()[0], h = image.shape()[1], w = image.shape()[2];
  std::vector<double> out(image.size());
  const auto& x = image.values();
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int yy = y + dy, xc = xx + dx;
            yy = yy < 0 ? 0 : (yy >= h ? h - 1 : yy);
            xc = xc < 0 ? 0 : (xc >= w ? w - 1 : xc);
            acc += x[(static_cast<size_t>(ch) * h + yy) * w + xc];
          }
        const double blur = acc / 9.0;
        const double v = x[(static_cast<size_t>(ch) * h + y) * w + xx];
        out[(static_cast<size_t>(ch) * h + y) * w + xx] = v + alpha * (blur - v);
      }
  return Tensor::from(image.shape(), std::move(out));
}

Tensor apply_edit(const Tensor& image, Attribute attr, std::mt19937_64& rng) {
  if (image.rank() != 3 || image.shape()[1] != image.shape()[2])
    throw std::invalid_argument("apply_edit: expected square C×H×W image");
  const int size = image.shape()[1];
  const int a = static_cast<int>(attr);
  const RegionRect r = attribute_region(attr, size);
  const double jitter = uniform(rng, -0.02, 0.02);
  const int period = kEnvelopePeriod[a] * std::max(1, size / 64);
  std::vector<double> v = image.values();
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) {
      const double checker = ((y + x) % 2 == 0) ? 1.0 : -1.0;
      const double env = 1.0 + 0.15 * std::cos(2.0 * M_PI * x / period);
      for (int ch = 0; ch < 3; ++ch) {
        const size_t i = (static_cast<size_t>(ch) * size + y) * size + x;
        const double squeezed = 0.5 + kSqueeze * (v[i] - 0.5);
        const double e = squeezed + kShift[a][ch] + jitter +
                         kTexAmp * kChanWeight[a][ch] * checker * env;
        v[i] = e < 0.0 ? 0.0 : (e > 1.0 ? 1.0 : e);
      }
    }
  return Tensor::from(image.shape(), std::move(v));
}

std::vector<SampleRecord> synth_generate(const GenerateOptions& opts) {
  if (opts.count <= 0) throw std::invalid_argument("synth_generate: count must be > 0");
  if (opts.size < 16 || opts.size % 8 != 0)
    throw std::invalid_argument("synth_generate: size must be >= 16 and divisible by 8");
  if (opts.out_dir.empty()) throw std::invalid_argument("synth_generate: out_dir required");
  for (const auto& seq : opts.whitelist) {
    if (seq.size() > static_cast<size_t>(kMaxSequenceLength))
      throw std::invalid_argument("synth_generate: whitelist sequence longer than 4");
    std::set<Attribute> s(seq.begin(), seq.end());
    if (s.size() != seq.size())
      throw std::invalid_argument("synth_generate: whitelist sequence repeats an attribute");
  }
  std::error_code ec;
  fs::create_directories(fs::path(opts.out_dir) / "images", ec);
  fs::create_directories(fs::path(opts.out_dir) / "masks", ec);
  if (!fs::is_directory(fs::path(opts.out_dir) / "images") ||
      !fs::is_directory(fs::path(opts.out_dir) / "masks"))
    throw std::runtime_error("synth_generate: cannot create output directories under " +
                             opts.out_dir);

  // When a whitelist is given, lengths with no whitelisted sequence get
  // weight zero so every draw is satisfiable.
  std::array<double, 5> weights = opts.length_weights;
  std::array<std::vector<const EditSequence*>, 5> by_len{};
  if (!opts.whitelist.empty()) {
    for (const auto& seq : opts.whitelist) by_len[seq.size()].push_back(&seq);
    for (int l = 0; l < 5; ++l)
      if (by_len[l].empty()) weights[l] = 0.0;
  }

  struct Generated {
    SampleRecord record;
    bool kept = false;
  };
  std::vector<Generated> results(opts.count);

  parallel_for(opts.count, [&](int idx) {
    auto rng = make_rng(mix_seed(opts.seed, static_cast<std::uint64_t>(idx)));
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "s%06d", idx);
    const std::string id = idbuf;

    const int k = weighted_choice(weights, rng);
    EditSequence seq;
    if (!opts.whitelist.empty()) {
      const auto& pool = by_len[k];
      seq = *pool[uniform_int(rng, 0, static_cast<int>(pool.size()) - 1)];
    } else {
      std::array<Attribute, kNumAttributes> pool = all_attributes();
      for (int i = 0; i < k; ++i) {
        const int j = i + uniform_int(rng, 0, kNumAttributes - 1 - i);
        std::swap(pool[i], pool[j]);
      }
      seq.assign(pool.begin(), pool.begin() + k);
    }

    const Tensor base = quantize8(render_base_face(rng, opts.size));
    Tensor img = base;
    for (int t = 0; t < k; ++t) {
      img = apply_edit(img, seq[t], rng);
      img = smooth_global(img, kSmoothAlpha);
    }
    img = quantize8(img);

    double score = ssim(img, base);
    if (score < 0.0) score = 0.0;

    SampleRecord rec;
    rec.id = id;
    rec.image_ref = "images/" + id + ".ppm";
    rec.source = ImageSource::Synthetic;
    rec.quality.ssim = score;
    for (int t = 0; t < k; ++t) {
      EditStep step;
      step.attribute = seq[t];
      step.method = EditMethod::Synthetic;
      step.prompt = "synthetic " + std::string(to_string(seq[t])) + " edit step " +
                    std::to_string(t + 1);
      step.mask_ref = "masks/" + id + "_step" + std::to_string(t) + ".pgm";
      rec.steps.push_back(std::move(step));
    }

    write_ppm(opts.out_dir + "/" + rec.image_ref, img);
    write_ppm(opts.out_dir + "/images/" + id + "_base.ppm", base);
    for (int t = 0; t < k; ++t)
      write_pgm(opts.out_dir + "/" + rec.steps[t].mask_ref, region_mask(seq[t], opts.size));

    results[idx].record = std::move(rec);
    results[idx].kept = score >= opts.ssim_threshold;
  });

  std::vector<SampleRecord> records;
  records.reserve(results.size());
  for (auto& g : results)
    if (g.kept) records.push_back(std::move(g.record));
  if (records.empty())
    throw std::runtime_error("synth_generate: ssim threshold " +
                             format_double(opts.ssim_threshold) + " rejected every sample");
  write_manifest(opts.out_dir + "/manifest.tsv", records);
  return records;
}

Tensor ImageCache::get(const SampleRecord& rec) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(rec.image_ref);
  if (it != cache_.end()) return it->second;
  Tensor img = read_ppm((fs::path(root_) / rec.image_ref).string());
  cache_.emplace(rec.image_ref, img);
  return img;
}

}  // namespace faith

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "faith/tensor.hpp"
#include "faith/types.hpp"

namespace faith {

// One localized edit applied to an image: which attribute, which editor
// produced it, the text prompt, and the binary region mask (empty = none).
struct EditStep {
  Attribute attribute = Attribute::eyes;
  EditMethod method = EditMethod::Synthetic;
  std::string prompt;
  std::string mask_ref;
};

struct Quality {
  double ssim = 1.0;
  std::optional<double> dino;
  std::optional<double> clip;
};

// One manifest line: an image plus the ordered edits that produced it.
struct SampleRecord {
  std::string id;
  std::string image_ref;
  ImageSource source = ImageSource::Synthetic;
  std::vector<EditStep> steps;  // 0..4, attributes pairwise distinct
  Quality quality;

  EditSequence sequence() const;
};

// Parses and fully validates a manifest file. Errors carry the 1-based line
// number (parse problems) or the offending record id (semantic problems).
std::vector<SampleRecord> load_manifest(const std::string& path);

// Canonical writer: write_manifest(load_manifest(p)) reproduces p byte for
// byte when p is already canonical.
void write_manifest(const std::string& path, const std::vector<SampleRecord>& records);

// Shared semantic validation (step caps, distinct attributes, unique ids,
// score ranges). Throws std::runtime_error naming the offending record.
void validate_records(const std::vector<SampleRecord>& records);

struct GenerateOptions {
  int count = 100;
  // Relative weights for sequence lengths 0..4.
  std::array<double, 5> length_weights{1, 1, 1, 1, 1};
  std::uint64_t seed = 0;
  std::string out_dir;
  int size = 64;  // square canvas edge, must be divisible by 8
  // Keep only records whose final-vs-base SSIM reaches this value.
  double ssim_threshold = 0.0;
  // When non-empty, edit sequences are drawn from this list instead of
  // uniformly over non-repeating attribute combinations.
  std::vector<EditSequence> whitelist;
};

// Renders `count` procedural face images, applies 0..4 sequential localized
// edits to each, writes images/masks/manifest under out_dir, and returns the
// records. Fully deterministic given the seed.
std::vector<SampleRecord> synth_generate(const GenerateOptions& opts);

enum class Split { train = 0, val = 1, test = 2 };

std::string_view to_string(Split s);
std::optional<Split> split_from_string(std::string_view s);

struct SplitAssignment {
  std::map<std::string, Split> by_id;

  // Ids belonging to one split, sorted lexicographically.
  std::vector<std::string> ids(Split s) const;
};

// Samples exactly per_length ids for each sequence length 0..4 and assigns
// them ratios[0]:ratios[1]:ratios[2] to train/val/test. Val and test counts
// round down; the remainder goes to train. Deterministic given the seed.
SplitAssignment balanced_partition(const std::vector<SampleRecord>& records, int per_length,
                                   std::array<int, 3> ratios, std::uint64_t seed);

void write_splits(const std::string& path, const SplitAssignment& splits);
SplitAssignment load_splits(const std::string& path);

// Read-through cache from records to their decoded images, keyed by
// image_ref resolved against a root directory. Safe to share across the
// evaluation worker threads.
class ImageCache {
 public:
  explicit ImageCache(std::string root) : root_(std::move(root)) {}
  Tensor get(const SampleRecord& rec) const;
  const std::string& root() const { return root_; }

 private:
  std::string root_;
  mutable std::mutex mu_;
  mutable std::map<std::string, Tensor> cache_;
};

// Mean SSIM over 8×8 windows (stride 1), channels averaged; C1=1e-4, C2=9e-4
// on unit dynamic range. Requires identical shapes and H,W >= 8.
double ssim(const Tensor& a, const Tensor& b);

struct ImagePair {
  Tensor base;
  Tensor edited;
};

// Recomputes final-vs-base SSIM for each record and keeps those reaching the
// threshold. Throws if a record's images are missing from the map.
std::vector<SampleRecord> quality_filter(const std::vector<SampleRecord>& records,
                                         const std::map<std::string, ImagePair>& images,
                                         double threshold);

// --- generator internals, exposed for property tests ---

// Half-open pixel rectangle.
struct RegionRect {
  int y0, y1, x0, x1;
};

// The canonical, pairwise-disjoint region an attribute's edits touch, scaled
// from the 64×64 reference layout.
RegionRect attribute_region(Attribute a, int size);

Tensor render_base_face(std::mt19937_64& rng, int size);

// Stamps the attribute's texture + color shift inside its region (inset from
// the recorded mask so later smoothing never leaks outside it).
Tensor apply_edit(const Tensor& image, Attribute attr, std::mt19937_64& rng);

// x <- (1-alpha)*x + alpha*blur3(x): the "regeneration" pass that attenuates
// older edits' high-frequency texture more than newer ones'.
Tensor smooth_global(const Tensor& image, double alpha);

Tensor region_mask(Attribute a, int size);

}  // namespace faith

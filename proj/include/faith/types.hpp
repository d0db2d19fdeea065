#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace faith {

// The six editable facial attributes. Order is fixed: it defines both the
// token ids used by the model head and the canonical manifest spelling.
enum class Attribute : int {
  eyes = 0,
  lips = 1,
  hair = 2,
  eyebrows = 3,
  glasses = 4,
  hat = 5,
};

inline constexpr int kNumAttributes = 6;

// Ordered list of edited attributes; empty means "real image".
using EditSequence = std::vector<Attribute>;

inline constexpr int kMaxSequenceLength = 4;

enum class EditMethod : int {
  LEdits = 0,
  SDXL = 1,
  SD3_UltraEdit = 2,
  Synthetic = 3,
};

enum class ImageSource : int {
  FFHQ = 0,
  CelebAMaskHQ = 1,
  Synthetic = 2,
};

std::string_view to_string(Attribute a);
std::string_view to_string(EditMethod m);
std::string_view to_string(ImageSource s);

std::optional<Attribute> attribute_from_string(std::string_view s);
std::optional<EditMethod> method_from_string(std::string_view s);
std::optional<ImageSource> source_from_string(std::string_view s);

const std::array<Attribute, kNumAttributes>& all_attributes();

// Canonical float formatting shared by every text artifact (manifests,
// reports, logs) so that repeated runs emit byte-identical files.
std::string format_double(double v);
// Fixed-precision variant used for quality scores in manifests.
std::string format_fixed(double v, int digits);

}  // namespace faith

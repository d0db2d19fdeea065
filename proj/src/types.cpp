#include "faith/types.hpp"

#include <cstdio>

namespace faith {

namespace {
constexpr std::array<std::string_view, kNumAttributes> kAttributeNames = {
    "eyes", "lips", "hair", "eyebrows", "glasses", "hat"};
constexpr std::array<std::string_view, 4> kMethodNames = {"LEdits", "SDXL", "SD3_UltraEdit",
                                                          "Synthetic"};
constexpr std::array<std::string_view, 3> kSourceNames = {"FFHQ", "CelebAMaskHQ", "Synthetic"};
}  // namespace

std::string_view to_string(Attribute a) { return kAttributeNames[static_cast<int>(a)]; }
std::string_view to_string(EditMethod m) { return kMethodNames[static_cast<int>(m)]; }
std::string_view to_string(ImageSource s) { return kSourceNames[static_cast<int>(s)]; }

std::optional<Attribute> attribute_from_string(std::string_view s) {
  for (int i = 0; i < kNumAttributes; ++i)
    if (kAttributeNames[i] == s) return static_cast<Attribute>(i);
  return std::nullopt;
}

std::optional<EditMethod> method_from_string(std::string_view s) {
  for (size_t i = 0; i < kMethodNames.size(); ++i)
    if (kMethodNames[i] == s) return static_cast<EditMethod>(i);
  return std::nullopt;
}

std::optional<ImageSource> source_from_string(std::string_view s) {
  for (size_t i = 0; i < kSourceNames.size(); ++i)
    if (kSourceNames[i] == s) return static_cast<ImageSource>(i);
  return std::nullopt;
}

const std::array<Attribute, kNumAttributes>& all_attributes() {
  static const std::array<Attribute, kNumAttributes> a = {
      Attribute::eyes, Attribute::lips,    Attribute::hair,
      Attribute::eyebrows, Attribute::glasses, Attribute::hat};
  return a;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace faith

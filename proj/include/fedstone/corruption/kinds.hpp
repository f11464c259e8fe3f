#pragma once

#include <array>
#include <string>
#include <string_view>

#include "fedstone/errors.hpp"

namespace fedstone {

enum class CorruptionKind {
  kGaussianNoise,
  kImpulseNoise,
  kDefocusBlur,
  kMotionBlur,
  kBrightness,
  kDarkness,
  kContrast,
  kFog,
};

inline constexpr std::size_t kNumCorruptionKinds = 8;
inline constexpr int kMinSeverity = 1;
inline constexpr int kMaxSeverity = 5;

inline constexpr std::array<CorruptionKind, kNumCorruptionKinds> kAllCorruptionKinds{
    CorruptionKind::kGaussianNoise, CorruptionKind::kImpulseNoise,
    CorruptionKind::kDefocusBlur,   CorruptionKind::kMotionBlur,
    CorruptionKind::kBrightness,    CorruptionKind::kDarkness,
    CorruptionKind::kContrast,      CorruptionKind::kFog,
};

inline constexpr std::string_view to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::kGaussianNoise: return "gaussian_noise";
    case CorruptionKind::kImpulseNoise: return "impulse_noise";
    case CorruptionKind::kDefocusBlur: return "defocus_blur";
    case CorruptionKind::kMotionBlur: return "motion_blur";
    case CorruptionKind::kBrightness: return "brightness";
    case CorruptionKind::kDarkness: return "darkness";
    case CorruptionKind::kContrast: return "contrast";
    case CorruptionKind::kFog: return "fog";
  }
  return "unknown";
}

inline CorruptionKind parse_corruption_kind(std::string_view name) {
  for (auto k : kAllCorruptionKinds)
    if (to_string(k) == name) return k;
  throw InputError("unknown corruption kind '" + std::string(name) + "'");
}

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::kGaussianNoise;
  int severity = 1;

  void validate() const {
    if (severity < kMinSeverity || severity > kMaxSeverity)
      throw InputError("severity " + std::to_string(severity) +
                       " outside [1, 5]");
  }

  friend bool operator==(const CorruptionSpec&, const CorruptionSpec&) = default;
};

}  // namespace fedstone

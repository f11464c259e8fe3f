#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fedstone/corruption/kinds.hpp"
#include "fedstone/data/image.hpp"
#include "fedstone/errors.hpp"
#include "fedstone/random.hpp"

namespace fedstone {

/// A and B are the two hospitals; S is the clean source task used for
/// warm-start pretraining.
enum class Source : std::uint8_t { kA = 1, kB = 2, kS = 3 };

inline constexpr std::size_t kNumClasses = 6;

inline std::string_view to_string(Source s) {
  switch (s) {
    case Source::kA: return "A";
    case Source::kB: return "B";
    case Source::kS: return "S";
  }
  return "?";
}

inline Source parse_source(std::string_view name) {
  if (name == "A") return Source::kA;
  if (name == "B") return Source::kB;
  if (name == "S") return Source::kS;
  throw InputError("unknown dataset source '" + std::string(name) + "'");
}

inline const std::array<std::string_view, kNumClasses>& class_names(Source s) {
  static constexpr std::array<std::string_view, kNumClasses> a{"WW", "STR", "CYS",
                                                               "BRU", "CAR", "CAR2"};
  static constexpr std::array<std::string_view, kNumClasses> b{"WW", "WD", "UA",
                                                               "STR", "BRU", "CYS"};
  static constexpr std::array<std::string_view, kNumClasses> src{"S0", "S1", "S2",
                                                                 "S3", "S4", "S5"};
  switch (s) {
    case Source::kA: return a;
    case Source::kB: return b;
    case Source::kS: return src;
  }
  return a;
}

inline int class_label(Source s, std::string_view name) {
  const auto& names = class_names(s);
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw InputError("class '" + std::string(name) + "' is not part of source " +
                   std::string(to_string(s)));
}

struct ImageGeometry {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t channels = 3;

  std::size_t numel() const { return height * width * channels; }
  friend bool operator==(const ImageGeometry&, const ImageGeometry&) = default;
};

/// Sample ids pack (source, label, index) so pixels can be regenerated from
/// (seed, id) alone.
inline std::uint64_t make_sample_id(Source s, int label, std::uint32_t index) {
  return (static_cast<std::uint64_t>(s) << 48) |
         (static_cast<std::uint64_t>(label) << 32) | index;
}
inline Source id_source(std::uint64_t id) { return static_cast<Source>(id >> 48); }
inline int id_label(std::uint64_t id) { return static_cast<int>((id >> 32) & 0xffff); }
inline std::uint32_t id_index(std::uint64_t id) {
  return static_cast<std::uint32_t>(id & 0xffffffffULL);
}

struct LabeledSample {
  std::uint64_t id = 0;
  Source source = Source::kA;
  int label = 0;
  std::string class_name;
  Image image;
  std::optional<CorruptionSpec> corruption;
};

/// Procedural texture for one (source, class): base colour, an oriented
/// grating with a per-class frequency and colour direction, and a radial
/// vignette term.
struct TextureParams {
  std::array<double, 3> base;
  double freq_x;  // cycles per patch
  double freq_y;
  double amplitude;
  std::array<double, 3> chroma;
  double vignette;
};

inline const std::array<TextureParams, kNumClasses>& texture_table(Source s) {
  // Hospital A: bright, low-frequency textures (CCD-like acquisition).
  static const std::array<TextureParams, kNumClasses> a{{
      {{0.62, 0.47, 0.30}, 2.0, 1.0, 0.10, {1.0, 0.8, 0.5}, 0.04},
      {{0.70, 0.65, 0.52}, 1.0, 3.0, 0.08, {0.6, 0.7, 1.0}, -0.03},
      {{0.78, 0.70, 0.40}, 3.0, 0.0, 0.12, {1.0, 1.0, 0.4}, 0.00},
      {{0.56, 0.57, 0.55}, 0.0, 2.0, 0.09, {0.7, 0.7, 0.7}, 0.05},
      {{0.67, 0.55, 0.45}, 2.0, 2.0, 0.11, {1.0, 0.6, 0.6}, -0.04},
      {{0.59, 0.50, 0.43}, 1.5, 0.5, 0.07, {0.8, 0.8, 1.0}, 0.02},
  }};
  // Hospital B: darker, reddish, higher-frequency textures (endoscope-like).
  static const std::array<TextureParams, kNumClasses> b{{
      {{0.42, 0.26, 0.18}, 4.0, 2.0, 0.10, {1.0, 0.5, 0.3}, -0.05},
      {{0.53, 0.40, 0.20}, 5.0, 0.0, 0.12, {1.0, 0.9, 0.3}, 0.03},
      {{0.60, 0.36, 0.15}, 0.0, 5.0, 0.09, {1.0, 0.6, 0.2}, -0.02},
      {{0.47, 0.42, 0.35}, 3.0, 4.0, 0.11, {0.6, 0.7, 0.9}, 0.04},
      {{0.38, 0.35, 0.34}, 6.0, 1.0, 0.08, {0.8, 0.8, 0.8}, 0.00},
      {{0.55, 0.47, 0.27}, 2.0, 6.0, 0.10, {0.9, 0.9, 0.5}, 0.05},
  }};
  // Source task: mid-range palette, distinct from both hospitals.
  static const std::array<TextureParams, kNumClasses> src{{
      {{0.30, 0.45, 0.60}, 1.0, 1.0, 0.10, {0.4, 0.7, 1.0}, 0.03},
      {{0.45, 0.60, 0.35}, 2.5, 0.0, 0.10, {0.5, 1.0, 0.5}, -0.03},
      {{0.25, 0.30, 0.45}, 0.0, 2.5, 0.12, {0.5, 0.5, 1.0}, 0.04},
      {{0.50, 0.35, 0.55}, 3.5, 3.5, 0.09, {0.9, 0.5, 1.0}, 0.00},
      {{0.35, 0.55, 0.50}, 4.5, 1.5, 0.11, {0.5, 1.0, 0.9}, -0.04},
      {{0.55, 0.50, 0.30}, 1.5, 4.5, 0.10, {1.0, 0.9, 0.4}, 0.02},
  }};
  switch (s) {
    case Source::kA: return a;
    case Source::kB: return b;
    case Source::kS: return src;
  }
  return a;
}

// Per-sample variation.
inline constexpr double kColorJitter = 0.025;
inline constexpr double kShadeJitter = 0.03;
inline constexpr double kFreqJitter = 0.25;
inline constexpr double kAmplitudeJitter = 0.3;
inline constexpr double kSpeckle = 0.05;

/// Deterministically renders sample `id` under `seed`.
inline Image render_sample(std::uint64_t seed, std::uint64_t id,
                           const ImageGeometry& geom) {
  const Source source = id_source(id);
  const int label = id_label(id);
  if (label < 0 || label >= static_cast<int>(kNumClasses))
    throw InputError("sample id carries an invalid label");
  const TextureParams& t = texture_table(source)[static_cast<std::size_t>(label)];
  Rng rng = derive_stream(seed, {id, fnv1a("pixels")});

  std::array<double, 3> base{};
  const double shade = kShadeJitter * rng.normal();
  for (std::size_t c = 0; c < 3; ++c) base[c] = t.base[c] + shade + kColorJitter * rng.normal();
  const double fx = t.freq_x + kFreqJitter * (2.0 * rng.uniform() - 1.0);
  const double fy = t.freq_y + kFreqJitter * (2.0 * rng.uniform() - 1.0);
  const double amp = t.amplitude * (1.0 + kAmplitudeJitter * (2.0 * rng.uniform() - 1.0));
  const double phase = 2.0 * std::numbers::pi * rng.uniform();

  Image img(geom.height, geom.width, geom.channels);
  const double cy = 0.5 * static_cast<double>(geom.height - 1);
  const double cx = 0.5 * static_cast<double>(geom.width - 1);
  const double rmax = std::sqrt(cy * cy + cx * cx) + 1e-12;
  for (std::size_t y = 0; y < geom.height; ++y) {
    for (std::size_t x = 0; x < geom.width; ++x) {
      const double u = static_cast<double>(x) / static_cast<double>(geom.width);
      const double v = static_cast<double>(y) / static_cast<double>(geom.height);
      const double wave = std::sin(2.0 * std::numbers::pi * (fx * u + fy * v) + phase);
      const double dy = static_cast<double>(y) - cy;
      const double dx = static_cast<double>(x) - cx;
      const double radial = std::sqrt(dy * dy + dx * dx) / rmax;
      for (std::size_t c = 0; c < geom.channels; ++c) {
        const std::size_t k = c % 3;
        const double value = base[k] + amp * t.chroma[k] * wave -
                             t.vignette * radial + kSpeckle * rng.normal();
        img.at(y, x, c) = std::clamp(value, 0.0, 1.0);
      }
    }
  }
  return img;
}

inline LabeledSample make_sample(std::uint64_t seed, std::uint64_t id,
                                 const ImageGeometry& geom) {
  const Source s = id_source(id);
  const int label = id_label(id);
  return {id, s, label,
          std::string(class_names(s)[static_cast<std::size_t>(label)]),
          render_sample(seed, id, geom), std::nullopt};
}

/// `num_per_class` samples for every class of `source`, ordered by id.
inline std::vector<LabeledSample> generate_dataset(Source source, int num_per_class,
                                                   std::uint64_t seed,
                                                   const ImageGeometry& geom = {}) {
  if (num_per_class < 1) throw InputError("num_per_class must be >= 1");
  if (geom.height < 1 || geom.width < 1 || geom.channels < 1)
    throw InputError("image geometry must be positive");
  std::vector<LabeledSample> out;
  out.reserve(kNumClasses * static_cast<std::size_t>(num_per_class));
  for (int label = 0; label < static_cast<int>(kNumClasses); ++label)
    for (int i = 0; i < num_per_class; ++i)
      out.push_back(make_sample(
          seed, make_sample_id(source, label, static_cast<std::uint32_t>(i)), geom));
  return out;
}

}  // namespace fedstone

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedstone/data/image.hpp"
#include "fedstone/errors.hpp"
#include "fedstone/random.hpp"

namespace fedstone {

/// Per-channel standardization table. The default is the ImageNet table, the
/// usual companion of ImageNet-style pretraining.
struct NormalizationStats {
  std::vector<double> mean{0.485, 0.456, 0.406};
  std::vector<double> std{0.229, 0.224, 0.225};

  void validate(std::size_t channels) const {
    if (mean.size() != channels || std.size() != channels)
      throw ConfigError("normalization table has " + std::to_string(mean.size()) +
                        " channels, image has " + std::to_string(channels));
    for (double s : std)
      if (!(s > 0.0)) throw ConfigError("normalization std must be positive");
  }

  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

inline NormalizationStats default_stats(std::size_t channels) {
  if (channels == 3) return {};
  return {std::vector<double>(channels, 0.5), std::vector<double>(channels, 0.25)};
}

inline constexpr std::size_t kCropPadding = 4;
inline constexpr std::size_t kEvalResizeMargin = 4;

/// Random draws of one training augmentation, in the order they are taken
/// from the stream: vertical offset, horizontal offset, flip.
struct AugmentDraws {
  std::size_t offset_y = kCropPadding;
  std::size_t offset_x = kCropPadding;
  bool flip = false;
};

inline AugmentDraws draw_augment(Rng& rng, std::size_t pad = kCropPadding) {
  AugmentDraws d;
  d.offset_y = static_cast<std::size_t>(rng.uniform_index(2 * pad + 1));
  d.offset_x = static_cast<std::size_t>(rng.uniform_index(2 * pad + 1));
  d.flip = rng.uniform() < 0.5;
  return d;
}

inline void standardize_into(const Image& img, const NormalizationStats& stats,
                             std::span<double> out) {
  stats.validate(img.channels);
  if (out.size() != img.size()) throw InputError("feature buffer has the wrong size");
  for (std::size_t i = 0; i < img.size(); ++i) {
    const std::size_t c = i % img.channels;
    out[i] = (img.pixels[i] - stats.mean[c]) / stats.std[c];
  }
}

/// Edge-padded crop, optional horizontal flip, then standardization, written
/// straight into `out` (H*W*C values, HWC order).
inline void train_transform_into(const Image& img, const AugmentDraws& d,
                                 const NormalizationStats& stats, std::span<double> out,
                                 std::size_t pad = kCropPadding) {
  stats.validate(img.channels);
  if (out.size() != img.size()) throw InputError("feature buffer has the wrong size");
  const long H = static_cast<long>(img.height);
  const long W = static_cast<long>(img.width);
  const std::size_t C = img.channels;
  std::size_t k = 0;
  for (long y = 0; y < H; ++y) {
    const long sy = std::clamp(y + static_cast<long>(d.offset_y) - static_cast<long>(pad), 0L, H - 1);
    for (long x = 0; x < W; ++x) {
      const long cx = d.flip ? W - 1 - x : x;
      const long sx = std::clamp(cx + static_cast<long>(d.offset_x) - static_cast<long>(pad), 0L, W - 1);
      const double* px = img.pixels.data() + (static_cast<std::size_t>(sy * W + sx)) * C;
      for (std::size_t c = 0; c < C; ++c) out[k++] = (px[c] - stats.mean[c]) / stats.std[c];
    }
  }
}

/// Training-time pipeline: random crop, random horizontal flip (p = 0.5),
/// standardization. All randomness comes from `rng`.
inline std::vector<double> train_transform(const Image& img, Rng& rng,
                                           const NormalizationStats& stats) {
  std::vector<double> out(img.size());
  train_transform_into(img, draw_augment(rng), stats, out);
  return out;
}

inline std::vector<double> train_transform(const Image& img, const AugmentDraws& d,
                                           const NormalizationStats& stats) {
  std::vector<double> out(img.size());
  train_transform_into(img, d, stats, out);
  return out;
}

/// Deterministic geometric part of evaluation: resize to (H+4) x (W+4) and
/// centre-crop back to H x W.
inline Image eval_geometry(const Image& img, std::size_t height, std::size_t width) {
  return center_crop(resize_bilinear(img, height + kEvalResizeMargin, width + kEvalResizeMargin),
                     height, width);
}

inline std::vector<double> eval_transform(const Image& img, const NormalizationStats& stats) {
  const Image g = eval_geometry(img, img.height, img.width);
  std::vector<double> out(g.size());
  standardize_into(g, stats, out);
  return out;
}

}  // namespace fedstone

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fedstone/errors.hpp"

namespace fedstone {

/// H x W x C pixel intensities in [0, 1], stored HWC.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  std::size_t index(std::size_t y, std::size_t x, std::size_t c) const {
    return (y * width + x) * channels + c;
  }
  double& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[index(y, x, c)]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[index(y, x, c)];
  }

  /// Edge-replicated access for signed coordinates.
  double clamped(long y, long x, std::size_t c) const {
    y = std::clamp(y, 0L, static_cast<long>(height) - 1);
    x = std::clamp(x, 0L, static_cast<long>(width) - 1);
    return at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c);
  }

  std::size_t size() const { return pixels.size(); }

  void clamp01() {
    for (double& v : pixels) v = std::clamp(v, 0.0, 1.0);
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Crops an H x W window whose top-left corner sits at (oy - pad, ox - pad)
/// of the source, replicating edges outside it.
inline Image padded_crop(const Image& src, std::size_t pad, std::size_t oy,
                         std::size_t ox) {
  Image out(src.height, src.width, src.channels);
  for (std::size_t y = 0; y < src.height; ++y)
    for (std::size_t x = 0; x < src.width; ++x)
      for (std::size_t c = 0; c < src.channels; ++c)
        out.at(y, x, c) = src.clamped(static_cast<long>(y + oy) - static_cast<long>(pad),
                                      static_cast<long>(x + ox) - static_cast<long>(pad), c);
  return out;
}

inline Image hflip(const Image& src) {
  Image out(src.height, src.width, src.channels);
  for (std::size_t y = 0; y < src.height; ++y)
    for (std::size_t x = 0; x < src.width; ++x)
      for (std::size_t c = 0; c < src.channels; ++c)
        out.at(y, src.width - 1 - x, c) = src.at(y, x, c);
  return out;
}

/// Bilinear resize with half-pixel centers.
inline Image resize_bilinear(const Image& src, std::size_t out_h, std::size_t out_w) {
  if (src.height == 0 || src.width == 0) throw InputError("cannot resize an empty image");
  Image out(out_h, out_w, src.channels);
  const double sy = static_cast<double>(src.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(src.width) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::max(0.0, (static_cast<double>(y) + 0.5) * sy - 0.5);
    const auto y0 = static_cast<long>(std::floor(fy));
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::max(0.0, (static_cast<double>(x) + 0.5) * sx - 0.5);
      const auto x0 = static_cast<long>(std::floor(fx));
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < src.channels; ++c) {
        const double top = (1 - wx) * src.clamped(y0, x0, c) + wx * src.clamped(y0, x0 + 1, c);
        const double bot =
            (1 - wx) * src.clamped(y0 + 1, x0, c) + wx * src.clamped(y0 + 1, x0 + 1, c);
        out.at(y, x, c) = (1 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

inline Image center_crop(const Image& src, std::size_t out_h, std::size_t out_w) {
  if (out_h > src.height || out_w > src.width)
    throw InputError("center crop larger than source image");
  const std::size_t oy = (src.height - out_h) / 2;
  const std::size_t ox = (src.width - out_w) / 2;
  Image out(out_h, out_w, src.channels);
  for (std::size_t y = 0; y < out_h; ++y)
    for (std::size_t x = 0; x < out_w; ++x)
      for (std::size_t c = 0; c < src.channels; ++c)
        out.at(y, x, c) = src.at(y + oy, x + ox, c);
  return out;
}

}  // namespace fedstone

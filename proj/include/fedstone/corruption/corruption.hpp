#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedstone/corruption/kinds.hpp"
#include "fedstone/data/dataset.hpp"
#include "fedstone/data/image.hpp"
#include "fedstone/data/manifest.hpp"
#include "fedstone/errors.hpp"
#include "fedstone/io.hpp"
#include "fedstone/random.hpp"

namespace fedstone {

/// Severity -> operator parameter, indexed by severity - 1.
struct SeverityTables {
  std::string version;
  std::array<double, 5> gaussian_sigma;
  std::array<double, 5> impulse_fraction;
  std::array<int, 5> defocus_radius;
  std::array<int, 5> motion_length;
  std::array<double, 5> brightness_delta;  // darkness uses the negation
  std::array<double, 5> contrast_factor;
  std::array<double, 5> fog_alpha;
};

/// Release constants. Results are only comparable across runs that share
/// these tables, so they are not configurable.
inline const SeverityTables& release_tables() {
  static const SeverityTables t{
      "v1",
      {0.04, 0.06, 0.08, 0.10, 0.14},
      {0.01, 0.02, 0.03, 0.05, 0.07},
      {1, 2, 3, 4, 5},
      {3, 5, 7, 9, 11},
      {0.1, 0.15, 0.2, 0.25, 0.3},
      {0.75, 0.6, 0.5, 0.4, 0.3},
      {0.1, 0.18, 0.26, 0.34, 0.42},
  };
  return t;
}

/// Tables under which every operator is the identity.
inline const SeverityTables& identity_tables() {
  static const SeverityTables t{
      "identity", {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {1, 1, 1, 1, 1},
      {0, 0, 0, 0, 0},          {1, 1, 1, 1, 1}, {0, 0, 0, 0, 0},
  };
  return t;
}

/// Textual form of the tables, as printed by `fedstone corrupt --print-tables`.
inline std::string format_tables(const SeverityTables& t) {
  std::ostringstream out;
  auto row = [&out](std::string_view kind, std::string_view param, const auto& values,
                    double sign = 1.0) {
    out << kind << ',' << param;
    for (auto v : values) out << ',' << format_double(sign * static_cast<double>(v));
    out << '\n';
  };
  out << "# fedstone severity tables " << t.version << '\n';
  out << "kind,parameter,s1,s2,s3,s4,s5\n";
  row("gaussian_noise", "sigma", t.gaussian_sigma);
  row("impulse_noise", "flip_fraction", t.impulse_fraction);
  row("defocus_blur", "disc_radius_px", t.defocus_radius);
  row("motion_blur", "kernel_length_px", t.motion_length);
  row("brightness", "delta", t.brightness_delta);
  row("darkness", "delta", t.brightness_delta, -1.0);
  row("contrast", "factor", t.contrast_factor);
  row("fog", "alpha", t.fog_alpha);
  return out.str();
}

inline std::uint64_t tables_hash(const SeverityTables& t) { return fnv1a(format_tables(t)); }

namespace detail {

inline Image convolve(const Image& img, const std::vector<std::pair<int, int>>& taps) {
  const double w = 1.0 / static_cast<double>(taps.size());
  Image out(img.height, img.width, img.channels);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c) {
        double s = 0.0;
        for (auto [dy, dx] : taps)
          s += img.clamped(static_cast<long>(y) + dy, static_cast<long>(x) + dx, c);
        out.at(y, x, c) = s * w;
      }
  return out;
}

inline Image defocus(const Image& img, int radius) {
  if (radius <= 0) return img;
  std::vector<std::pair<int, int>> taps;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dy * dy + dx * dx <= radius * radius) taps.emplace_back(dy, dx);
  return convolve(img, taps);
}

inline Image motion(const Image& img, int length) {
  if (length <= 1) return img;
  std::vector<std::pair<int, int>> taps;
  const int half = (length - 1) / 2;
  for (int dx = -half; dx <= length - 1 - half; ++dx) taps.emplace_back(0, dx);
  return convolve(img, taps);
}

/// Diamond-square fractal on a toroidal size x size grid (size a power of
/// two), rescaled to [0, 1].
inline std::vector<double> plasma_field(std::size_t size, std::uint64_t seed,
                                        double decay = 2.0) {
  std::vector<double> map(size * size, 0.0);
  auto at = [&](std::size_t y, std::size_t x) -> double& {
    return map[(y % size) * size + (x % size)];
  };
  Rng rng(seed);
  double wibble = 100.0;
  for (std::size_t step = size; step >= 2; step /= 2) {
    const std::size_t half = step / 2;
    for (std::size_t y = 0; y < size; y += step)
      for (std::size_t x = 0; x < size; x += step)
        at(y + half, x + half) =
            0.25 * (at(y, x) + at(y, x + step) + at(y + step, x) + at(y + step, x + step)) +
            wibble * rng.uniform(-1.0, 1.0);
    for (std::size_t y = 0; y < size; y += step)
      for (std::size_t x = 0; x < size; x += step) {
        // diamond centres at (y, x + half) and (y + half, x)
        const std::size_t y1 = y, x1 = x + half;
        at(y1, x1) = 0.25 * (at(y1 + size - half, x1) + at(y1 + half, x1) + at(y1, x1 - half) +
                             at(y1, x1 + half)) +
                     wibble * rng.uniform(-1.0, 1.0);
        const std::size_t y2 = y + half, x2 = x;
        at(y2, x2) = 0.25 * (at(y2 - half, x2) + at(y2 + half, x2) + at(y2, x2 + size - half) +
                             at(y2, x2 + half)) +
                     wibble * rng.uniform(-1.0, 1.0);
      }
    wibble /= decay;
  }
  const auto [lo, hi] = std::minmax_element(map.begin(), map.end());
  const double min = *lo, range = *hi - *lo;
  for (double& v : map) v = range > 0.0 ? (v - min) / range : 0.5;
  return map;
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 2;
  while (p < n) p *= 2;
  return p;
}

}  // namespace detail

/// Applies one corruption. Noise kinds draw from `rng`; fog takes a single
/// 64-bit draw to seed its plasma field; the remaining kinds are
/// deterministic. Output is clamped to [0, 1].
inline Image apply_corruption(const Image& image, const CorruptionSpec& spec, Rng& rng,
                              const SeverityTables& tables = release_tables()) {
  spec.validate();
  const auto s = static_cast<std::size_t>(spec.severity - 1);
  Image out = image;
  switch (spec.kind) {
    case CorruptionKind::kGaussianNoise: {
      const double sigma = tables.gaussian_sigma[s];
      for (double& v : out.pixels) v += sigma * rng.normal();
      break;
    }
    case CorruptionKind::kImpulseNoise: {
      const double frac = tables.impulse_fraction[s];
      for (double& v : out.pixels) {
        const double u = rng.uniform();
        const double salt = rng.uniform();
        if (u < frac) v = salt < 0.5 ? 0.0 : 1.0;
      }
      break;
    }
    case CorruptionKind::kDefocusBlur:
      out = detail::defocus(image, tables.defocus_radius[s]);
      break;
    case CorruptionKind::kMotionBlur:
      out = detail::motion(image, tables.motion_length[s]);
      break;
    case CorruptionKind::kBrightness:
      for (double& v : out.pixels) v += tables.brightness_delta[s];
      break;
    case CorruptionKind::kDarkness:
      for (double& v : out.pixels) v -= tables.brightness_delta[s];
      break;
    case CorruptionKind::kContrast: {
      const double f = tables.contrast_factor[s];
      if (f == 1.0) break;
      const std::size_t C = out.channels;
      const std::size_t n = out.height * out.width;
      for (std::size_t c = 0; c < C; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += image.pixels[i * C + c];
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
          out.pixels[i * C + c] = (image.pixels[i * C + c] - mean) * f + mean;
      }
      break;
    }
    case CorruptionKind::kFog: {
      const double alpha = tables.fog_alpha[s];
      const std::uint64_t plasma_seed = rng.next_u64();
      if (alpha == 0.0) break;
      const std::size_t size = detail::next_pow2(std::max(image.height, image.width));
      const auto field = detail::plasma_field(size, plasma_seed);
      for (std::size_t y = 0; y < out.height; ++y)
        for (std::size_t x = 0; x < out.width; ++x)
          for (std::size_t c = 0; c < out.channels; ++c) {
            double& v = out.at(y, x, c);
            v = v * (1.0 - alpha) + alpha * field[y * size + x];
          }
      break;
    }
  }
  out.clamp01();
  return out;
}

/// Kind uniform over all kinds and severity uniform over 1..5, independent.
inline CorruptionSpec sample_corruption(Rng& rng) {
  CorruptionSpec spec;
  spec.kind = kAllCorruptionKinds[rng.uniform_index(kNumCorruptionKinds)];
  spec.severity = kMinSeverity + static_cast<int>(rng.uniform_index(kMaxSeverity - kMinSeverity + 1));
  return spec;
}

/// Corrupts every sample with an independently sampled spec. Each sample
/// draws from its own stream derived from (seed, sample id), and records the
/// spec it received. `fixed_severity` pins the level while kinds stay uniform.
inline std::vector<LabeledSample> corrupt_dataset(std::vector<LabeledSample> samples,
                                                  std::uint64_t seed,
                                                  const SeverityTables& tables = release_tables(),
                                                  std::optional<int> fixed_severity = std::nullopt) {
  if (fixed_severity) CorruptionSpec{CorruptionKind::kGaussianNoise, *fixed_severity}.validate();
  for (auto& s : samples) {
    Rng rng = derive_stream(seed, {s.id, fnv1a("corrupt")});
    CorruptionSpec spec = sample_corruption(rng);
    if (fixed_severity) spec.severity = *fixed_severity;
    s.image = apply_corruption(s.image, spec, rng, tables);
    s.corruption = spec;
  }
  return samples;
}

/// Rebuilds the pixels of a corrupted manifest: clean regeneration from
/// (seed, id), then the recorded spec replayed on the sample's corruption
/// stream.
inline std::vector<LabeledSample> materialize_corrupted(const DatasetManifest& m,
                                                        const SeverityTables& tables = release_tables()) {
  std::vector<LabeledSample> out = materialize(m);
  if (!m.corruption_seed) return out;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& spec = m.records[i].corruption;
    if (!spec) continue;
    Rng rng = derive_stream(*m.corruption_seed, {out[i].id, fnv1a("corrupt")});
    (void)sample_corruption(rng);
    out[i].image = apply_corruption(out[i].image, *spec, rng, tables);
    out[i].corruption = spec;
  }
  return out;
}

/// One panel per corruption kind at `severity`, laid out 2 x 4 with a
/// one-pixel white gutter.
inline Image contact_sheet(const Image& image, int severity, std::uint64_t seed,
                           const SeverityTables& tables = release_tables()) {
  constexpr std::size_t kCols = 4, kRows = 2, kGutter = 1;
  const std::size_t H = image.height, W = image.width;
  Image sheet(kRows * H + (kRows + 1) * kGutter, kCols * W + (kCols + 1) * kGutter,
              image.channels, 1.0);
  for (std::size_t k = 0; k < kNumCorruptionKinds; ++k) {
    Rng rng = derive_stream(seed, {k, fnv1a("contact_sheet")});
    const Image panel = apply_corruption(image, {kAllCorruptionKinds[k], severity}, rng, tables);
    const std::size_t oy = kGutter + (k / kCols) * (H + kGutter);
    const std::size_t ox = kGutter + (k % kCols) * (W + kGutter);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        for (std::size_t c = 0; c < image.channels; ++c)
          sheet.at(oy + y, ox + x, c) = panel.at(y, x, c);
  }
  return sheet;
}

/// Binary PPM (P6); non-RGB images are written from their first channel.
inline std::string encode_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n255\n";
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = img.at(y, x, img.channels == 3 ? c : 0);
        out.push_back(static_cast<char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
      }
  return out;
}

}  // namespace fedstone

#pragma once

// Seeded synthetic images for training and reconstruction tests: random
// piecewise-constant scenes with a touch of smoothing, plus a fixed
// piecewise-constant phantom.

#include <adaptive_ridge/core.hpp>
#include <adaptive_ridge/rng.hpp>

namespace synth {

using ridge::Image;
using ridge::Rng;

// Random rectangles and ellipses over a flat background; values in [0, 1].
inline Image scene(int h, int w, Rng& rng, int n_shapes = 6) {
  Image im(h, w, rng.uniform(0.1, 0.4));
  for (int s = 0; s < n_shapes; ++s) {
    double value = rng.uniform(0.0, 1.0);
    bool ellipse = rng.uniform() < 0.5;
    double cy = rng.uniform(0.0, h), cx = rng.uniform(0.0, w);
    double ry = rng.uniform(0.08, 0.35) * h, rx = rng.uniform(0.08, 0.35) * w;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double dy = (r - cy) / ry, dx = (c - cx) / rx;
        bool inside = ellipse ? (dy * dy + dx * dx <= 1.0)
                              : (std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0);
        if (inside) im.at(r, c) = value;
      }
  }
  // light 3x3 blur keeps edges but avoids single-pixel staircases
  Image out(h, w, 0.0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double acc = 0.0;
      int cnt = 0;
      for (int a = std::max(0, r - 1); a <= std::min(h - 1, r + 1); ++a)
        for (int b = std::max(0, c - 1); b <= std::min(w - 1, c + 1); ++b) {
          acc += im.at(a, b);
          ++cnt;
        }
      out.at(r, c) = acc / cnt;
    }
  return out;
}

inline std::vector<Image> scenes(int count, int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Image> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(scene(h, w, rng));
  return out;
}

// Fixed piecewise-constant phantom: background, one disk, one bar.
inline Image phantom(int h, int w) {
  Image im(h, w, 0.2);
  double cy = 0.42 * h, cx = 0.40 * w, rad = 0.22 * std::min(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      double dy = r - cy, dx = c - cx;
      if (dy * dy + dx * dx <= rad * rad) im.at(r, c) = 0.85;
    }
  int bar_lo = static_cast<int>(0.70 * h), bar_hi = static_cast<int>(0.82 * h);
  for (int r = bar_lo; r < bar_hi; ++r)
    for (int c = static_cast<int>(0.15 * w); c < static_cast<int>(0.9 * w); ++c)
      im.at(r, c) = 0.55;
  return im;
}

// Random image with entries uniform in [0, 1].
inline Image uniform_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  Image im(h, w);
  for (double& v : im.data) v = rng.uniform();
  return im;
}

inline Image gaussian_image(int h, int w, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Image im(h, w);
  for (double& v : im.data) v = scale * rng.normal();
  return im;
}

}  // namespace synth

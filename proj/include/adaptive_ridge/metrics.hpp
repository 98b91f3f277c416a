#pragma once

#include <limits>
#include <vector>

#include "core.hpp"

namespace ridge {

// 10 log10(peak^2 / MSE); +inf when the images match exactly.
inline double psnr(const std::vector<double>& x, const std::vector<double>& ref,
                   double peak = 1.0) {
  require(x.size() == ref.size() && !x.empty(), "psnr: shape mismatch");
  double mse = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - ref[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

inline double psnr(const Image& x, const Image& ref, double peak = 1.0) {
  require(same_shape(x, ref), "psnr: shape mismatch");
  return psnr(x.data, ref.data, peak);
}

// SSIM with the standard 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, averaged over positions where the window fits entirely.
inline double ssim(const Image& x, const Image& ref, double peak = 1.0) {
  require(same_shape(x, ref), "ssim: shape mismatch");
  constexpr int win = 11;
  constexpr double win_sigma = 1.5;
  require(x.height >= win && x.width >= win, "ssim: image smaller than the 11x11 window");

  static const std::vector<double> weights = [] {
    std::vector<double> w(win * win);
    double sum = 0.0;
    for (int a = 0; a < win; ++a)
      for (int b = 0; b < win; ++b) {
        double da = a - (win - 1) / 2.0, db = b - (win - 1) / 2.0;
        double v = std::exp(-(da * da + db * db) / (2.0 * win_sigma * win_sigma));
        w[a * win + b] = v;
        sum += v;
      }
    for (double& v : w) v /= sum;
    return w;
  }();

  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  double total = 0.0;
  int count = 0;
  for (int r = 0; r + win <= x.height; ++r) {
    for (int c = 0; c + win <= x.width; ++c) {
      double mx = 0.0, my = 0.0;
      for (int a = 0; a < win; ++a)
        for (int b = 0; b < win; ++b) {
          double w = weights[a * win + b];
          mx += w * x.at(r + a, c + b);
          my += w * ref.at(r + a, c + b);
        }
      double vx = 0.0, vy = 0.0, cov = 0.0;
      for (int a = 0; a < win; ++a)
        for (int b = 0; b < win; ++b) {
          double w = weights[a * win + b];
          double dx = x.at(r + a, c + b) - mx;
          double dy = ref.at(r + a, c + b) - my;
          vx += w * dx * dx;
          vy += w * dy * dy;
          cov += w * dx * dy;
        }
      double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
      double den = (mx * mx + my * my + c1) * (vx + vy + c2);
      total += num / den;
      ++count;
    }
  }
  return total / count;
}

}  // namespace ridge

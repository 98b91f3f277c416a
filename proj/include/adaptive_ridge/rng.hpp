#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "core.hpp"

namespace ridge {

// Seeded draws with all transforms pinned here. mt19937_64 output is fixed
// by the standard; std::*_distribution is not, so every consumer goes
// through this class to keep results identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller with cached spare.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * u2);
    have_spare_ = true;
    return r * std::cos(two_pi * u2);
  }

  // Exact product method; means above 500 are split into chunks so the
  // exp(-mean) threshold stays representable.
  long long poisson(double mean) {
    require(std::isfinite(mean) && mean >= 0.0, "poisson: mean must be finite and >= 0");
    long long total = 0;
    while (mean > 500.0) {
      total += poisson_small(500.0);
      mean -= 500.0;
    }
    total += poisson_small(mean);
    return total;
  }

  std::vector<double> normal_vector(int n) {
    std::vector<double> v(n);
    for (double& x : v) x = normal();
    return v;
  }

  std::vector<double> unit_vector(int n) {
    std::vector<double> v;
    double nrm = 0.0;
    do {
      v = normal_vector(n);
      nrm = norm2(v);
    } while (nrm < 1e-12);
    for (double& x : v) x /= nrm;
    return v;
  }

  // Fisher-Yates over an index vector.
  void shuffle(std::vector<int>& idx) {
    for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
      int j = static_cast<int>(engine_() % static_cast<std::uint64_t>(i + 1));
      std::swap(idx[i], idx[j]);
    }
  }

 private:
  long long poisson_small(double mean) {
    if (mean <= 0.0) return 0;
    double limit = std::exp(-mean);
    long long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ridge

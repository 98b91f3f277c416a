#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ridge {

// Raised for malformed configuration or input files (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a computation produces non-finite values or fails to
// converge where convergence is part of the contract (CLI exit code 3).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Single-channel image, row-major.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), data(static_cast<size_t>(h) * static_cast<size_t>(w), fill) {}

  double& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * width + c]; }
  int size() const { return height * width; }
};

using ChannelStack = std::vector<Image>;

inline bool same_shape(const Image& a, const Image& b) {
  return a.height == b.height && a.width == b.width;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void require_finite(const std::vector<double>& v, const std::string& what) {
  if (!all_finite(v)) throw std::invalid_argument(what + ": non-finite value");
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline double dot(const Image& a, const Image& b) { return dot(a.data, b.data); }
inline double norm2(const Image& a) { return norm2(a.data); }

// y += alpha * x
inline void axpy(double alpha, const Image& x, Image& y) {
  for (size_t i = 0; i < y.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Worker-thread cap from ADAPTIVE_RIDGE_THREADS; 0 or unset means auto.
inline int thread_cap() {
  static const int cap = [] {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    const char* s = std::getenv("ADAPTIVE_RIDGE_THREADS");
    if (!s || !*s) return hw;
    int v = std::atoi(s);
    return v <= 0 ? hw : std::min(v, 256);
  }();
  return cap;
}

// Runs fn(i) for i in [0, n). Each call must only touch its own output
// slot; results are then independent of the scheduling order.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
  int workers = std::min(thread_cap(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ridge

#pragma once

#include <vector>

#include "core.hpp"
#include "linalg.hpp"
#include "rng.hpp"

namespace ridge {

// Multichannel 2D correlation with zero padding and same-size output.
// apply_adjoint is the exact transpose of apply by construction, so the
// dot-product test holds to rounding.
class FilterBank {
 public:
  FilterBank(int n_channels, int kernel_size)
      : n_channels_(n_channels), kernel_size_(kernel_size),
        kernels_(n_channels, std::vector<double>(static_cast<size_t>(kernel_size) * kernel_size, 0.0)),
        spectral_norms_(n_channels, 0.0), norm_bounds_(n_channels, 0.0) {
    require(n_channels >= 1, "FilterBank: need at least one channel");
    require(kernel_size >= 1 && kernel_size % 2 == 1, "FilterBank: kernel size must be odd");
  }

  // single channel passing the input through unchanged
  static FilterBank dirac(int kernel_size = 3) {
    FilterBank b(1, kernel_size);
    int c = kernel_size / 2;
    b.kernels_[0][static_cast<size_t>(c) * kernel_size + c] = 1.0;
    b.spectral_norms_[0] = 1.0;
    b.norm_bounds_[0] = 1.0;
    return b;
  }

  // zero-mean random kernels; the usual toy initialization before
  // normalize_spectral()
  static FilterBank random(int n_channels, int kernel_size, std::uint64_t seed) {
    FilterBank b(n_channels, kernel_size);
    Rng rng(seed);
    for (auto& k : b.kernels_) {
      double mean = 0.0;
      for (auto& v : k) {
        v = rng.normal();
        mean += v;
      }
      mean /= static_cast<double>(k.size());
      for (auto& v : k) v -= mean;
    }
    return b;
  }

  int n_channels() const { return n_channels_; }
  int kernel_size() const { return kernel_size_; }
  const std::vector<double>& kernel(int c) const { return kernels_[c]; }
  double spectral_norm(int c) const { return spectral_norms_[c]; }

  void set_kernel(int c, std::vector<double> k) {
    require(static_cast<int>(k.size()) == kernel_size_ * kernel_size_, "set_kernel: size mismatch");
    require_finite(k, "set_kernel");
    kernels_[c] = std::move(k);
    spectral_norms_[c] = 0.0;
    norm_bounds_[c] = compute_norm_bound(c);
  }

  // Rigorous upper bound on the channel operator norm valid for every grid
  // size: the zero-padded operator is dominated by convolution on the full
  // plane, whose norm is the sup of the kernel's frequency response. The sup
  // is sampled densely and padded by the response's Lipschitz modulus.
  double channel_norm_upper_bound(int c) const {
    return norm_bounds_[c] > 0.0 ? norm_bounds_[c] : compute_norm_bound(c);
  }

  Image apply_channel(int c, const Image& x) const {
    check_dims(x);
    const auto& k = kernels_[c];
    const int off = kernel_size_ / 2;
    Image out(x.height, x.width, 0.0);
    for (int r = 0; r < x.height; ++r) {
      for (int col = 0; col < x.width; ++col) {
        double acc = 0.0;
        for (int a = 0; a < kernel_size_; ++a) {
          int rr = r + a - off;
          if (rr < 0 || rr >= x.height) continue;
          const double* xrow = &x.data[static_cast<size_t>(rr) * x.width];
          const double* krow = &k[static_cast<size_t>(a) * kernel_size_];
          for (int b = 0; b < kernel_size_; ++b) {
            int cc = col + b - off;
            if (cc < 0 || cc >= x.width) continue;
            acc += krow[b] * xrow[cc];
          }
        }
        out.at(r, col) = acc;
      }
    }
    return out;
  }

  // transpose of apply_channel: scatter each response back through the taps
  Image adjoint_channel(int c, const Image& resp) const {
    const auto& k = kernels_[c];
    const int off = kernel_size_ / 2;
    Image out(resp.height, resp.width, 0.0);
    for (int r = 0; r < resp.height; ++r) {
      for (int col = 0; col < resp.width; ++col) {
        double v = resp.at(r, col);
        if (v == 0.0) continue;
        for (int a = 0; a < kernel_size_; ++a) {
          int rr = r + a - off;
          if (rr < 0 || rr >= resp.height) continue;
          double* orow = &out.data[static_cast<size_t>(rr) * resp.width];
          const double* krow = &k[static_cast<size_t>(a) * kernel_size_];
          for (int b = 0; b < kernel_size_; ++b) {
            int cc = col + b - off;
            if (cc < 0 || cc >= resp.width) continue;
            orow[cc] += krow[b] * v;
          }
        }
      }
    }
    return out;
  }

  ChannelStack apply(const Image& x) const {
    ChannelStack out(n_channels_);
    for (int c = 0; c < n_channels_; ++c) out[c] = apply_channel(c, x);
    return out;
  }

  Image apply_adjoint(const ChannelStack& resp) const {
    require(static_cast<int>(resp.size()) == n_channels_, "apply_adjoint: channel count mismatch");
    Image out(resp[0].height, resp[0].width, 0.0);
    for (int c = 0; c < n_channels_; ++c) {
      require(same_shape(resp[c], out), "apply_adjoint: response shape mismatch");
      Image part = adjoint_channel(c, resp[c]);
      axpy(1.0, part, out);
    }
    return out;
  }

  // Largest singular value of one channel on a grid x grid image, by power
  // iteration on W^T W with an extrapolated stopping test so the returned
  // eigenvalue is within tol of the limit.
  double channel_norm_estimate(int c, int grid = 32, double tol = 1e-8, int max_iters = 500,
                               std::uint64_t seed = 7771) const {
    Rng rng(seed);
    Image v(grid, grid);
    for (auto& x : v.data) x = rng.normal();
    double nv = norm2(v);
    for (auto& x : v.data) x /= nv;
    double lambda = 0.0, prev_change = 0.0;
    for (int it = 0; it < max_iters; ++it) {
      Image av = adjoint_channel(c, apply_channel(c, v));
      double new_lambda = dot(v, av);
      double na = norm2(av);
      if (na < 1e-300) return 0.0;
      for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = av.data[i] / na;
      double change = std::abs(new_lambda - lambda);
      if (it > 2 && new_lambda > 0.0) {
        // geometric extrapolation of the remaining error
        double rho = prev_change > 0.0 ? std::min(change / prev_change, 0.999) : 0.0;
        double projected = change * rho / (1.0 - rho);
        if ((change + projected) / new_lambda < tol) {
          lambda = new_lambda;
          break;
        }
      }
      prev_change = change;
      lambda = new_lambda;
    }
    return std::sqrt(std::max(lambda, 0.0));
  }

  struct NormalizeReport {
    std::vector<double> norms;       // estimates before scaling
    std::vector<int> zero_channels;  // left untouched
  };

  NormalizeReport normalize_spectral(double tol = 1e-8, int max_iters = 500, int grid = 32,
                                     std::uint64_t seed = 7771) {
    NormalizeReport rep;
    rep.norms.resize(n_channels_, 0.0);
    for (int c = 0; c < n_channels_; ++c) {
      bool all_zero = true;
      for (double v : kernels_[c])
        if (v != 0.0) all_zero = false;
      if (all_zero) {
        rep.zero_channels.push_back(c);
        spectral_norms_[c] = 0.0;
        continue;
      }
      double nrm = channel_norm_estimate(c, grid, tol, max_iters, seed);
      rep.norms[c] = nrm;
      if (nrm <= 0.0) {
        rep.zero_channels.push_back(c);
        spectral_norms_[c] = 0.0;
        continue;
      }
      for (double& v : kernels_[c]) v /= nrm;
      spectral_norms_[c] = 1.0;
      norm_bounds_[c] = compute_norm_bound(c);
    }
    return rep;
  }

 private:
  void check_dims(const Image& x) const {
    // zero padding keeps the correlation well defined even when the image is
    // smaller than the kernel (the coercivity diagnostics rely on tiny grids)
    require(x.height >= 1 && x.width >= 1, "FilterBank: empty image");
  }

  double compute_norm_bound(int c) const {
    const auto& k = kernels_[c];
    const int ks = kernel_size_;
    const int off = ks / 2;
    constexpr int m = 1024;
    constexpr double two_pi = 6.283185307179586476925286766559;
    // separable phasor tables over one frequency axis
    std::vector<double> cos_t(static_cast<size_t>(m) * ks), sin_t(static_cast<size_t>(m) * ks);
    for (int w = 0; w < m; ++w) {
      double omega = two_pi * w / m;
      for (int a = 0; a < ks; ++a) {
        cos_t[static_cast<size_t>(w) * ks + a] = std::cos(omega * (a - off));
        sin_t[static_cast<size_t>(w) * ks + a] = std::sin(omega * (a - off));
      }
    }
    double best = 0.0;
    std::vector<double> re_a(ks), im_a(ks);
    for (int wy = 0; wy < m; ++wy) {
      const double* cy = &cos_t[static_cast<size_t>(wy) * ks];
      const double* sy = &sin_t[static_cast<size_t>(wy) * ks];
      for (int a = 0; a < ks; ++a) {
        double re = 0.0, im = 0.0;
        const double* krow = &k[static_cast<size_t>(a) * ks];
        for (int b = 0; b < ks; ++b) {
          re += krow[b] * cy[b];
          im -= krow[b] * sy[b];
        }
        re_a[a] = re;
        im_a[a] = im;
      }
      for (int wx = 0; wx < m; ++wx) {
        const double* cx = &cos_t[static_cast<size_t>(wx) * ks];
        const double* sx = &sin_t[static_cast<size_t>(wx) * ks];
        double re = 0.0, im = 0.0;
        for (int a = 0; a < ks; ++a) {
          re += re_a[a] * cx[a] + im_a[a] * sx[a];
          im += im_a[a] * cx[a] - re_a[a] * sx[a];
        }
        best = std::max(best, re * re + im * im);
      }
    }
    double l1 = 0.0;
    for (double v : k) l1 += std::abs(v);
    return std::sqrt(best) + l1 * off * (two_pi / m);
  }

  int n_channels_;
  int kernel_size_;
  std::vector<std::vector<double>> kernels_;
  std::vector<double> spectral_norms_;
  std::vector<double> norm_bounds_;
};

// Smallest singular value of the vertical stack of all channels (and the
// forward operator, when given) assembled densely on a small grid. Strictly
// positive iff ker(W) (resp. ker(W) with ker(H)) intersects trivially.
template <typename Op>
double kernel_intersection_lower_bound(const FilterBank& bank, const Op* forward, int grid_h,
                                       int grid_w) {
  require(grid_h * grid_w <= 256, "kernel_intersection_lower_bound: grid too large (max 16x16)");
  int n = grid_h * grid_w;
  int rows = bank.n_channels() * n;
  Matrix h_block;
  if (forward) {
    h_block = assemble_dense(*forward, grid_h, grid_w);
    rows += static_cast<int>(h_block.rows());
  }
  Matrix stacked(rows, n);
  Image probe(grid_h, grid_w, 0.0);
  for (int j = 0; j < n; ++j) {
    probe.data[j] = 1.0;
    for (int c = 0; c < bank.n_channels(); ++c) {
      Image resp = bank.apply_channel(c, probe);
      for (int i = 0; i < n; ++i) stacked(c * n + i, j) = resp.data[i];
    }
    probe.data[j] = 0.0;
  }
  if (forward) stacked.bottomRows(h_block.rows()) = h_block;
  return smallest_singular_value(stacked);
}

namespace detail {
struct NoOperator {
  std::vector<double> apply(const Image&) const { return {}; }
};
}  // namespace detail

inline double kernel_intersection_lower_bound(const FilterBank& bank, int grid_h, int grid_w) {
  return kernel_intersection_lower_bound<detail::NoOperator>(bank, nullptr, grid_h, grid_w);
}

}  // namespace ridge

#pragma once

#include <memory>
#include <vector>

#include "core.hpp"
#include "rng.hpp"

namespace ridge {

// Forward map H with an exact-transpose adjoint. Implementations build both
// directions from the same sampling weights, so the dot-product test holds
// to rounding on every kind.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual std::vector<double> apply(const Image& x) const = 0;
  virtual Image adjoint(const std::vector<double>& r) const = 0;

  virtual int input_height() const = 0;
  virtual int input_width() const = 0;
  virtual int output_size() const = 0;

  // natural 2D layout of the data vector for storage (rows * cols = size)
  virtual int output_rows() const { return 1; }
  virtual int output_cols() const { return output_size(); }

  // upper estimate of ||H||_2 (close to the true norm; never below it by
  // more than the stated 1% headroom)
  virtual double norm_estimate() const = 0;

  // cheap warm start for the first reconstruction stage: the backprojection
  // rescaled by the least-squares line fit of H H^T y against y
  virtual Image initial_estimate(const std::vector<double>& y) const {
    Image z = adjoint(y);
    std::vector<double> hz = apply(z);
    double denom = dot(hz, hz);
    if (denom <= 0.0) return z;
    double scale = dot(hz, y) / denom;
    for (double& v : z.data) v *= scale;
    return z;
  }

 protected:
  void check_input(const Image& x) const {
    require(x.height == input_height() && x.width == input_width(),
            "LinearOperator: input shape mismatch");
  }
  void check_output(const std::vector<double>& r) const {
    require(static_cast<int>(r.size()) == output_size(), "LinearOperator: data size mismatch");
  }

  // power iteration on H^T H with geometric extrapolation of the remaining
  // error, padded by 1% so the estimate sits above the true norm
  double power_norm(std::uint64_t seed = 424242, int iters = 300, double tol = 1e-6) const {
    Rng rng(seed);
    Image v(input_height(), input_width());
    for (auto& x : v.data) x = rng.normal();
    double nv = norm2(v);
    for (auto& x : v.data) x /= nv;
    double lambda = 0.0, prev_change = 0.0;
    for (int it = 0; it < iters; ++it) {
      Image av = adjoint(apply(v));
      double new_lambda = dot(v, av);
      double na = norm2(av);
      if (na < 1e-300) return 0.0;
      for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = av.data[i] / na;
      double change = std::abs(new_lambda - lambda);
      if (it > 2 && new_lambda > 0.0) {
        double rho = prev_change > 0.0 ? std::min(change / prev_change, 0.999) : 0.0;
        if ((change + change * rho / (1.0 - rho)) / new_lambda < tol) {
          lambda = new_lambda;
          break;
        }
      }
      prev_change = change;
      lambda = new_lambda;
    }
    return std::sqrt(std::max(lambda, 0.0)) * 1.01;
  }
};

class IdentityOp final : public LinearOperator {
 public:
  IdentityOp(int h, int w) : h_(h), w_(w) {}

  std::vector<double> apply(const Image& x) const override {
    check_input(x);
    return x.data;
  }
  Image adjoint(const std::vector<double>& r) const override {
    check_output(r);
    Image out(h_, w_);
    out.data = r;
    return out;
  }
  int input_height() const override { return h_; }
  int input_width() const override { return w_; }
  int output_size() const override { return h_ * w_; }
  int output_rows() const override { return h_; }
  int output_cols() const override { return w_; }
  double norm_estimate() const override { return 1.0; }
  Image initial_estimate(const std::vector<double>& y) const override { return adjoint(y); }

 private:
  int h_, w_;
};

// Correlation with a Gaussian kernel followed by row/column subsampling.
// The kernel size may be even; its anchor is (size-1)/2 rounded down.
class BlurStrideOp final : public LinearOperator {
 public:
  BlurStrideOp(int h, int w, int kernel_size = 16, double kernel_std = 2.0, int stride = 4)
      : h_(h), w_(w), ks_(kernel_size), stride_(stride) {
    require(kernel_size >= 1 && stride >= 1, "BlurStrideOp: bad kernel/stride");
    out_h_ = (h_ + stride_ - 1) / stride_;
    out_w_ = (w_ + stride_ - 1) / stride_;
    kernel_.assign(static_cast<size_t>(ks_) * ks_, 0.0);
    double centre = 0.5 * (ks_ - 1);
    double sum = 0.0;
    for (int a = 0; a < ks_; ++a)
      for (int b = 0; b < ks_; ++b) {
        double da = a - centre, db = b - centre;
        double v = std::exp(-(da * da + db * db) / (2.0 * kernel_std * kernel_std));
        kernel_[static_cast<size_t>(a) * ks_ + b] = v;
        sum += v;
      }
    for (double& v : kernel_) v /= sum;
    norm_ = power_norm();  // eager so concurrent reads stay safe
  }

  std::vector<double> apply(const Image& x) const override {
    check_input(x);
    std::vector<double> out(static_cast<size_t>(out_h_) * out_w_, 0.0);
    const int off = (ks_ - 1) / 2;
    for (int i = 0; i < out_h_; ++i)
      for (int j = 0; j < out_w_; ++j) {
        double acc = 0.0;
        for (int a = 0; a < ks_; ++a) {
          int rr = i * stride_ + a - off;
          if (rr < 0 || rr >= h_) continue;
          for (int b = 0; b < ks_; ++b) {
            int cc = j * stride_ + b - off;
            if (cc < 0 || cc >= w_) continue;
            acc += kernel_[static_cast<size_t>(a) * ks_ + b] * x.at(rr, cc);
          }
        }
        out[static_cast<size_t>(i) * out_w_ + j] = acc;
      }
    return out;
  }

  Image adjoint(const std::vector<double>& r) const override {
    check_output(r);
    Image out(h_, w_, 0.0);
    const int off = (ks_ - 1) / 2;
    for (int i = 0; i < out_h_; ++i)
      for (int j = 0; j < out_w_; ++j) {
        double v = r[static_cast<size_t>(i) * out_w_ + j];
        if (v == 0.0) continue;
        for (int a = 0; a < ks_; ++a) {
          int rr = i * stride_ + a - off;
          if (rr < 0 || rr >= h_) continue;
          for (int b = 0; b < ks_; ++b) {
            int cc = j * stride_ + b - off;
            if (cc < 0 || cc >= w_) continue;
            out.at(rr, cc) += kernel_[static_cast<size_t>(a) * ks_ + b] * v;
          }
        }
      }
    return out;
  }

  int input_height() const override { return h_; }
  int input_width() const override { return w_; }
  int output_size() const override { return out_h_ * out_w_; }
  int output_rows() const override { return out_h_; }
  int output_cols() const override { return out_w_; }

  double norm_estimate() const override { return norm_; }

 private:
  int h_, w_, ks_, stride_;
  int out_h_, out_w_;
  std::vector<double> kernel_;
  double norm_ = 0.0;
};

// Unitary 2D DFT restricted to a set of frequency columns; the data vector
// interleaves real and imaginary parts. Both directions run through the same
// separable cosine/sine tables, so the adjoint is the exact transpose.
class FourierSubsampleOp final : public LinearOperator {
 public:
  FourierSubsampleOp(int h, int w, std::vector<int> kept_columns) : h_(h), w_(w), cols_(std::move(kept_columns)) {
    for (int c : cols_) require(c >= 0 && c < w_, "FourierSubsampleOp: column out of range");
    if (cols_.empty()) {
      // legal but useless; callers get a warning through the CLI layer
      cols_ = {};
    }
    build_tables();
  }

  // acceleration-factor mask: a centered band of half the budget plus
  // uniformly spaced remaining columns, deterministic given (w, accel, seed)
  static std::vector<int> acceleration_mask(int w, int accel, std::uint64_t seed = 0) {
    require(accel >= 1, "acceleration_mask: accel must be >= 1");
    int keep = std::max(1, w / accel);
    int band = std::max(1, keep / 2);
    std::vector<char> used(w, 0);
    int start = (w - band) / 2;
    for (int i = 0; i < band; ++i) used[start + i] = 1;
    int rest = keep - band;
    if (rest > 0) {
      Rng rng(seed + 1);
      double phase = rng.uniform();
      for (int i = 0; i < rest; ++i) {
        double pos = (i + phase) * static_cast<double>(w) / rest;
        int c = static_cast<int>(pos) % w;
        while (used[c]) c = (c + 1) % w;  // next free column
        used[c] = 1;
      }
    }
    std::vector<int> cols;
    for (int c = 0; c < w; ++c)
      if (used[c]) cols.push_back(c);
    return cols;
  }

  std::vector<double> apply(const Image& x) const override {
    check_input(x);
    const int nk = static_cast<int>(cols_.size());
    // stage 1: transform along rows, keeping only the selected columns
    std::vector<double> re1(static_cast<size_t>(h_) * nk, 0.0), im1 = re1;
    for (int r = 0; r < h_; ++r)
      for (int k = 0; k < nk; ++k) {
        double re = 0.0, im = 0.0;
        const double* cosr = &col_cos_[static_cast<size_t>(k) * w_];
        const double* sinr = &col_sin_[static_cast<size_t>(k) * w_];
        for (int c = 0; c < w_; ++c) {
          double v = x.at(r, c);
          re += v * cosr[c];
          im += v * sinr[c];
        }
        re1[static_cast<size_t>(r) * nk + k] = re;
        im1[static_cast<size_t>(r) * nk + k] = im;
      }
    // stage 2: transform along columns for every kept frequency column
    std::vector<double> out(2 * static_cast<size_t>(h_) * nk, 0.0);
    double scale = 1.0 / std::sqrt(static_cast<double>(h_) * w_);
    for (int u = 0; u < h_; ++u)
      for (int k = 0; k < nk; ++k) {
        double re = 0.0, im = 0.0;
        const double* cosu = &row_cos_[static_cast<size_t>(u) * h_];
        const double* sinu = &row_sin_[static_cast<size_t>(u) * h_];
        for (int r = 0; r < h_; ++r) {
          double a = re1[static_cast<size_t>(r) * nk + k];
          double b = im1[static_cast<size_t>(r) * nk + k];
          re += a * cosu[r] - b * sinu[r];
          im += a * sinu[r] + b * cosu[r];
        }
        size_t o = 2 * (static_cast<size_t>(u) * nk + k);
        out[o] = re * scale;
        out[o + 1] = im * scale;
      }
    return out;
  }

  Image adjoint(const std::vector<double>& r) const override {
    check_output(r);
    const int nk = static_cast<int>(cols_.size());
    double scale = 1.0 / std::sqrt(static_cast<double>(h_) * w_);
    // reverse stage 2
    std::vector<double> re1(static_cast<size_t>(h_) * nk, 0.0), im1 = re1;
    for (int row = 0; row < h_; ++row)
      for (int k = 0; k < nk; ++k) {
        double re = 0.0, im = 0.0;
        for (int u = 0; u < h_; ++u) {
          size_t o = 2 * (static_cast<size_t>(u) * nk + k);
          double a = r[o] * scale, b = r[o + 1] * scale;
          const double* cosu = &row_cos_[static_cast<size_t>(u) * h_];
          const double* sinu = &row_sin_[static_cast<size_t>(u) * h_];
          re += a * cosu[row] + b * sinu[row];
          im += -a * sinu[row] + b * cosu[row];
        }
        re1[static_cast<size_t>(row) * nk + k] = re;
        im1[static_cast<size_t>(row) * nk + k] = im;
      }
    // reverse stage 1 (imaginary part cancels against the conjugate side)
    Image out(h_, w_, 0.0);
    for (int row = 0; row < h_; ++row)
      for (int c = 0; c < w_; ++c) {
        double acc = 0.0;
        for (int k = 0; k < nk; ++k) {
          const double* cosr = &col_cos_[static_cast<size_t>(k) * w_];
          const double* sinr = &col_sin_[static_cast<size_t>(k) * w_];
          acc += re1[static_cast<size_t>(row) * nk + k] * cosr[c] +
                 im1[static_cast<size_t>(row) * nk + k] * sinr[c];
        }
        out.at(row, c) = acc;
      }
    return out;
  }

  int input_height() const override { return h_; }
  int input_width() const override { return w_; }
  int output_size() const override { return 2 * h_ * static_cast<int>(cols_.size()); }
  int output_rows() const override { return h_; }
  int output_cols() const override { return 2 * static_cast<int>(cols_.size()); }
  const std::vector<int>& kept_columns() const { return cols_; }

  // restriction of a unitary map: every singular value is exactly one
  double norm_estimate() const override { return cols_.empty() ? 0.0 : 1.0; }

 private:
  void build_tables() {
    constexpr double two_pi = 6.283185307179586476925286766559;
    const int nk = static_cast<int>(cols_.size());
    col_cos_.assign(static_cast<size_t>(nk) * w_, 0.0);
    col_sin_.assign(static_cast<size_t>(nk) * w_, 0.0);
    for (int k = 0; k < nk; ++k)
      for (int c = 0; c < w_; ++c) {
        double ang = -two_pi * static_cast<double>(cols_[k]) * c / w_;
        col_cos_[static_cast<size_t>(k) * w_ + c] = std::cos(ang);
        col_sin_[static_cast<size_t>(k) * w_ + c] = std::sin(ang);
      }
    row_cos_.assign(static_cast<size_t>(h_) * h_, 0.0);
    row_sin_.assign(static_cast<size_t>(h_) * h_, 0.0);
    for (int u = 0; u < h_; ++u)
      for (int r2 = 0; r2 < h_; ++r2) {
        double ang = -two_pi * static_cast<double>(u) * r2 / h_;
        row_cos_[static_cast<size_t>(u) * h_ + r2] = std::cos(ang);
        row_sin_[static_cast<size_t>(u) * h_ + r2] = std::sin(ang);
      }
  }

  int h_, w_;
  std::vector<int> cols_;
  std::vector<double> col_cos_, col_sin_, row_cos_, row_sin_;
};

// Ray-driven parallel-beam transform: equidistant angles in [0, pi), bins
// spanning the grid diagonal, bilinear interpolation at a fixed arclength
// step (weights scattered identically in the adjoint). Pixel side 1, image
// centered at the origin.
class RadonOp final : public LinearOperator {
 public:
  RadonOp(int h, int w, int n_angles, int n_bins, double drop_fraction = 0.0, double step = 0.5)
      : h_(h), w_(w), n_bins_(n_bins), step_(step) {
    require(n_angles >= 1 && n_bins >= 1, "RadonOp: bad geometry");
    require(drop_fraction >= 0.0 && drop_fraction < 1.0, "RadonOp: bad drop fraction");
    double diag = std::sqrt(static_cast<double>(h_) * h_ + static_cast<double>(w_) * w_);
    bin_spacing_ = diag / n_bins_;
    half_span_ = 0.5 * diag;
    int drop = static_cast<int>(std::floor(0.5 * drop_fraction * n_angles));
    for (int a = 0; a < n_angles; ++a) {
      if (a < drop || a >= n_angles - drop) continue;
      angles_.push_back(3.14159265358979323846 * a / n_angles);
    }
    norm_ = power_norm();  // eager so concurrent reads stay safe
  }

  std::vector<double> apply(const Image& x) const override {
    check_input(x);
    std::vector<double> sino(output_size(), 0.0);
    for (size_t a = 0; a < angles_.size(); ++a) {
      double* row = &sino[a * n_bins_];
      trace_angle(a, &x, nullptr, row, nullptr);
    }
    return sino;
  }

  Image adjoint(const std::vector<double>& r) const override {
    check_output(r);
    Image out(h_, w_, 0.0);
    for (size_t a = 0; a < angles_.size(); ++a) {
      const double* row = &r[a * n_bins_];
      trace_angle(a, nullptr, &out, nullptr, row);
    }
    return out;
  }

  int input_height() const override { return h_; }
  int input_width() const override { return w_; }
  int output_size() const override { return static_cast<int>(angles_.size()) * n_bins_; }
  int output_rows() const override { return static_cast<int>(angles_.size()); }
  int output_cols() const override { return n_bins_; }
  int n_angles() const { return static_cast<int>(angles_.size()); }
  int n_bins() const { return n_bins_; }

  double norm_estimate() const override { return norm_; }

 private:
  // Shared sampling loop: forward gathers into sino_row, adjoint scatters
  // grad_row through the same bilinear weights.
  void trace_angle(size_t a, const Image* x, Image* out, double* sino_row,
                   const double* grad_row) const {
    double theta = angles_[a];
    double ct = std::cos(theta), st = std::sin(theta);
    double cy = 0.5 * (h_ - 1), cx = 0.5 * (w_ - 1);
    int n_steps = static_cast<int>(std::ceil(2.0 * half_span_ / step_));
    for (int bin = 0; bin < n_bins_; ++bin) {
      double s = (bin - 0.5 * (n_bins_ - 1)) * bin_spacing_;
      double dx = -st * step_, dy = ct * step_;  // ray direction scaled by step
      // first sample at arclength -T + step/2 along the ray through s * (ct, st)
      double t0 = -half_span_ + 0.5 * step_;
      double qx = s * ct + t0 * (-st);
      double qy = s * st + t0 * ct;
      double acc = 0.0;
      double g = grad_row ? grad_row[bin] * step_ : 0.0;
      for (int t = 0; t < n_steps; ++t, qx += dx, qy += dy) {
        double gx = qx + cx, gy = qy + cy;
        int c0 = static_cast<int>(std::floor(gx));
        int r0 = static_cast<int>(std::floor(gy));
        if (c0 < -1 || c0 > w_ - 1 || r0 < -1 || r0 > h_ - 1) continue;
        double fx = gx - c0, fy = gy - r0;
        double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx;
        double w10 = fy * (1 - fx), w11 = fy * fx;
        if (x) {
          double v = 0.0;
          if (r0 >= 0 && c0 >= 0) v += w00 * x->at(r0, c0);
          if (r0 >= 0 && c0 + 1 < w_) v += w01 * x->at(r0, c0 + 1);
          if (r0 + 1 < h_ && c0 >= 0) v += w10 * x->at(r0 + 1, c0);
          if (r0 + 1 < h_ && c0 + 1 < w_) v += w11 * x->at(r0 + 1, c0 + 1);
          acc += v;
        }
        if (out && g != 0.0) {
          if (r0 >= 0 && c0 >= 0) out->at(r0, c0) += w00 * g;
          if (r0 >= 0 && c0 + 1 < w_) out->at(r0, c0 + 1) += w01 * g;
          if (r0 + 1 < h_ && c0 >= 0) out->at(r0 + 1, c0) += w10 * g;
          if (r0 + 1 < h_ && c0 + 1 < w_) out->at(r0 + 1, c0 + 1) += w11 * g;
        }
      }
      if (sino_row) sino_row[bin] = acc * step_;
    }
  }

  int h_, w_, n_bins_;
  double step_, bin_spacing_, half_span_;
  std::vector<double> angles_;
  double norm_ = 0.0;
};

// ---------------------------------------------------------------------------
// Data fidelities
// ---------------------------------------------------------------------------

// scaled_quadratic: 0.5 sigma^-2 ||Hx - y||^2
// ct_poisson (per bin, t = (Hx)_i): exp(-mu t) N0 + exp(-mu y_i) N0 (mu t - log N0)
struct Fidelity {
  enum class Kind { scaled_quadratic, ct_poisson };

  Kind kind = Kind::scaled_quadratic;
  double sigma = 1.0;
  double photon_count = 4096.0;
  double mu_ct = 81.35858;

  static Fidelity quadratic(double sigma) {
    require(sigma > 0.0 && std::isfinite(sigma), "Fidelity: sigma must be positive");
    Fidelity f;
    f.kind = Kind::scaled_quadratic;
    f.sigma = sigma;
    return f;
  }

  static Fidelity ct_poisson(double photon_count = 4096.0, double mu = 81.35858) {
    require(photon_count > 0.0, "Fidelity: photon count must be positive");
    require(mu > 0.0, "Fidelity: mu_ct must be positive");
    Fidelity f;
    f.kind = Kind::ct_poisson;
    f.photon_count = photon_count;
    f.mu_ct = mu;
    return f;
  }

  double value(const std::vector<double>& hx, const std::vector<double>& y) const {
    require(hx.size() == y.size(), "Fidelity: size mismatch");
    if (kind == Kind::scaled_quadratic) {
      double s = 0.0;
      for (size_t i = 0; i < hx.size(); ++i) {
        double d = hx[i] - y[i];
        s += d * d;
      }
      return 0.5 * s / (sigma * sigma);
    }
    double s = 0.0;
    for (size_t i = 0; i < hx.size(); ++i) {
      double t = hx[i];
      s += safe_exp(-mu_ct * t) * photon_count +
           safe_exp(-mu_ct * y[i]) * photon_count * (mu_ct * t - std::log(photon_count));
    }
    return s;
  }

  std::vector<double> gradient(const std::vector<double>& hx, const std::vector<double>& y) const {
    require(hx.size() == y.size(), "Fidelity: size mismatch");
    std::vector<double> g(hx.size());
    if (kind == Kind::scaled_quadratic) {
      double inv = 1.0 / (sigma * sigma);
      for (size_t i = 0; i < hx.size(); ++i) g[i] = inv * (hx[i] - y[i]);
      return g;
    }
    for (size_t i = 0; i < hx.size(); ++i)
      g[i] = -mu_ct * photon_count * safe_exp(-mu_ct * hx[i]) +
             mu_ct * photon_count * safe_exp(-mu_ct * y[i]);
    return g;
  }

  // per-bin second derivative with respect to (Hx)_i
  std::vector<double> second_derivs(const std::vector<double>& hx,
                                    const std::vector<double>& y) const {
    std::vector<double> d(hx.size());
    if (kind == Kind::scaled_quadratic) {
      std::fill(d.begin(), d.end(), 1.0 / (sigma * sigma));
      return d;
    }
    (void)y;
    for (size_t i = 0; i < hx.size(); ++i)
      d[i] = mu_ct * mu_ct * photon_count * safe_exp(-mu_ct * hx[i]);
    return d;
  }

  // Lipschitz constant of the gradient on { Hx >= hx_min } (per bin)
  double gradient_lipschitz(double hx_min = 0.0) const {
    if (kind == Kind::scaled_quadratic) return 1.0 / (sigma * sigma);
    return mu_ct * mu_ct * photon_count * safe_exp(-mu_ct * hx_min);
  }

 private:
  // exponentials clamped so intermediate values stay finite; arguments this
  // large only occur on wildly infeasible iterates
  static double safe_exp(double a) { return std::exp(std::min(a, 500.0)); }
};

// ---------------------------------------------------------------------------
// Measurement simulation
// ---------------------------------------------------------------------------

struct NoiseSpec {
  enum class Kind { gaussian, ct_poisson };
  Kind kind = Kind::gaussian;
  double sigma = 0.0;             // gaussian
  double photon_count = 4096.0;   // ct
  double mu_ct = 81.35858;
};

inline std::vector<double> simulate_data(const LinearOperator& h, const Image& x_true,
                                         const NoiseSpec& spec, std::uint64_t seed) {
  std::vector<double> y = h.apply(x_true);
  Rng rng(seed);
  if (spec.kind == NoiseSpec::Kind::gaussian) {
    require(spec.sigma >= 0.0 && std::isfinite(spec.sigma), "simulate_data: sigma must be >= 0");
    if (spec.sigma > 0.0)
      for (double& v : y) v += spec.sigma * rng.normal();
    return y;
  }
  require(spec.photon_count > 0.0 && spec.mu_ct > 0.0, "simulate_data: bad ct parameters");
  for (double& v : y) {
    double mean = spec.photon_count * std::exp(std::min(-spec.mu_ct * v, 500.0));
    long long counts = rng.poisson(mean);
    if (counts < 1) counts = 1;  // -log(0) guard
    v = -std::log(static_cast<double>(counts) / spec.photon_count) / spec.mu_ct;
  }
  return y;
}

}  // namespace ridge

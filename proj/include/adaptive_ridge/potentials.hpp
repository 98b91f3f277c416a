#pragma once

#include <vector>

#include "core.hpp"

namespace ridge {

struct PotentialSample {
  double value = 0.0;
  double first_deriv = 0.0;
  double second_deriv = 0.0;
};

// Elementwise clamp of spline curvature coefficients into [0, 1]; idempotent.
inline std::vector<double> project_coefficients(std::vector<double> raw) {
  require_finite(raw, "project_coefficients");
  for (double& v : raw) v = std::min(1.0, std::max(0.0, v));
  return raw;
}

// Scalar potential psi = mu * psi_plus - c_cvx * psi_minus, where psi_plus
// and psi_minus are quadratic splines stored through their piecewise-constant
// second derivatives on a uniform knot grid centered at zero. Outside the
// knot range psi' stays constant, so psi grows linearly with the boundary
// slope. Calibration pins psi(0) = 0 and psi'(0) = 0, and a final global
// shift keeps psi >= 0 everywhere (zero in the convex case).
//
// Immutable after construction / finalize(); evaluations are pure.
class SplinePotential {
 public:
  SplinePotential(int knot_count, double spacing, std::vector<double> d_plus,
                  std::vector<double> d_minus, double mu, double c_cvx)
      : knot_count_(knot_count), spacing_(spacing), mu_(mu), c_cvx_(c_cvx),
        d_plus_(std::move(d_plus)), d_minus_(std::move(d_minus)) {
    require(knot_count_ >= 3, "SplinePotential: need at least 3 knots");
    require(spacing_ > 0.0 && std::isfinite(spacing_), "SplinePotential: spacing must be positive");
    require(mu_ > 0.0 && std::isfinite(mu_), "SplinePotential: mu must be positive");
    require(c_cvx_ == 0.0 || c_cvx_ == 1.0, "SplinePotential: c_cvx must be 0 or 1");
    int n = intervals();
    if (d_plus_.empty()) d_plus_.assign(n, 0.0);
    if (d_minus_.empty()) {
      d_minus_.assign(n, 0.0);
      if (c_cvx_ == 1.0) {
        // default nonconvex dip: 21 centered intervals at full curvature
        int span = std::min(21, n);
        int start = (n - span) / 2;
        for (int i = start; i < start + span; ++i) d_minus_[i] = 1.0;
      }
    }
    require(static_cast<int>(d_plus_.size()) == n, "SplinePotential: psi_plus'' size mismatch");
    require(static_cast<int>(d_minus_.size()) == n, "SplinePotential: psi_minus'' size mismatch");
    check_unit_box(d_plus_);
    check_unit_box(d_minus_);
    finalize();
  }

  static SplinePotential zero(int knot_count = 101, double spacing = 0.002) {
    return SplinePotential(knot_count, spacing, {}, {}, 1.0, 0.0);
  }

  // psi(x) = mu * x^2 / 2 inside the knot range.
  static SplinePotential pure_quadratic(int knot_count = 101, double spacing = 0.002,
                                        double mu = 1.0) {
    return SplinePotential(knot_count, spacing,
                           std::vector<double>(static_cast<size_t>(knot_count) - 1, 1.0), {}, mu,
                           0.0);
  }

  int knot_count() const { return knot_count_; }
  int intervals() const { return knot_count_ - 1; }
  double spacing() const { return spacing_; }
  double mu() const { return mu_; }
  double c_cvx() const { return c_cvx_; }
  double knot_min() const { return t0_; }
  double knot_max() const { return t0_ + spacing_ * intervals(); }
  const std::vector<double>& plus_coefficients() const { return d_plus_; }
  const std::vector<double>& minus_coefficients() const { return d_minus_; }

  void set_mu(double mu) {
    require(mu > 0.0 && std::isfinite(mu), "set_mu: mu must be positive");
    mu_ = mu;
    finalize();
  }

  void set_plus_coefficients(std::vector<double> d) {
    require(static_cast<int>(d.size()) == intervals(), "set_plus_coefficients: size mismatch");
    check_unit_box(d);
    d_plus_ = std::move(d);
    finalize();
  }

  PotentialSample eval(double x) const {
    require(std::isfinite(x), "eval: x must be finite");
    PotentialSample s;
    double t_hi = knot_max();
    if (x <= t0_) {
      double sl = eff_deriv_.front();
      s.value = eff_val_.front() + sl * (x - t0_) + offset_;
      s.first_deriv = sl;
      s.second_deriv = 0.0;
    } else if (x >= t_hi) {
      double sl = eff_deriv_.back();
      s.value = eff_val_.back() + sl * (x - t_hi) + offset_;
      s.first_deriv = sl;
      s.second_deriv = 0.0;
    } else {
      int i = interval_of(x);
      double u = x - (t0_ + spacing_ * i);
      double d = d_eff_[i];
      s.second_deriv = d;
      s.first_deriv = eff_deriv_[i] + d * u;
      s.value = eff_val_[i] + eff_deriv_[i] * u + 0.5 * d * u * u + offset_;
    }
    return s;
  }

  // alpha^-2 psi(alpha x), alpha^-1 psi'(alpha x), psi''(alpha x)
  PotentialSample scaled_eval(double alpha, double x) const {
    require(alpha > 0.0 && std::isfinite(alpha), "scaled_eval: alpha must be positive");
    PotentialSample s = eval(alpha * x);
    return {s.value / (alpha * alpha), s.first_deriv / alpha, s.second_deriv};
  }

  // sup over x of |psi''| for the effective profile (zero outside the knots).
  double max_abs_second_deriv() const { return max_abs_dd_; }

  // constant slopes of the linear tails
  double tail_slope_left() const { return eff_deriv_.front(); }
  double tail_slope_right() const { return eff_deriv_.back(); }

  // max over x of |psi'| (attained at a boundary knot since psi'' vanishes outside)
  double max_abs_first_deriv() const { return max_abs_deriv_; }

  // psi_plus'(x) of the calibrated plus profile; the mu-sensitivity of psi'.
  double plus_first_deriv(double x) const {
    require(std::isfinite(x), "plus_first_deriv: x must be finite");
    double t_hi = knot_max();
    if (x <= t0_) return plus_deriv_.front();
    if (x >= t_hi) return plus_deriv_.back();
    int i = interval_of(x);
    double u = x - (t0_ + spacing_ * i);
    return plus_deriv_[i] + d_plus_[i] * u;
  }

  // Adds w * d(psi_plus'(x))/d(d_plus_[i]) to out[i] for all intervals i.
  // The sensitivity equals the signed overlap of [0, x] with interval i.
  void accumulate_plus_coefficient_weights(double x, double w, std::vector<double>& out) const {
    double lo = std::min(0.0, x), hi = std::max(0.0, x);
    lo = std::max(lo, t0_);
    hi = std::min(hi, knot_max());
    if (hi <= lo) return;
    double sgn = (x >= 0.0) ? 1.0 : -1.0;
    int i_lo = interval_of(lo);
    int i_hi = interval_of(hi);
    for (int i = i_lo; i <= i_hi; ++i) {
      double a = std::max(lo, t0_ + spacing_ * i);
      double b = std::min(hi, t0_ + spacing_ * (i + 1));
      if (b > a) out[i] += w * sgn * (b - a);
    }
  }

 private:
  static void check_unit_box(const std::vector<double>& d) {
    for (double v : d)
      require(v >= -1e-12 && v <= 1.0 + 1e-12, "SplinePotential: psi'' coefficients must lie in [0,1]");
  }

  int interval_of(double x) const {
    int i = static_cast<int>(std::floor((x - t0_) / spacing_));
    return std::min(std::max(i, 0), intervals() - 1);
  }

  // Integrates both profiles across the knot grid, calibrates value and slope
  // at zero, forms the effective combination and its exact minimum over R.
  void finalize() {
    int n = intervals();
    t0_ = -0.5 * spacing_ * n;
    plus_deriv_.assign(n + 1, 0.0);
    plus_val_.assign(n + 1, 0.0);
    minus_deriv_.assign(n + 1, 0.0);
    minus_val_.assign(n + 1, 0.0);
    for (int i = 0; i < n; ++i) {
      plus_deriv_[i + 1] = plus_deriv_[i] + d_plus_[i] * spacing_;
      plus_val_[i + 1] = plus_val_[i] + plus_deriv_[i] * spacing_ + 0.5 * d_plus_[i] * spacing_ * spacing_;
      minus_deriv_[i + 1] = minus_deriv_[i] + d_minus_[i] * spacing_;
      minus_val_[i + 1] = minus_val_[i] + minus_deriv_[i] * spacing_ + 0.5 * d_minus_[i] * spacing_ * spacing_;
    }
    calibrate(plus_deriv_, plus_val_, d_plus_);
    calibrate(minus_deriv_, minus_val_, d_minus_);

    d_eff_.assign(n, 0.0);
    eff_deriv_.assign(n + 1, 0.0);
    eff_val_.assign(n + 1, 0.0);
    for (int i = 0; i < n; ++i) d_eff_[i] = mu_ * d_plus_[i] - c_cvx_ * d_minus_[i];
    for (int i = 0; i <= n; ++i) {
      eff_deriv_[i] = mu_ * plus_deriv_[i] - c_cvx_ * minus_deriv_[i];
      eff_val_[i] = mu_ * plus_val_[i] - c_cvx_ * minus_val_[i];
    }
    require(eff_deriv_.front() <= 1e-12 && eff_deriv_.back() >= -1e-12,
            "SplinePotential: boundary slopes make psi unbounded below");

    max_abs_dd_ = 0.0;
    for (double d : d_eff_) max_abs_dd_ = std::max(max_abs_dd_, std::abs(d));
    max_abs_deriv_ = 0.0;
    for (double d : eff_deriv_) max_abs_deriv_ = std::max(max_abs_deriv_, std::abs(d));

    // exact minimum of the effective piecewise quadratic
    double m = 0.0;  // value at a knot is covered below; 0 = psi(0) pre-offset
    for (int i = 0; i <= n; ++i) m = std::min(m, eff_val_[i]);
    for (int i = 0; i < n; ++i) {
      double d = d_eff_[i];
      if (d > 0.0 || d < 0.0) {
        double u = -eff_deriv_[i] / d;
        if (u > 0.0 && u < spacing_)
          m = std::min(m, eff_val_[i] + eff_deriv_[i] * u + 0.5 * d * u * u);
      }
    }
    offset_ = std::max(0.0, -m);
  }

  // shifts so profile(0) = 0 and profile'(0) = 0
  void calibrate(std::vector<double>& deriv, std::vector<double>& val,
                 const std::vector<double>& dd) const {
    int i = interval_of(0.0);
    double u = 0.0 - (t0_ + spacing_ * i);
    double s0 = deriv[i] + dd[i] * u;
    double v0 = val[i] + deriv[i] * u + 0.5 * dd[i] * u * u;
    int n = intervals();
    for (int k = 0; k <= n; ++k) {
      double t = t0_ + spacing_ * k;
      val[k] -= v0 + s0 * t;
      deriv[k] -= s0;
    }
  }

  int knot_count_;
  double spacing_;
  double mu_;
  double c_cvx_;
  std::vector<double> d_plus_, d_minus_;

  double t0_ = 0.0;
  std::vector<double> plus_deriv_, plus_val_;
  std::vector<double> minus_deriv_, minus_val_;
  std::vector<double> d_eff_, eff_deriv_, eff_val_;
  double offset_ = 0.0;
  double max_abs_dd_ = 0.0;
  double max_abs_deriv_ = 0.0;
};

// Linear spline s(sigma) on 11 equally spaced knots over [0, 30/255],
// clamped to the boundary values outside.
struct NoiseScaling {
  static constexpr int knot_count = 11;
  static constexpr double sigma_max = 30.0 / 255.0;

  std::vector<double> values = std::vector<double>(knot_count, 0.0);

  double operator()(double sigma) const {
    double u = std::min(std::max(sigma, 0.0), sigma_max);
    double pos = u / sigma_max * (knot_count - 1);
    int i = std::min(static_cast<int>(pos), knot_count - 2);
    double f = pos - i;
    return values[i] * (1.0 - f) + values[i + 1] * f;
  }

  // d s(sigma) / d values[k]; the linear-interpolation hat weight.
  double hat_weight(int k, double sigma) const {
    double u = std::min(std::max(sigma, 0.0), sigma_max);
    double pos = u / sigma_max * (knot_count - 1);
    int i = std::min(static_cast<int>(pos), knot_count - 2);
    double f = pos - i;
    if (k == i) return 1.0 - f;
    if (k == i + 1) return f;
    return 0.0;
  }
};

// alpha_c(sigma) = exp(s(sigma)) / (sigma + 1e-5)
inline double noise_alpha(const NoiseScaling& s, double sigma) {
  require(std::isfinite(sigma) && sigma >= 0.0, "noise_alpha: sigma must be finite and >= 0");
  return std::exp(s(sigma)) / (sigma + 1e-5);
}

}  // namespace ridge

#pragma once

#include <string>
#include <vector>

#include "core.hpp"
#include "filter_bank.hpp"
#include "potentials.hpp"

namespace ridge {

// Per-channel, per-pixel weights in [epsilon, 1]. Empty weights stand for
// the all-ones mask.
struct SpatialMask {
  ChannelStack weights;
  double epsilon = 0.01;

  bool is_ones() const { return weights.empty(); }

  double at(int c, int idx) const { return weights.empty() ? 1.0 : weights[c].data[idx]; }

  void validate(int n_channels, int height, int width) const {
    if (weights.empty()) return;
    require(static_cast<int>(weights.size()) == n_channels, "SpatialMask: channel count mismatch");
    for (const Image& w : weights) {
      require(w.height == height && w.width == width, "SpatialMask: shape mismatch");
      for (double v : w.data)
        require(v >= epsilon - 1e-12 && v <= 1.0 + 1e-12, "SpatialMask: weight outside [epsilon, 1]");
    }
  }
};

enum class MaskKind { constant, file, local_response };

// Replacement for the paper-scale mask network: three scalars plus optional
// per-channel threshold offsets. Weights shrink towards epsilon where the
// smoothed filter response of x_est exceeds the threshold.
struct MaskProvider {
  MaskKind kind = MaskKind::constant;
  double gain = 10.0;
  double threshold = 0.05;
  int smoothing_width = 3;
  std::vector<double> threshold_offsets;  // per channel; empty = all zero
  ChannelStack file_weights;              // used by MaskKind::file

  double channel_threshold(int c) const {
    if (threshold_offsets.empty()) return threshold;
    return threshold + threshold_offsets[static_cast<size_t>(c)];
  }
};

inline double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Border-aware box average with an odd window width.
inline Image box_smooth(const Image& x, int width) {
  if (width <= 1) return x;
  int half = width / 2;
  Image out(x.height, x.width, 0.0);
  for (int r = 0; r < x.height; ++r) {
    for (int c = 0; c < x.width; ++c) {
      double acc = 0.0;
      int cnt = 0;
      for (int a = std::max(0, r - half); a <= std::min(x.height - 1, r + half); ++a)
        for (int b = std::max(0, c - half); b <= std::min(x.width - 1, c + half); ++b) {
          acc += x.at(a, b);
          ++cnt;
        }
      out.at(r, c) = acc / cnt;
    }
  }
  return out;
}

inline SpatialMask make_mask(const MaskProvider& provider, const Image& x_est,
                             const FilterBank& bank, double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0, "make_mask: epsilon must lie in (0,1)");
  require_finite(x_est.data, "make_mask: x_est");
  SpatialMask mask;
  mask.epsilon = epsilon;
  switch (provider.kind) {
    case MaskKind::constant:
      // empty weights: exactly one everywhere
      break;
    case MaskKind::file: {
      require(static_cast<int>(provider.file_weights.size()) == bank.n_channels(),
              "make_mask: file weights channel mismatch");
      mask.weights = provider.file_weights;
      for (Image& w : mask.weights) {
        require(same_shape(w, x_est), "make_mask: file weights shape mismatch");
        for (double& v : w.data) v = std::min(1.0, std::max(epsilon, v));
      }
      break;
    }
    case MaskKind::local_response: {
      mask.weights.resize(bank.n_channels());
      for (int c = 0; c < bank.n_channels(); ++c) {
        Image resp = bank.apply_channel(c, x_est);
        for (double& v : resp.data) v = std::abs(v);
        Image q = box_smooth(resp, provider.smoothing_width);
        double tau = provider.channel_threshold(c);
        Image w(x_est.height, x_est.width, 0.0);
        for (int i = 0; i < w.size(); ++i)
          w.data[i] = epsilon + (1.0 - epsilon) * logistic(-provider.gain * (q.data[i] - tau));
        mask.weights[c] = std::move(w);
      }
      break;
    }
  }
  mask.validate(bank.n_channels(), x_est.height, x_est.width);
  return mask;
}

// R_y(x) = sum_c < Lambda_c, psi_c(W_c x) > with psi_c the sigma-scaled
// common profile, psi_c(t) = alpha_c^-2 psi(alpha_c t). Evaluations are pure;
// the model is treated as immutable between parameter updates.
class AdaptiveRegularizer {
 public:
  AdaptiveRegularizer(FilterBank bank, SplinePotential potential)
      : bank_(std::move(bank)), potential_(std::move(potential)),
        alphas_(bank_.n_channels(), 1.0) {}

  const FilterBank& bank() const { return bank_; }
  FilterBank& bank() { return bank_; }
  const SplinePotential& potential() const { return potential_; }
  SplinePotential& potential() { return potential_; }
  const SpatialMask& mask() const { return mask_; }
  double sigma() const { return sigma_; }
  double alpha(int c) const { return alphas_[c]; }
  const std::vector<NoiseScaling>& noise_scalings() const { return scalings_; }
  std::vector<NoiseScaling>& noise_scalings() { return scalings_; }

  void set_noise_scalings(std::vector<NoiseScaling> s) {
    require(s.empty() || static_cast<int>(s.size()) == bank_.n_channels(),
            "set_noise_scalings: one scaling per channel");
    scalings_ = std::move(s);
    refresh_alphas();
  }

  void set_sigma(double sigma) {
    require(std::isfinite(sigma) && sigma >= 0.0, "set_sigma: sigma must be finite and >= 0");
    sigma_ = sigma;
    refresh_alphas();
  }

  // called after in-place parameter updates during training
  void refresh_alphas() {
    for (int c = 0; c < bank_.n_channels(); ++c)
      alphas_[c] = scalings_.empty() ? 1.0 : noise_alpha(scalings_[c], sigma_);
  }

  void set_mask(SpatialMask mask) { mask_ = std::move(mask); }
  void clear_mask() { mask_ = SpatialMask{}; }

  double evaluate(const Image& x) const {
    require_finite(x.data, "evaluate: x");
    check_mask(x);
    double total = 0.0;
    for (int c = 0; c < bank_.n_channels(); ++c) {
      Image resp = bank_.apply_channel(c, x);
      double a = alphas_[c];
      double partial = 0.0;
      for (int i = 0; i < resp.size(); ++i)
        partial += mask_.at(c, i) * potential_.scaled_eval(a, resp.data[i]).value;
      total += partial;
    }
    return total;
  }

  // sum_c W_c^T ( Lambda_c . psi_c'(W_c x) )
  Image gradient(const Image& x) const {
    require_finite(x.data, "gradient: x");
    check_mask(x);
    Image out(x.height, x.width, 0.0);
    for (int c = 0; c < bank_.n_channels(); ++c) {
      Image resp = bank_.apply_channel(c, x);
      double a = alphas_[c];
      for (int i = 0; i < resp.size(); ++i)
        resp.data[i] = mask_.at(c, i) * potential_.scaled_eval(a, resp.data[i]).first_deriv;
      axpy(1.0, bank_.adjoint_channel(c, resp), out);
    }
    return out;
  }

  double value_and_gradient(const Image& x, Image& grad_out) const {
    require_finite(x.data, "value_and_gradient: x");
    check_mask(x);
    grad_out = Image(x.height, x.width, 0.0);
    double total = 0.0;
    for (int c = 0; c < bank_.n_channels(); ++c) {
      Image resp = bank_.apply_channel(c, x);
      double a = alphas_[c];
      for (int i = 0; i < resp.size(); ++i) {
        PotentialSample s = potential_.scaled_eval(a, resp.data[i]);
        total += mask_.at(c, i) * s.value;
        resp.data[i] = mask_.at(c, i) * s.first_deriv;
      }
      axpy(1.0, bank_.adjoint_channel(c, resp), grad_out);
    }
    return total;
  }

  // Hessian-vector product sum_c W_c^T ( Lambda_c . psi_c''(W_c x) . W_c v )
  Image hessian_vec(const Image& x, const Image& v) const {
    Image out(x.height, x.width, 0.0);
    for (int c = 0; c < bank_.n_channels(); ++c) {
      Image resp = bank_.apply_channel(c, x);
      Image wv = bank_.apply_channel(c, v);
      double a = alphas_[c];
      for (int i = 0; i < resp.size(); ++i)
        wv.data[i] *= mask_.at(c, i) * potential_.scaled_eval(a, resp.data[i]).second_deriv;
      axpy(1.0, bank_.adjoint_channel(c, wv), out);
    }
    return out;
  }

  // Upper bound on ||grad^2 R_y||: Lambda <= 1 and the sigma-scaled profile
  // satisfies psi_c''(t) = psi''(alpha t), so sup|psi_c''| = sup|psi''|.
  // Channel norms enter through a bound that holds on every grid size.
  double lipschitz_gradient_bound() const {
    double dd = potential_.max_abs_second_deriv();
    double total = 0.0;
    for (int c = 0; c < bank_.n_channels(); ++c) {
      double w = bank_.channel_norm_upper_bound(c);
      total += dd * w * w;
    }
    return total;
  }

 private:
  void check_mask(const Image& x) const {
    if (!mask_.is_ones())
      require(static_cast<int>(mask_.weights.size()) == bank_.n_channels() &&
                  same_shape(mask_.weights[0], x),
              "AdaptiveRegularizer: mask shape mismatch");
  }

  FilterBank bank_;
  SplinePotential potential_;
  std::vector<NoiseScaling> scalings_;
  double sigma_ = 0.0;
  std::vector<double> alphas_;
  SpatialMask mask_;
};

}  // namespace ridge

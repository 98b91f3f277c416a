#pragma once

#include <vector>

#include "core.hpp"
#include "regularizer.hpp"
#include "rng.hpp"
#include "solver.hpp"

namespace ridge {

// Gradients of a scalar loss with respect to the trainable parameter groups.
// Frozen or absent groups stay at zero.
struct ParameterGradients {
  std::vector<double> psi_plus;                   // per spline interval
  double log_mu = 0.0;
  std::vector<std::vector<double>> alpha_values;  // per channel, per noise knot
  double mask_gain = 0.0;
  std::vector<double> mask_threshold_offsets;     // per channel
  bool cg_converged = true;
  bool hessian_indefinite = false;
  int cg_iterations = 0;
};

struct ImplicitGradientOptions {
  double lambda = 1.0;
  double cg_tol = 1e-8;
  int cg_max_iters = 500;
  double residual_tol = 1e-4;  // largest accepted optimality residual at x_hat
  bool spline = true;
  bool mu = true;
  bool alpha = true;
  // mask-parameter derivatives additionally need the provider and the
  // stage-one estimate the mask was built from
  const MaskProvider* provider = nullptr;
  const Image* x_est = nullptr;
};

namespace detail {

struct CgOutcome {
  bool converged = false;
  bool indefinite = false;
  int iterations = 0;
};

template <class ApplyFn>
CgOutcome conjugate_gradient(const ApplyFn& apply, const Image& b, Image& x, double tol,
                             int max_iters) {
  CgOutcome out;
  x = Image(b.height, b.width, 0.0);
  Image r = b;
  Image p = r;
  double rs = dot(r, r);
  double threshold = tol * tol * std::max(rs, 1e-300);
  for (int it = 0; it < max_iters; ++it) {
    if (rs <= threshold) {
      out.converged = true;
      break;
    }
    Image ap = apply(p);
    double p_ap = dot(p, ap);
    if (p_ap <= 0.0) {
      out.indefinite = true;
      break;
    }
    double step = rs / p_ap;
    axpy(step, p, x);
    axpy(-step, ap, r);
    double rs_new = dot(r, r);
    out.iterations = it + 1;
    double beta = rs_new / rs;
    rs = rs_new;
    for (int i = 0; i < p.size(); ++i) p.data[i] = r.data[i] + beta * p.data[i];
  }
  if (rs <= threshold) out.converged = true;
  return out;
}

// Accumulates -lambda < z, d(grad R)/d theta > for every requested group.
inline void accumulate_parameter_gradients(const AdaptiveRegularizer& reg, const Image& x_hat,
                                           const Image& z, const ImplicitGradientOptions& opt,
                                           ParameterGradients& out) {
  const FilterBank& bank = reg.bank();
  const SplinePotential& pot = reg.potential();
  const double lambda = opt.lambda;
  const int n_channels = bank.n_channels();

  if (opt.spline) out.psi_plus.assign(pot.intervals(), 0.0);
  if (opt.alpha && !reg.noise_scalings().empty())
    out.alpha_values.assign(n_channels, std::vector<double>(NoiseScaling::knot_count, 0.0));
  bool mask_params = opt.provider && opt.x_est && opt.provider->kind == MaskKind::local_response &&
                     !reg.mask().is_ones();
  if (mask_params) out.mask_threshold_offsets.assign(n_channels, 0.0);

  for (int c = 0; c < n_channels; ++c) {
    Image resp = bank.apply_channel(c, x_hat);
    Image wz = bank.apply_channel(c, z);
    double a = reg.alpha(c);

    // smoothed response of x_est drives the mask weights
    Image q;
    double tau = 0.0;
    if (mask_params) {
      Image abs_resp = bank.apply_channel(c, *opt.x_est);
      for (double& v : abs_resp.data) v = std::abs(v);
      q = box_smooth(abs_resp, opt.provider->smoothing_width);
      tau = opt.provider->channel_threshold(c);
    }

    for (int i = 0; i < resp.size(); ++i) {
      double lam = reg.mask().at(c, i);
      double weight = wz.data[i] * lam;  // < z, W_c^T (Lambda . v) > pixel term
      double r = resp.data[i];
      double t = a * r;
      if (opt.mu) out.log_mu += -lambda * weight * pot.plus_first_deriv(t) / a;
      if (opt.spline)
        pot.accumulate_plus_coefficient_weights(t, -lambda * weight * pot.mu() / a, out.psi_plus);
      if (opt.alpha && !reg.noise_scalings().empty()) {
        PotentialSample s = pot.eval(t);
        double dalpha = r * s.second_deriv - s.first_deriv / a;
        const NoiseScaling& ns = reg.noise_scalings()[c];
        double pos = std::min(std::max(reg.sigma(), 0.0), NoiseScaling::sigma_max) /
                     NoiseScaling::sigma_max * (NoiseScaling::knot_count - 1);
        int k0 = std::min(static_cast<int>(pos), NoiseScaling::knot_count - 2);
        for (int k = k0; k <= k0 + 1; ++k) {
          double b = ns.hat_weight(k, reg.sigma());
          if (b != 0.0) out.alpha_values[c][k] += -lambda * weight * dalpha * b;
        }
      }
      if (mask_params) {
        double u = -opt.provider->gain * (q.data[i] - tau);
        double sgm = logistic(u);
        double sprime = sgm * (1.0 - sgm);
        double eps = reg.mask().epsilon;
        double psi_prime = pot.eval(t).first_deriv / a;
        double base = -lambda * wz.data[i] * psi_prime * (1.0 - eps) * sprime;
        out.mask_gain += base * (-(q.data[i] - tau));
        out.mask_threshold_offsets[c] += base * opt.provider->gain;
      }
    }
  }
  out.log_mu *= pot.mu();  // chain rule through mu = exp(log mu)
}

}  // namespace detail

// Implicit gradients through a stationary point of
//   D(Hx, y) + lambda R_y(x):  (H^T diag(phi'') H + lambda grad^2 R) z = loss_grad,
// then dLoss/dtheta = -lambda < z, d(grad R)/dtheta >.
inline ParameterGradients implicit_gradient_reconstruction(const ReconstructionProblem& problem,
                                                           const Image& x_hat,
                                                           const Image& loss_grad,
                                                           ImplicitGradientOptions opt = {}) {
  require(problem.regularizer != nullptr, "implicit_gradient: problem has no regularizer");
  opt.lambda = problem.lambda;
  const AdaptiveRegularizer& reg = *problem.regularizer;
  ParameterGradients out;

  if (std::isfinite(opt.residual_tol)) {
    double residual = optimality_residual(problem, x_hat);
    require(residual <= opt.residual_tol,
            "implicit_gradient: x_hat is not stationary enough (residual " +
                std::to_string(residual) + ")");
  }

  std::vector<double> hx = problem.forward->apply(x_hat);
  std::vector<double> dd = problem.fidelity.second_derivs(hx, problem.y);

  // frozen response-curvature factors make the Hessian product two
  // convolutions per channel
  const FilterBank& bank = reg.bank();
  std::vector<Image> curvature(bank.n_channels());
  for (int c = 0; c < bank.n_channels(); ++c) {
    Image resp = bank.apply_channel(c, x_hat);
    double a = reg.alpha(c);
    for (int i = 0; i < resp.size(); ++i)
      resp.data[i] = reg.mask().at(c, i) * reg.potential().scaled_eval(a, resp.data[i]).second_deriv;
    curvature[c] = std::move(resp);
  }

  auto apply_hessian = [&](const Image& v) {
    std::vector<double> hv = problem.forward->apply(v);
    for (size_t i = 0; i < hv.size(); ++i) hv[i] *= dd[i];
    Image av = problem.forward->adjoint(hv);
    if (problem.lambda != 0.0) {
      for (int c = 0; c < bank.n_channels(); ++c) {
        Image wv = bank.apply_channel(c, v);
        for (int i = 0; i < wv.size(); ++i) wv.data[i] *= curvature[c].data[i];
        axpy(problem.lambda, bank.adjoint_channel(c, wv), av);
      }
    }
    return av;
  };

  Image z;
  detail::CgOutcome cg =
      detail::conjugate_gradient(apply_hessian, loss_grad, z, opt.cg_tol, opt.cg_max_iters);
  out.cg_converged = cg.converged;
  out.hessian_indefinite = cg.indefinite;
  out.cg_iterations = cg.iterations;
  if (cg.indefinite) return out;  // flagged; gradients stay zero

  detail::accumulate_parameter_gradients(reg, x_hat, z, opt, out);
  return out;
}

// Prox-denoiser case: x_hat minimizes 0.5 ||x - y||^2 + lambda R_sigma(x).
inline ParameterGradients implicit_gradient(const AdaptiveRegularizer& model, const Image& y,
                                            const Image& x_hat, const Image& loss_grad,
                                            double lambda = 1.0,
                                            ImplicitGradientOptions opt = {}) {
  IdentityOp ident(y.height, y.width);
  ReconstructionProblem p;
  p.forward = &ident;
  p.fidelity = Fidelity::quadratic(1.0);
  p.regularizer = &model;
  p.lambda = lambda;
  p.y = y.data;
  p.init = y;
  return implicit_gradient_reconstruction(p, x_hat, loss_grad, opt);
}

// ---------------------------------------------------------------------------
// Adam with bias correction (beta 0.9 / 0.999, epsilon 1e-8).
// ---------------------------------------------------------------------------

class Adam {
 public:
  explicit Adam(size_t n = 0) : m_(n, 0.0), v_(n, 0.0) {}

  void step(std::vector<double>& params, const std::vector<double>& grads, double lr) {
    require(params.size() == m_.size() && grads.size() == m_.size(), "Adam: size mismatch");
    ++t_;
    double bc1 = 1.0 - std::pow(0.9, t_);
    double bc2 = 1.0 - std::pow(0.999, t_);
    for (size_t i = 0; i < params.size(); ++i) {
      m_[i] = 0.9 * m_[i] + 0.1 * grads[i];
      v_[i] = 0.999 * v_[i] + 0.001 * grads[i] * grads[i];
      params[i] -= lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + 1e-8);
    }
  }

  void step_scalar(double& param, double grad, double lr) {
    std::vector<double> p = {param}, g = {grad};
    step(p, g, lr);
    param = p[0];
  }

 private:
  std::vector<double> m_, v_;
  long long t_ = 0;
};

// ---------------------------------------------------------------------------
// Denoiser training
// ---------------------------------------------------------------------------

struct TrainConfig {
  int patch_size = 40;
  int n_patches = 2000;
  int batch_size = 32;
  int epochs = 10;
  double sigma_min = 0.0;
  double sigma_max = 30.0 / 255.0;
  double lr_spline = 5e-3;
  double lr_mu = 5e-2;
  double lr_alpha = 5e-3;
  std::uint64_t seed = 1;
  double val_fraction = 0.1;
  bool linear_warm_decay = false;  // halve the rates linearly over the first 5 epochs
  double prox_tol = 1e-6;
  int prox_max_iters = 500;
  double cg_tol = 1e-8;
  int cg_max_iters = 300;
  bool train_spline = true;
  bool train_mu = true;
  bool train_alpha = true;
};

struct TrainResult {
  std::vector<double> loss_trace;  // mean L1 per epoch over the training split
  std::vector<double> val_trace;   // MSE per epoch on the validation split
  int best_epoch = -1;
  bool diverged = false;
};

namespace detail {

struct ModelSnapshot {
  std::vector<double> psi_plus;
  double mu = 1.0;
  std::vector<NoiseScaling> scalings;

  static ModelSnapshot capture(const AdaptiveRegularizer& m) {
    return {m.potential().plus_coefficients(), m.potential().mu(), m.noise_scalings()};
  }
  void restore(AdaptiveRegularizer& m) const {
    m.potential().set_plus_coefficients(psi_plus);
    m.potential().set_mu(mu);
    m.set_noise_scalings(scalings);
  }
};

}  // namespace detail

// Supervised denoiser training: y_k = x_k + sigma_k n_k with seeded noise,
// mean L1 loss, implicit gradients, Adam per parameter group, and a
// projection of the spline coefficients back into [0, 1] after every step.
// Returns the parameters with the best validation MSE.
inline TrainResult train_denoiser(AdaptiveRegularizer& model, const std::vector<Image>& patches,
                                  const TrainConfig& cfg) {
  require(!patches.empty(), "train_denoiser: no patches");
  require(cfg.sigma_min >= 0.0 && cfg.sigma_max <= 30.0 / 255.0 + 1e-12 &&
              cfg.sigma_min <= cfg.sigma_max,
          "train_denoiser: sigma range outside [0, 30/255]");
  require(cfg.lr_spline >= 0.0 && cfg.lr_mu >= 0.0 && cfg.lr_alpha >= 0.0,
          "train_denoiser: rates must be nonnegative");
  require(cfg.batch_size >= 1 && cfg.epochs >= 0, "train_denoiser: bad batch/epochs");

  const int n = static_cast<int>(patches.size());
  const int pixels = patches[0].size();

  // fixed noisy copies, one per patch
  std::vector<double> sigmas(n);
  std::vector<Image> noisy(n);
  {
    Rng rng(cfg.seed);
    for (int k = 0; k < n; ++k) {
      sigmas[k] = rng.uniform(cfg.sigma_min, cfg.sigma_max);
      noisy[k] = patches[k];
      for (double& v : noisy[k].data) v += sigmas[k] * rng.normal();
    }
  }

  int n_val = std::min(n - 1, std::max(1, static_cast<int>(std::lround(cfg.val_fraction * n))));
  if (n == 1) n_val = 0;
  const int n_train = n - n_val;

  const int n_knots = NoiseScaling::knot_count;
  const int n_channels = model.bank().n_channels();
  Adam adam_spline(model.potential().intervals());
  Adam adam_mu(1);
  Adam adam_alpha(static_cast<size_t>(n_channels) * n_knots);

  auto solve_prox = [&](int k, const AdaptiveRegularizer& m) {
    return prox_denoise(m, noisy[k], sigmas[k], 1.0, cfg.prox_tol, cfg.prox_max_iters);
  };

  auto validation_mse = [&]() {
    if (n_val == 0) return 0.0;
    std::vector<double> errs(n_val, 0.0);
    parallel_for(n_val, [&](int j) {
      int k = n_train + j;
      AdaptiveRegularizer local = model;
      Image xh = solve_prox(k, local).x_hat;
      double e = 0.0;
      for (int i = 0; i < pixels; ++i) {
        double d = xh.data[i] - patches[k].data[i];
        e += d * d;
      }
      errs[j] = e / pixels;
    });
    double total = 0.0;
    for (double e : errs) total += e;
    return total / n_val;
  };

  TrainResult result;
  detail::ModelSnapshot best = detail::ModelSnapshot::capture(model);
  double best_val = std::numeric_limits<double>::infinity();

  std::vector<int> order(n_train);
  for (int i = 0; i < n_train; ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr_scale = 1.0;
    if (cfg.linear_warm_decay) lr_scale = 1.0 - 0.5 * std::min(epoch, 5) / 5.0;

    Rng shuffle_rng(cfg.seed + 1000003ull * (epoch + 1));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    long long epoch_count = 0;
    for (int start = 0; start < n_train; start += cfg.batch_size) {
      int batch = std::min(cfg.batch_size, n_train - start);
      std::vector<ParameterGradients> grads(batch);
      std::vector<double> losses(batch, 0.0);
      parallel_for(batch, [&](int b) {
        int k = order[start + b];
        AdaptiveRegularizer local = model;
        SolverResult sol = solve_prox(k, local);
        local.set_sigma(sigmas[k]);
        local.clear_mask();
        Image loss_grad(sol.x_hat.height, sol.x_hat.width, 0.0);
        double l1 = 0.0;
        for (int i = 0; i < pixels; ++i) {
          double d = sol.x_hat.data[i] - patches[k].data[i];
          l1 += std::abs(d);
          loss_grad.data[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / pixels;
        }
        losses[b] = l1 / pixels;
        ImplicitGradientOptions opt;
        opt.cg_tol = cfg.cg_tol;
        opt.cg_max_iters = cfg.cg_max_iters;
        opt.residual_tol = std::numeric_limits<double>::infinity();  // prox tol already enforced
        opt.spline = cfg.train_spline;
        opt.mu = cfg.train_mu;
        opt.alpha = cfg.train_alpha;
        grads[b] = implicit_gradient(local, noisy[k], sol.x_hat, loss_grad, 1.0, opt);
      });

      // order-fixed accumulation
      std::vector<double> g_spline(model.potential().intervals(), 0.0);
      double g_mu = 0.0;
      std::vector<double> g_alpha(static_cast<size_t>(n_channels) * n_knots, 0.0);
      for (int b = 0; b < batch; ++b) {
        epoch_loss += losses[b];
        ++epoch_count;
        if (cfg.train_spline)
          for (size_t i = 0; i < g_spline.size(); ++i) g_spline[i] += grads[b].psi_plus[i] / batch;
        if (cfg.train_mu) g_mu += grads[b].log_mu / batch;
        if (cfg.train_alpha && !grads[b].alpha_values.empty())
          for (int c = 0; c < n_channels; ++c)
            for (int k2 = 0; k2 < n_knots; ++k2)
              g_alpha[static_cast<size_t>(c) * n_knots + k2] += grads[b].alpha_values[c][k2] / batch;
      }

      if (cfg.train_spline && cfg.lr_spline > 0.0) {
        std::vector<double> coeffs = model.potential().plus_coefficients();
        adam_spline.step(coeffs, g_spline, cfg.lr_spline * lr_scale);
        model.potential().set_plus_coefficients(project_coefficients(coeffs));
      }
      if (cfg.train_mu && cfg.lr_mu > 0.0) {
        double log_mu = std::log(model.potential().mu());
        adam_mu.step_scalar(log_mu, g_mu, cfg.lr_mu * lr_scale);
        model.potential().set_mu(std::exp(log_mu));
      }
      if (cfg.train_alpha && cfg.lr_alpha > 0.0 && !model.noise_scalings().empty()) {
        std::vector<double> flat(static_cast<size_t>(n_channels) * n_knots);
        auto scalings = model.noise_scalings();
        for (int c = 0; c < n_channels; ++c)
          for (int k2 = 0; k2 < n_knots; ++k2)
            flat[static_cast<size_t>(c) * n_knots + k2] = scalings[c].values[k2];
        adam_alpha.step(flat, g_alpha, cfg.lr_alpha * lr_scale);
        for (int c = 0; c < n_channels; ++c)
          for (int k2 = 0; k2 < n_knots; ++k2)
            scalings[c].values[k2] = flat[static_cast<size_t>(c) * n_knots + k2];
        model.set_noise_scalings(scalings);
      }
    }

    double mean_loss = epoch_count ? epoch_loss / epoch_count : 0.0;
    if (!std::isfinite(mean_loss)) {
      result.diverged = true;
      best.restore(model);
      return result;
    }
    result.loss_trace.push_back(mean_loss);
    double val = validation_mse();
    result.val_trace.push_back(val);
    if (n_val == 0 || val < best_val) {
      best_val = val;
      best = detail::ModelSnapshot::capture(model);
      result.best_epoch = epoch;
    }
  }

  best.restore(model);
  return result;
}

// ---------------------------------------------------------------------------
// Mask-provider finetuning against a reconstruction task
// ---------------------------------------------------------------------------

struct FinetuneConfig {
  int epochs = 10;
  double lr_gain = 0.05;
  double lr_offsets = 0.01;
  double lambda = 1.0;
  double sigma = 25.0 / 255.0;  // model noise input
  double epsilon = 0.01;
  double solver_tol = 1e-7;
  int solver_max_iters = 1000;
  double cg_tol = 1e-8;
  int cg_max_iters = 300;
};

struct FinetuneResult {
  std::vector<double> loss_trace;  // mean L1 per epoch
};

// Optimizes (gain, per-channel threshold offsets) of a local_response
// provider by implicit differentiation through the second stage only; the
// stage-one estimates are computed once and treated as data. The model is
// frozen throughout. Gain is clamped to stay nonnegative.
inline FinetuneResult finetune_mask_provider(const AdaptiveRegularizer& model,
                                             MaskProvider& provider,
                                             const std::vector<Image>& truths,
                                             const std::vector<std::vector<double>>& data,
                                             const LinearOperator& forward,
                                             const Fidelity& fidelity, const FinetuneConfig& cfg) {
  require(provider.kind == MaskKind::local_response,
          "finetune_mask_provider: provider must be local_response");
  require(truths.size() == data.size() && !truths.empty(),
          "finetune_mask_provider: truths and data must pair up");
  if (provider.threshold_offsets.empty())
    provider.threshold_offsets.assign(model.bank().n_channels(), 0.0);

  const int n = static_cast<int>(truths.size());

  // stage-one estimates are independent of the provider parameters
  std::vector<Image> estimates(n);
  parallel_for(n, [&](int i) {
    AdaptiveRegularizer reg = model;
    reg.set_sigma(cfg.sigma);
    reg.clear_mask();
    ReconstructionProblem p;
    p.forward = &forward;
    p.fidelity = fidelity;
    p.regularizer = &reg;
    p.lambda = cfg.lambda;
    p.y = data[i];
    p.init = forward.initial_estimate(data[i]);
    estimates[i] = agd_minimize(p, cfg.solver_tol, cfg.solver_max_iters).x_hat;
  });

  FinetuneResult result;
  Adam adam_gain(1);
  Adam adam_offsets(provider.threshold_offsets.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<ParameterGradients> grads(n);
    std::vector<double> losses(n, 0.0);
    parallel_for(n, [&](int i) {
      AdaptiveRegularizer reg = model;
      reg.set_sigma(cfg.sigma);
      reg.set_mask(make_mask(provider, estimates[i], reg.bank(), cfg.epsilon));
      ReconstructionProblem p;
      p.forward = &forward;
      p.fidelity = fidelity;
      p.regularizer = &reg;
      p.lambda = cfg.lambda;
      p.y = data[i];
      p.init = estimates[i];
      SolverResult sol = agd_minimize(p, cfg.solver_tol, cfg.solver_max_iters);
      int pixels = sol.x_hat.size();
      Image loss_grad(sol.x_hat.height, sol.x_hat.width, 0.0);
      double l1 = 0.0;
      for (int j = 0; j < pixels; ++j) {
        double d = sol.x_hat.data[j] - truths[i].data[j];
        l1 += std::abs(d);
        loss_grad.data[j] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / pixels;
      }
      losses[i] = l1 / pixels;
      ImplicitGradientOptions opt;
      opt.cg_tol = cfg.cg_tol;
      opt.cg_max_iters = cfg.cg_max_iters;
      opt.residual_tol = std::numeric_limits<double>::infinity();
      opt.spline = false;
      opt.mu = false;
      opt.alpha = false;
      opt.provider = &provider;
      opt.x_est = &estimates[i];
      grads[i] = implicit_gradient_reconstruction(p, sol.x_hat, loss_grad, opt);
    });

    double g_gain = 0.0;
    std::vector<double> g_off(provider.threshold_offsets.size(), 0.0);
    double mean_loss = 0.0;
    for (int i = 0; i < n; ++i) {
      mean_loss += losses[i] / n;
      g_gain += grads[i].mask_gain / n;
      for (size_t c = 0; c < g_off.size(); ++c) g_off[c] += grads[i].mask_threshold_offsets[c] / n;
    }
    result.loss_trace.push_back(mean_loss);

    adam_gain.step_scalar(provider.gain, g_gain, cfg.lr_gain);
    provider.gain = std::max(0.0, provider.gain);
    adam_offsets.step(provider.threshold_offsets, g_off, cfg.lr_offsets);
  }
  return result;
}

}  // namespace ridge

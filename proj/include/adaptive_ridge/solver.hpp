#pragma once

#include <utility>
#include <vector>

#include "core.hpp"
#include "forward_models.hpp"
#include "regularizer.hpp"

namespace ridge {

// g_y(x) = D(Hx, y) + lambda * R_y(x). The regularizer may be absent
// (pure data-fit problems in tests and probes).
struct ReconstructionProblem {
  const LinearOperator* forward = nullptr;
  Fidelity fidelity;
  const AdaptiveRegularizer* regularizer = nullptr;
  double lambda = 1.0;
  std::vector<double> y;
  Image init;
  double hx_lower_bound = 0.0;  // Lipschitz range for the ct fidelity

  double objective(const Image& x) const {
    double v = fidelity.value(forward->apply(x), y);
    if (regularizer && lambda != 0.0) v += lambda * regularizer->evaluate(x);
    return v;
  }

  Image gradient(const Image& x) const {
    Image g = forward->adjoint(fidelity.gradient(forward->apply(x), y));
    if (regularizer && lambda != 0.0) axpy(lambda, regularizer->gradient(x), g);
    return g;
  }

  double value_and_gradient(const Image& x, Image& grad_out) const {
    std::vector<double> hx = forward->apply(x);
    double v = fidelity.value(hx, y);
    grad_out = forward->adjoint(fidelity.gradient(hx, y));
    if (regularizer && lambda != 0.0) {
      Image rg;
      v += lambda * regularizer->value_and_gradient(x, rg);
      axpy(lambda, rg, grad_out);
    }
    return v;
  }

  double lipschitz_bound() const {
    double hn = forward->norm_estimate();
    double l = fidelity.gradient_lipschitz(hx_lower_bound) * hn * hn;
    if (regularizer && lambda != 0.0) l += lambda * regularizer->lipschitz_gradient_bound();
    require(l > 0.0 && std::isfinite(l), "ReconstructionProblem: Lipschitz bound not positive");
    return l;
  }
};

struct SolverResult {
  Image x_hat;
  int iterations = 0;
  double final_gradient_norm = 0.0;  // ||grad g(x_hat)|| / sqrt(pixel count)
  std::vector<double> objective_trace;
  std::vector<int> restart_iterations;
  bool converged = false;
};

// ||grad g_y(x)|| / sqrt(pixel count)
inline double optimality_residual(const ReconstructionProblem& problem, const Image& x) {
  return norm2(problem.gradient(x)) / std::sqrt(static_cast<double>(x.size()));
}

// Nesterov-accelerated gradient descent with step 1/L and gradient-based
// adaptive restart: momentum resets whenever the gradient at the
// extrapolated point makes an obtuse angle with the last move. Stops when
// ||grad g(x_k)|| <= tol * max(1, ||grad g(x_0)||).
inline SolverResult agd_minimize(const ReconstructionProblem& problem, double tol = 1e-6,
                                 int max_iters = 2000) {
  const double step = 1.0 / problem.lipschitz_bound();
  SolverResult res;
  Image x = problem.init;
  Image x_prev = x;
  Image z = x;
  Image grad_x;
  double f0 = problem.value_and_gradient(x, grad_x);
  if (!std::isfinite(f0)) throw NumericalError("agd_minimize: objective not finite at init");
  double g0 = norm2(grad_x);
  double threshold = tol * std::max(1.0, g0);
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(x.size()));
  res.objective_trace.push_back(f0);
  if (g0 <= threshold) {
    res.x_hat = x;
    res.final_gradient_norm = g0 * inv_sqrt_n;
    res.converged = true;
    return res;
  }

  double t_momentum = 1.0;
  Image grad_z = grad_x;
  for (int k = 0; k < max_iters; ++k) {
    // descent step from the extrapolated point
    Image x_new = z;
    axpy(-step, grad_z, x_new);

    // restart test on the move just made
    double sweep = 0.0;
    for (int i = 0; i < x_new.size(); ++i)
      sweep += grad_z.data[i] * (x_new.data[i] - x.data[i]);
    if (sweep > 0.0) {
      t_momentum = 1.0;
      z = x;  // drop momentum, redo as plain gradient step from x
      grad_z = grad_x;
      x_new = z;
      axpy(-step, grad_z, x_new);
      res.restart_iterations.push_back(k);
    }

    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
    double beta = (t_momentum - 1.0) / t_next;
    x_prev = std::move(x);
    x = std::move(x_new);
    t_momentum = t_next;

    double f = problem.value_and_gradient(x, grad_x);
    if (!std::isfinite(f))
      throw NumericalError("agd_minimize: objective became non-finite at iteration " +
                           std::to_string(k + 1));
    res.objective_trace.push_back(f);
    res.iterations = k + 1;
    double gn = norm2(grad_x);
    if (gn <= threshold) {
      res.converged = true;
      res.final_gradient_norm = gn * inv_sqrt_n;
      res.x_hat = x;
      return res;
    }

    z = x;
    for (int i = 0; i < z.size(); ++i) z.data[i] += beta * (x.data[i] - x_prev.data[i]);
    grad_z = problem.gradient(z);
  }
  res.x_hat = x;
  res.final_gradient_norm = norm2(grad_x) * inv_sqrt_n;
  res.converged = false;
  return res;
}

// prox_{lambda R_sigma}(y): minimizes 0.5 ||x - y||^2 + lambda R_sigma(x).
// Mask defaults to all ones unless one is supplied.
inline SolverResult prox_denoise(const AdaptiveRegularizer& regularizer, const Image& y,
                                 double sigma, double lambda, double tol = 1e-6,
                                 int max_iters = 2000, const SpatialMask* mask = nullptr) {
  AdaptiveRegularizer reg = regularizer;
  reg.set_sigma(sigma);
  if (mask)
    reg.set_mask(*mask);
  else
    reg.clear_mask();
  IdentityOp ident(y.height, y.width);
  ReconstructionProblem p;
  p.forward = &ident;
  p.fidelity = Fidelity::quadratic(1.0);
  p.regularizer = &reg;
  p.lambda = lambda;
  p.y = y.data;
  p.init = y;
  return agd_minimize(p, tol, max_iters);
}

struct AdaptiveResult {
  Image x_est;
  Image x_hat;
  SpatialMask mask;
  SolverResult stage1;
  SolverResult stage2;
};

// Two-stage pipeline: solve with the all-ones mask for x_est, derive the
// mask from x_est, then re-solve initialized at x_est.
inline AdaptiveResult reconstruct_adaptive(const std::vector<double>& y, const LinearOperator& h,
                                           const Fidelity& fidelity,
                                           const AdaptiveRegularizer& regularizer, double lambda,
                                           double sigma, const MaskProvider& provider,
                                           double epsilon, double tol = 1e-6,
                                           int max_iters = 2000) {
  AdaptiveRegularizer reg = regularizer;
  reg.set_sigma(sigma);
  reg.clear_mask();

  ReconstructionProblem p;
  p.forward = &h;
  p.fidelity = fidelity;
  p.regularizer = &reg;
  p.lambda = lambda;
  p.y = y;
  p.init = h.initial_estimate(y);

  AdaptiveResult out;
  out.stage1 = agd_minimize(p, tol, max_iters);
  out.x_est = out.stage1.x_hat;

  out.mask = make_mask(provider, out.x_est, reg.bank(), epsilon);
  reg.set_mask(out.mask);
  p.init = out.x_est;
  out.stage2 = agd_minimize(p, tol, max_iters);
  out.x_hat = out.stage2.x_hat;
  return out;
}

// Coarse-to-fine grid search over (lambda, sigma): three levels with step
// factors 2, 1.25 and 1.0625, five points per axis per level, centered on
// the previous best. score(lambda, sigma) is maximized.
template <class Score>
std::pair<double, double> coarse_to_fine_search(Score&& score, double lambda0, double sigma0) {
  double best_l = lambda0, best_s = sigma0;
  double best_score = score(lambda0, sigma0);
  const double factors[3] = {2.0, 1.25, 1.0625};
  for (double f : factors) {
    double base_l = best_l, base_s = best_s;
    for (int i = -2; i <= 2; ++i) {
      for (int j = -2; j <= 2; ++j) {
        if (i == 0 && j == 0) continue;
        double l = base_l * std::pow(f, i);
        double s = base_s * std::pow(f, j);
        double v = score(l, s);
        if (v > best_score) {
          best_score = v;
          best_l = l;
          best_s = s;
        }
      }
    }
  }
  return {best_l, best_s};
}

}  // namespace ridge

#pragma once

#include <vector>

#include "core.hpp"
#include "filter_bank.hpp"
#include "linalg.hpp"
#include "regularizer.hpp"
#include "rng.hpp"
#include "solver.hpp"

namespace ridge {

// ---------------------------------------------------------------------------
// Hoffman machinery for the polyhedron { x : E x = b, F x <= q }.
// Dense and exact, sized for desk-scale diagnostics.
// ---------------------------------------------------------------------------

struct PolyhedralSystem {
  Matrix e;  // equalities
  Matrix f;  // inequalities
  Vector b;
  Vector q;
};

namespace detail {

constexpr double kRankTol = 1e-10;

inline void check_hoffman_sizes(const Matrix& e, const Matrix& f) {
  require(e.cols() == f.cols() || f.rows() == 0 || e.rows() == 0,
          "hoffman: dimension mismatch between E and F");
  int n = static_cast<int>(std::max(e.cols(), f.cols()));
  require(n >= 1 && n <= 12, "hoffman: variable count limited to 12");
  require(f.rows() <= 24, "hoffman: inequality rows limited to 24");
}

// DFS over row subsets of F, pruning as soon as the rows become dependent.
inline void enumerate_independent_subsets(const Matrix& f, int first, std::vector<int>& current,
                                          std::vector<std::vector<int>>& out) {
  out.push_back(current);
  for (int j = first; j < f.rows(); ++j) {
    current.push_back(j);
    Matrix rows(current.size(), f.cols());
    for (size_t i = 0; i < current.size(); ++i) rows.row(static_cast<int>(i)) = f.row(current[i]);
    if (numeric_rank(rows, kRankTol) == static_cast<int>(current.size())) {
      enumerate_independent_subsets(f, j + 1, current, out);
    }
    current.pop_back();
  }
}

}  // namespace detail

// All J with rank(F_J) = |J| and ran(E^T) intersecting ran(F_J^T) only at 0.
inline std::vector<std::vector<int>> feasible_subsets(const Matrix& e, const Matrix& f) {
  detail::check_hoffman_sizes(e, f);
  std::vector<std::vector<int>> independent;
  std::vector<int> current;
  detail::enumerate_independent_subsets(f, 0, current, independent);
  std::vector<std::vector<int>> out;
  for (const auto& j : independent) {
    if (j.empty()) {
      out.push_back(j);
      continue;
    }
    Matrix fj(j.size(), f.cols());
    for (size_t i = 0; i < j.size(); ++i) fj.row(static_cast<int>(i)) = f.row(j[i]);
    if (rowspaces_intersect_trivially(e, fj, detail::kRankTol)) out.push_back(j);
  }
  return out;
}

// min { ||E^T u + F_J^T v|| : u in ran(E), v >= 0, ||(u, v)|| = 1 }, solved
// exactly by enumerating the active sign patterns of v: on each face the
// stationary points are eigenvectors of the reduced Gram matrix, and the
// constrained minimizer appears among the sign-feasible eigenpairs.
inline double hoffman_inner_minimum(const Matrix& e, const Matrix& f, const std::vector<int>& j) {
  Matrix basis = rowspace_basis(e.transpose(), detail::kRankTol);  // columns span ran(E)
  int r = static_cast<int>(basis.cols());
  int nj = static_cast<int>(j.size());
  if (r + nj == 0) return std::numeric_limits<double>::infinity();

  Matrix m(e.cols() > 0 ? e.cols() : f.cols(), r + nj);
  if (r > 0) m.leftCols(r) = e.transpose() * basis;
  for (int i = 0; i < nj; ++i) m.col(r + i) = f.row(j[i]).transpose();
  Matrix gram = m.transpose() * m;

  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << nj); ++mask) {
    std::vector<int> keep;  // coordinates staying free
    for (int i = 0; i < r; ++i) keep.push_back(i);
    for (int i = 0; i < nj; ++i)
      if (!(mask & (1u << i))) keep.push_back(r + i);
    if (keep.empty()) continue;
    Matrix sub(keep.size(), keep.size());
    for (size_t a = 0; a < keep.size(); ++a)
      for (size_t b = 0; b < keep.size(); ++b) sub(a, b) = gram(keep[a], keep[b]);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sub);
    for (int k = 0; k < eig.eigenvalues().size(); ++k) {
      Vector w = eig.eigenvectors().col(k);
      bool plus_ok = true, minus_ok = true;
      for (size_t a = 0; a < keep.size(); ++a) {
        if (keep[a] < r) continue;  // u coordinates are unconstrained
        if (w(static_cast<int>(a)) < -1e-10) plus_ok = false;
        if (w(static_cast<int>(a)) > 1e-10) minus_ok = false;
      }
      if (plus_ok || minus_ok) best = std::min(best, std::max(eig.eigenvalues()(k), 0.0));
    }
  }
  return std::sqrt(best);
}

// K(E, F) = max over feasible subsets of the reciprocal inner minimum.
inline double hoffman_constant(const Matrix& e, const Matrix& f) {
  auto subsets = feasible_subsets(e, f);
  double k = 0.0;
  bool any = false;
  for (const auto& j : subsets) {
    double inner = hoffman_inner_minimum(e, f, j);
    if (!std::isfinite(inner)) continue;  // empty sphere (E = 0 and J empty)
    require(inner > 1e-13, "hoffman_constant: degenerate subset with zero inner minimum");
    any = true;
    k = std::max(k, 1.0 / inner);
  }
  require(any, "hoffman_constant: degenerate input (no usable subsets)");
  return k;
}

// Exact projection onto the polyhedron by enumerating active sets; the true
// projection's active set always appears among the candidates.
inline bool project_onto_polyhedron(const PolyhedralSystem& sys, const Vector& x0,
                                    Vector* projection) {
  int l = static_cast<int>(sys.f.rows());
  require(l <= 16, "project_onto_polyhedron: inequality rows limited to 16");
  int n = static_cast<int>(sys.e.cols() > 0 ? sys.e.cols() : sys.f.cols());
  double best = std::numeric_limits<double>::infinity();
  Vector best_x;
  const double feas_tol = 1e-9;
  for (unsigned mask = 0; mask < (1u << l); ++mask) {
    int active = 0;
    for (int i = 0; i < l; ++i)
      if (mask & (1u << i)) ++active;
    Matrix c(sys.e.rows() + active, n);
    Vector d(sys.e.rows() + active);
    if (sys.e.rows() > 0) {
      c.topRows(sys.e.rows()) = sys.e;
      d.head(sys.e.rows()) = sys.b;
    }
    int row = static_cast<int>(sys.e.rows());
    for (int i = 0; i < l; ++i) {
      if (mask & (1u << i)) {
        c.row(row) = sys.f.row(i);
        d(row) = sys.q(i);
        ++row;
      }
    }
    Vector x = project_onto_affine(c, d, x0);
    bool ok = true;
    if (sys.e.rows() > 0 && (sys.e * x - sys.b).lpNorm<Eigen::Infinity>() > feas_tol) ok = false;
    if (ok && l > 0 && (sys.f * x - sys.q).maxCoeff() > feas_tol) ok = false;
    if (ok) {
      double dist = (x - x0).norm();
      if (dist < best) {
        best = dist;
        best_x = x;
      }
    }
  }
  if (!std::isfinite(best)) return false;
  if (projection) *projection = best_x;
  return true;
}

inline bool polyhedron_feasible(const PolyhedralSystem& sys) {
  int n = static_cast<int>(sys.e.cols() > 0 ? sys.e.cols() : sys.f.cols());
  return project_onto_polyhedron(sys, Vector::Zero(n), nullptr);
}

struct DistanceCheck {
  double bound = 0.0;
  double true_distance = 0.0;
};

// bound = K(E, F) ||(E x - b, (F x - q)_+)|| against the exact projection.
inline DistanceCheck hoffman_distance_check(const PolyhedralSystem& sys, const Vector& probe) {
  require(polyhedron_feasible(sys), "hoffman_distance_check: infeasible system");
  DistanceCheck out;
  double residual_sq = 0.0;
  if (sys.e.rows() > 0) residual_sq += (sys.e * probe - sys.b).squaredNorm();
  if (sys.f.rows() > 0) {
    Vector viol = sys.f * probe - sys.q;
    for (int i = 0; i < viol.size(); ++i) residual_sq += std::pow(std::max(viol(i), 0.0), 2);
  }
  out.bound = hoffman_constant(sys.e, sys.f) * std::sqrt(residual_sq);
  Vector proj;
  project_onto_polyhedron(sys, probe, &proj);
  out.true_distance = (proj - probe).norm();
  return out;
}

// ---------------------------------------------------------------------------
// Empirical stability certificates for the solution map
// ---------------------------------------------------------------------------

struct LipschitzProbeResult {
  double max_ratio = 0.0;
  double bound = 0.0;
};

// ||H^-1|| for invertible desk-scale operators: exact for the identity,
// dense smallest singular value otherwise.
inline double inverse_norm(const LinearOperator& h) {
  if (dynamic_cast<const IdentityOp*>(&h)) return 1.0;
  require(h.output_size() == h.input_height() * h.input_width(),
          "inverse_norm: operator is not square");
  Matrix m = assemble_dense(h, h.input_height(), h.input_width());
  double sv = smallest_singular_value(m);
  require(sv > 1e-12, "inverse_norm: operator numerically singular");
  return 1.0 / sv;
}

// Solves pairs of problems with perturbed data and reports the worst ratio
// ||x1 - x2|| / ||y1 - y2|| against the bound ||H^-1|| (quadratic fidelity,
// convex model; its sigma scaling folds into lambda and cancels).
inline LipschitzProbeResult empirical_solution_map_lipschitz(const LinearOperator& h,
                                                             const Fidelity& fidelity,
                                                             const AdaptiveRegularizer& model,
                                                             double lambda,
                                                             const std::vector<double>& y0,
                                                             int n_pairs, double radius,
                                                             std::uint64_t seed,
                                                             double tol = 1e-9,
                                                             int max_iters = 20000) {
  require(model.potential().c_cvx() == 0.0,
          "empirical_solution_map_lipschitz: model must be convex");
  require(fidelity.kind == Fidelity::Kind::scaled_quadratic,
          "empirical_solution_map_lipschitz: quadratic fidelity required");
  LipschitzProbeResult out;
  out.bound = inverse_norm(h);
  const int m = static_cast<int>(y0.size());
  std::vector<double> ratios(n_pairs, 0.0);
  parallel_for(n_pairs, [&](int pair) {
    Rng rng(seed + 1013904223ull * (pair + 1));
    auto solve_for = [&](const std::vector<double>& y) {
      ReconstructionProblem p;
      p.forward = &h;
      p.fidelity = fidelity;
      p.regularizer = &model;
      p.lambda = lambda;
      p.y = y;
      p.init = h.initial_estimate(y);
      return agd_minimize(p, tol, max_iters).x_hat;
    };
    std::vector<double> y1 = y0, y2 = y0;
    std::vector<double> u1 = rng.unit_vector(m), u2 = rng.unit_vector(m);
    double r1 = radius * rng.uniform(), r2 = radius * rng.uniform();
    for (int i = 0; i < m; ++i) {
      y1[i] += r1 * u1[i];
      y2[i] += r2 * u2[i];
    }
    Image x1 = solve_for(y1), x2 = solve_for(y2);
    double dx = 0.0, dy = 0.0;
    for (int i = 0; i < x1.size(); ++i) dx += (x1.data[i] - x2.data[i]) * (x1.data[i] - x2.data[i]);
    for (int i = 0; i < m; ++i) dy += (y1[i] - y2[i]) * (y1[i] - y2[i]);
    ratios[pair] = dy > 0.0 ? std::sqrt(dx / dy) : 0.0;
  });
  for (double r : ratios) out.max_ratio = std::max(out.max_ratio, r);
  return out;
}

// Mask-sensitivity variant: perturbs the mask at fixed data and compares the
// ratio ||x1 - x2|| / ||L1 - L2|| with
//   lambda sigma^2 ||H^-1||^2 sqrt( sum_c sup|psi_c'|^2 ||W_c||^2 ).
inline LipschitzProbeResult empirical_mask_sensitivity(const LinearOperator& h,
                                                       const Fidelity& fidelity,
                                                       const AdaptiveRegularizer& model,
                                                       double lambda,
                                                       const std::vector<double>& y0,
                                                       double epsilon, int n_pairs,
                                                       std::uint64_t seed, double tol = 1e-9,
                                                       int max_iters = 20000) {
  require(model.potential().c_cvx() == 0.0, "empirical_mask_sensitivity: model must be convex");
  require(fidelity.kind == Fidelity::Kind::scaled_quadratic,
          "empirical_mask_sensitivity: quadratic fidelity required");
  LipschitzProbeResult out;
  double hinv = inverse_norm(h);
  double sum = 0.0;
  for (int c = 0; c < model.bank().n_channels(); ++c) {
    double sup_slope = model.potential().max_abs_first_deriv() / model.alpha(c);
    double wc = model.bank().channel_norm_upper_bound(c);
    sum += sup_slope * sup_slope * wc * wc;
  }
  out.bound = lambda * fidelity.sigma * fidelity.sigma * hinv * hinv * std::sqrt(sum);

  const int hgt = h.input_height(), wid = h.input_width();
  std::vector<double> ratios(n_pairs, 0.0);
  parallel_for(n_pairs, [&](int pair) {
    Rng rng(seed + 48271ull * (pair + 1));
    auto random_mask = [&]() {
      SpatialMask m;
      m.epsilon = epsilon;
      for (int c = 0; c < model.bank().n_channels(); ++c) {
        Image wimg(hgt, wid);
        for (double& v : wimg.data) v = rng.uniform(epsilon, 1.0);
        m.weights.push_back(std::move(wimg));
      }
      return m;
    };
    auto solve_with = [&](const SpatialMask& m) {
      AdaptiveRegularizer reg = model;
      reg.set_mask(m);
      ReconstructionProblem p;
      p.forward = &h;
      p.fidelity = fidelity;
      p.regularizer = &reg;
      p.lambda = lambda;
      p.y = y0;
      p.init = h.initial_estimate(y0);
      return agd_minimize(p, tol, max_iters).x_hat;
    };
    SpatialMask m1 = random_mask(), m2 = random_mask();
    Image x1 = solve_with(m1), x2 = solve_with(m2);
    double dx = 0.0, dm = 0.0;
    for (int i = 0; i < x1.size(); ++i) dx += (x1.data[i] - x2.data[i]) * (x1.data[i] - x2.data[i]);
    for (int c = 0; c < model.bank().n_channels(); ++c)
      for (int i = 0; i < hgt * wid; ++i) {
        double d = m1.weights[c].data[i] - m2.weights[c].data[i];
        dm += d * d;
      }
    ratios[pair] = dm > 0.0 ? std::sqrt(dx / dm) : 0.0;
  });
  for (double r : ratios) out.max_ratio = std::max(out.max_ratio, r);
  return out;
}

// ---------------------------------------------------------------------------
// Vanishing-noise rate experiments
// ---------------------------------------------------------------------------

struct RateExperiment {
  const LinearOperator* forward = nullptr;
  const AdaptiveRegularizer* regularizer = nullptr;  // convex
  Image x_true;
  double delta_max = 1e-1;
  double delta_min = 1e-4;
  int n_levels = 9;
  double lambda_coefficient = 1.0;  // lambda(delta) = c sqrt(delta)
  int n_seeds = 5;
  std::uint64_t seed = 7;
  double solve_tol = 1e-11;
  int max_iters = 50000;
  double lambda_floor = 1e-8;
};

struct RateResult {
  std::vector<double> deltas;
  std::vector<std::vector<double>> errors;  // [seed][level]
  std::vector<double> slopes;               // per seed
  double slope = 0.0;
  bool degenerate = false;
};

// Corrupts clean data at geometric noise levels, solves with
// lambda = c sqrt(delta), and fits the log-log slope of ||x_k - x_0||
// against delta; x_0 solves the lambda-floor limit problem.
inline RateResult vanishing_noise_rates(const RateExperiment& exp) {
  require(exp.n_levels >= 4, "vanishing_noise_rates: need at least 4 delta levels");
  require(exp.regularizer && exp.regularizer->potential().c_cvx() == 0.0,
          "vanishing_noise_rates: convex model required");
  require(exp.delta_max > exp.delta_min && exp.delta_min > 0.0,
          "vanishing_noise_rates: bad delta range");

  RateResult out;
  const LinearOperator& h = *exp.forward;
  std::vector<double> y_clean = h.apply(exp.x_true);
  const int m = static_cast<int>(y_clean.size());

  out.deltas.resize(exp.n_levels);
  double ratio = std::pow(exp.delta_min / exp.delta_max, 1.0 / (exp.n_levels - 1));
  for (int k = 0; k < exp.n_levels; ++k) out.deltas[k] = exp.delta_max * std::pow(ratio, k);

  auto solve_for = [&](const std::vector<double>& y, double lambda, const Image& init) {
    ReconstructionProblem p;
    p.forward = &h;
    p.fidelity = Fidelity::quadratic(1.0);
    p.regularizer = exp.regularizer;
    p.lambda = lambda;
    p.y = y;
    p.init = init;
    return agd_minimize(p, exp.solve_tol, exp.max_iters).x_hat;
  };

  Image x0 = solve_for(y_clean, exp.lambda_floor, exp.x_true);

  out.errors.assign(exp.n_seeds, std::vector<double>(exp.n_levels, 0.0));
  std::vector<std::vector<double>> noise(exp.n_seeds);
  for (int s = 0; s < exp.n_seeds; ++s) {
    Rng rng(exp.seed + 7919ull * (s + 1));
    noise[s] = rng.unit_vector(m);
  }
  parallel_for(exp.n_seeds * exp.n_levels, [&](int idx) {
    int s = idx / exp.n_levels;
    int k = idx % exp.n_levels;
    std::vector<double> y = y_clean;
    for (int i = 0; i < m; ++i) y[i] += out.deltas[k] * noise[s][i];
    double lambda = exp.lambda_coefficient * std::sqrt(out.deltas[k]);
    Image xk = solve_for(y, lambda, x0);
    double e = 0.0;
    for (int i = 0; i < xk.size(); ++i) e += (xk.data[i] - x0.data[i]) * (xk.data[i] - x0.data[i]);
    out.errors[s][k] = std::sqrt(e);
  });

  double max_err = 0.0;
  for (const auto& row : out.errors)
    for (double e : row) max_err = std::max(max_err, e);
  if (max_err < 1e-7) {
    out.degenerate = true;  // errors at solver tolerance; no meaningful fit
    return out;
  }

  for (int s = 0; s < exp.n_seeds; ++s) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int n = 0;
    for (int k = 0; k < exp.n_levels; ++k) {
      if (out.errors[s][k] <= 0.0) continue;
      double lx = std::log(out.deltas[k]), ly = std::log(out.errors[s][k]);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++n;
    }
    require(n >= 4, "vanishing_noise_rates: too few usable error levels");
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    out.slopes.push_back(slope);
    out.slope += slope / exp.n_seeds;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gibbs-prior coercivity
// ---------------------------------------------------------------------------

struct CoercivityOptions {
  int exact_max_pixels = 12;
  int n_starts = 200;
  int subgradient_iters = 400;
  std::uint64_t seed = 5;
};

struct CoercivityResult {
  double gamma = 0.0;
  bool exact = false;
};

// gamma = min over the l1 unit sphere of max_c ||W_c x||_1. Exact mode runs
// one linear program per orthant facet; above the pixel limit a seeded
// multi-start projected subgradient descent reports an upper estimate.
inline CoercivityResult gibbs_coercivity(const FilterBank& bank, int grid_h, int grid_w,
                                         const CoercivityOptions& opt = {}) {
  const int n = grid_h * grid_w;
  require(n <= 64, "gibbs_coercivity: grid limited to 64 pixels");
  const int n_channels = bank.n_channels();
  CoercivityResult out;

  // dense response columns per channel
  std::vector<Matrix> cols(n_channels, Matrix(n, n));
  {
    Image probe(grid_h, grid_w, 0.0);
    for (int p = 0; p < n; ++p) {
      probe.data[p] = 1.0;
      for (int c = 0; c < n_channels; ++c) {
        Image resp = bank.apply_channel(c, probe);
        for (int i = 0; i < n; ++i) cols[c](i, p) = resp.data[i];
      }
      probe.data[p] = 0.0;
    }
  }
  auto objective = [&](const Vector& x) {
    double best = 0.0;
    for (int c = 0; c < n_channels; ++c) best = std::max(best, (cols[c] * x).lpNorm<1>());
    return best;
  };

  if (n <= opt.exact_max_pixels) {
    out.exact = true;
    out.gamma = std::numeric_limits<double>::infinity();
    // variables: t (n), z (n_channels * n), g; minimize g
    const int nv = n + n_channels * n + 1;
    Vector c = Vector::Zero(nv);
    c(nv - 1) = 1.0;
    const int rows = 2 * n_channels * n + n_channels + 2;
    for (unsigned sign_mask = 0; sign_mask < (1u << (n - 1)); ++sign_mask) {
      // fix the last sign to +1: the objective is sign-symmetric
      Vector s(n);
      for (int p = 0; p < n - 1; ++p) s(p) = (sign_mask & (1u << p)) ? -1.0 : 1.0;
      s(n - 1) = 1.0;
      Matrix a = Matrix::Zero(rows, nv);
      Vector b = Vector::Zero(rows);
      int row = 0;
      for (int ch = 0; ch < n_channels; ++ch) {
        for (int i = 0; i < n; ++i) {
          for (int p = 0; p < n; ++p) {
            double w = cols[ch](i, p) * s(p);
            a(row, p) = w;
            a(row + 1, p) = -w;
          }
          a(row, n + ch * n + i) = -1.0;
          a(row + 1, n + ch * n + i) = -1.0;
          row += 2;
        }
      }
      for (int ch = 0; ch < n_channels; ++ch) {
        for (int i = 0; i < n; ++i) a(row, n + ch * n + i) = 1.0;
        a(row, nv - 1) = -1.0;
        ++row;
      }
      for (int p = 0; p < n; ++p) {
        a(row, p) = 1.0;
        a(row + 1, p) = -1.0;
      }
      b(row) = 1.0;
      b(row + 1) = -1.0;
      LpResult lp = solve_lp(a, b, c);
      require(lp.status == LpResult::Status::optimal, "gibbs_coercivity: facet LP failed");
      out.gamma = std::min(out.gamma, lp.value);
    }
    return out;
  }

  // upper estimate by projected subgradient descent from seeded starts
  out.exact = false;
  out.gamma = std::numeric_limits<double>::infinity();
  Rng rng(opt.seed);
  for (int start = 0; start < opt.n_starts; ++start) {
    Vector x(n);
    for (int i = 0; i < n; ++i) x(i) = rng.normal();
    x /= x.lpNorm<1>();
    double local_best = objective(x);
    for (int it = 0; it < opt.subgradient_iters; ++it) {
      // subgradient of the max channel
      int best_c = 0;
      double best_v = -1.0;
      for (int ch = 0; ch < n_channels; ++ch) {
        double v = (cols[ch] * x).lpNorm<1>();
        if (v > best_v) {
          best_v = v;
          best_c = ch;
        }
      }
      Vector resp = cols[best_c] * x;
      Vector g = Vector::Zero(n);
      for (int i = 0; i < n; ++i)
        g += (resp(i) > 0 ? 1.0 : (resp(i) < 0 ? -1.0 : 0.0)) * cols[best_c].row(i).transpose();
      double step = 0.1 / std::sqrt(static_cast<double>(it + 1));
      x -= step * g / std::max(g.norm(), 1e-12);
      double l1 = x.lpNorm<1>();
      if (l1 < 1e-12) break;
      x /= l1;
      local_best = std::min(local_best, objective(x));
    }
    out.gamma = std::min(out.gamma, local_best);
  }
  return out;
}

struct NormalizabilityResult {
  bool ok = false;
  double tail_slope = 0.0;  // a in psi(x) >= a |x| + b
  double offset = 0.0;      // b
  double log_bound = 0.0;   // log of the analytic bound on integral exp(-lambda R)
  double witness = 0.0;     // tail point when the check fails
};

// Verifies psi(x) >= a|x| + b on a dense grid (a = smaller tail slope of the
// effective profile) and reports the separable exponential bound
//   integral exp(-lambda R) <= exp(-lambda n b_w) (2 / (lambda a_w gamma))^n
// with the per-channel alpha scaling folded in on the worst channel.
inline NormalizabilityResult prior_normalizability_check(const AdaptiveRegularizer& model,
                                                         double gamma, int n_pixels,
                                                         double lambda = 1.0) {
  NormalizabilityResult out;
  const SplinePotential& pot = model.potential();
  double a = std::min(-pot.tail_slope_left(), pot.tail_slope_right());
  out.tail_slope = a;
  if (gamma <= 0.0 || a <= 0.0) {
    out.ok = false;
    out.witness = pot.knot_max() + 1.0;  // linear tail fails to dominate a|x| there
    return out;
  }

  // dense-grid minimum of psi - a |x|, padded by the in-cell curvature bound
  const int samples = 40001;
  double lo = 2.0 * pot.knot_min(), hi = 2.0 * pot.knot_max();
  double step = (hi - lo) / (samples - 1);
  double b = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    double x = lo + i * step;
    b = std::min(b, pot.eval(x).value - a * std::abs(x));
  }
  b -= 0.125 * step * step * std::max(pot.max_abs_second_deriv(), a);
  out.offset = b;

  double a_worst = a, b_worst = b;
  for (int c = 0; c < model.bank().n_channels(); ++c) {
    double alpha = model.alpha(c);
    a_worst = std::min(a_worst, a / alpha);
    b_worst = std::min(b_worst, b / (alpha * alpha));
  }
  out.log_bound = -lambda * n_pixels * b_worst +
                  n_pixels * std::log(2.0 / (lambda * a_worst * gamma));
  out.ok = true;
  return out;
}

}  // namespace ridge

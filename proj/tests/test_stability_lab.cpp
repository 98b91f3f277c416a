#include <adaptive_ridge/stability_lab.hpp>
#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "support/stability_oracles.hpp"
#include "support/synthetic.hpp"

using namespace ridge;

namespace {

// independent rank via determinant minors (no SVD involved)
double minor_det(const Matrix& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  int k = static_cast<int>(rows.size());
  Matrix sub(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) sub(i, j) = m(rows[i], cols[j]);
  return sub.determinant();
}

int minor_rank(const Matrix& m, double tol = 1e-9) {
  int max_k = static_cast<int>(std::min(m.rows(), m.cols()));
  for (int k = max_k; k >= 1; --k) {
    std::vector<int> rows(k), cols(k);
    std::function<bool(int, int)> pick_cols = [&](int start, int depth) {
      if (depth == k) return std::abs(minor_det(m, rows, cols)) > tol;
      for (int j = start; j < m.cols(); ++j) {
        cols[depth] = j;
        if (pick_cols(j + 1, depth + 1)) return true;
      }
      return false;
    };
    std::function<bool(int, int)> pick_rows = [&](int start, int depth) {
      if (depth == k) return pick_cols(0, 0);
      for (int i = start; i < m.rows(); ++i) {
        rows[depth] = i;
        if (pick_rows(i + 1, depth + 1)) return true;
      }
      return false;
    };
    if (pick_rows(0, 0)) return k;
  }
  return 0;
}

Matrix stack_rows(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), std::max(a.cols(), b.cols()));
  out.setZero();
  if (a.rows() > 0) out.topRows(a.rows()) = a;
  if (b.rows() > 0) out.bottomRows(b.rows()) = b;
  return out;
}

// brute-force check of both subset conditions through determinant minors
bool subset_qualifies_oracle(const Matrix& e, const Matrix& f, const std::vector<int>& j) {
  if (j.empty()) return true;
  Matrix fj(j.size(), f.cols());
  for (size_t i = 0; i < j.size(); ++i) fj.row(static_cast<int>(i)) = f.row(j[i]);
  if (minor_rank(fj) != static_cast<int>(j.size())) return false;
  // trivial row-space intersection <=> rank([E; F_J]) = rank(E) + rank(F_J)
  return minor_rank(stack_rows(e, fj)) == minor_rank(e) + static_cast<int>(j.size());
}

PolyhedralSystem random_feasible_system(int n, int n_eq, int n_ineq, std::uint64_t seed) {
  Rng rng(seed);
  PolyhedralSystem sys;
  sys.e.resize(n_eq, n);
  sys.f.resize(n_ineq, n);
  for (int i = 0; i < n_eq; ++i)
    for (int k = 0; k < n; ++k) sys.e(i, k) = rng.normal();
  for (int i = 0; i < n_ineq; ++i)
    for (int k = 0; k < n; ++k) sys.f(i, k) = rng.normal();
  Vector x0(n);
  for (int k = 0; k < n; ++k) x0(k) = rng.normal();
  sys.b = sys.e * x0;
  sys.q = sys.f * x0;
  for (int i = 0; i < n_ineq; ++i) sys.q(i) += rng.uniform(0.0, 1.0);  // strict slack
  return sys;
}

AdaptiveRegularizer convex_probe_model(std::uint64_t seed) {
  FilterBank bank = FilterBank::random(3, 3, seed);
  bank.normalize_spectral(1e-8, 500, 16);
  return AdaptiveRegularizer(std::move(bank), SplinePotential::pure_quadratic(101, 0.002, 0.8));
}

}  // namespace

TEST_CASE("feasible subsets") {
  SECTION("empty F yields only the empty subset") {
    Matrix e = Matrix::Identity(2, 2);
    Matrix f(0, 2);
    auto subsets = feasible_subsets(e, f);
    REQUIRE(subsets.size() == 1);
    CHECK(subsets[0].empty());
  }

  SECTION("collinear E and F rows leave only the empty subset") {
    Matrix e(1, 1), f(1, 1);
    e(0, 0) = 1.0;
    f(0, 0) = 1.0;
    auto subsets = feasible_subsets(e, f);
    REQUIRE(subsets.size() == 1);
    CHECK(subsets[0].empty());
  }

  SECTION("random systems match the determinant-minor oracle") {
    for (std::uint64_t seed : {11ull, 12ull, 13ull, 14ull}) {
      Rng rng(seed);
      Matrix e(3, 3), f(4, 3);
      // rank-2 E: third row is a combination of the first two
      for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 3; ++k) e(i, k) = rng.normal();
      e.row(2) = 0.5 * e.row(0) - 1.5 * e.row(1);
      for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 3; ++k) f(i, k) = rng.normal();

      auto got = feasible_subsets(e, f);
      std::set<std::vector<int>> got_set(got.begin(), got.end());
      // exhaustive oracle over all subsets
      std::set<std::vector<int>> want;
      for (unsigned mask = 0; mask < 16u; ++mask) {
        std::vector<int> j;
        for (int i = 0; i < 4; ++i)
          if (mask & (1u << i)) j.push_back(i);
        if (subset_qualifies_oracle(e, f, j)) want.insert(j);
      }
      CHECK(got_set == want);
    }
  }

  SECTION("downward consistency: dropping a row preserves qualification") {
    Rng rng(77);
    Matrix e(2, 3), f(4, 3);
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 3; ++k) e(i, k) = rng.normal();
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 3; ++k) f(i, k) = rng.normal();
    auto subsets = feasible_subsets(e, f);
    std::set<std::vector<int>> all(subsets.begin(), subsets.end());
    for (const auto& j : subsets) {
      for (size_t drop = 0; drop < j.size(); ++drop) {
        std::vector<int> smaller;
        for (size_t i = 0; i < j.size(); ++i)
          if (i != drop) smaller.push_back(j[i]);
        CHECK(all.count(smaller) == 1);
      }
    }
  }

  SECTION("size limits enforced") {
    Matrix e = Matrix::Identity(13, 13);
    Matrix f(0, 13);
    CHECK_THROWS_AS(feasible_subsets(e, f), std::invalid_argument);
  }
}

TEST_CASE("hoffman constant") {
  SECTION("scalar equality") {
    Matrix e(1, 1), f(0, 1);
    e(0, 0) = -2.5;
    CHECK_THAT(hoffman_constant(e, f), Catch::Matchers::WithinRel(1.0 / 2.5, 1e-12));
  }

  SECTION("identity gives exactly one") {
    for (int n : {1, 2, 3}) {
      Matrix e = Matrix::Identity(n, n);
      Matrix f(0, n);
      CHECK_THAT(hoffman_constant(e, f), Catch::Matchers::WithinRel(1.0, 1e-12));
    }
  }

  SECTION("random systems agree with the sampling oracle within 1%") {
    for (std::uint64_t seed : {21ull, 22ull, 23ull}) {
      Rng rng(seed);
      Matrix e(2, 2), f(2, 2);
      for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 2; ++k) {
          e(i, k) = rng.normal();
          f(i, k) = rng.normal();
        }
      auto subsets = feasible_subsets(e, f);
      for (const auto& j : subsets) {
        double exact = hoffman_inner_minimum(e, f, j);
        if (!std::isfinite(exact)) continue;
        double sampled = oracle::hoffman_inner_minimum_sampling(e, f, j, 200000, seed * 31);
        CHECK_THAT(sampled, Catch::Matchers::WithinRel(exact, 0.01));
      }
    }
  }
}

TEST_CASE("hoffman distance check") {
  SECTION("interior probes have zero residual and zero distance") {
    PolyhedralSystem sys = random_feasible_system(3, 1, 3, 31);
    Vector probe(3);
    // recover the construction point: any x with Ex=b, Fx<q strictly; the
    // generator used x0, so project the origin onto the equality set and
    // verify feasibility directly instead
    project_onto_polyhedron(sys, Vector::Zero(3), &probe);
    DistanceCheck chk = hoffman_distance_check(sys, probe);
    CHECK(chk.true_distance <= 1e-9);
    CHECK(chk.bound <= 1e-7);
  }

  SECTION("half line in 1d is tight") {
    PolyhedralSystem sys;
    sys.e.resize(0, 1);
    sys.b.resize(0);
    sys.f.resize(1, 1);
    sys.f(0, 0) = -1.0;  // -x <= 0, i.e. x >= 0
    sys.q.resize(1);
    sys.q(0) = 0.0;
    Vector probe(1);
    probe(0) = -1.0;
    DistanceCheck chk = hoffman_distance_check(sys, probe);
    CHECK_THAT(chk.true_distance, Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(chk.bound, Catch::Matchers::WithinAbs(1.0, 1e-10));
  }

  SECTION("the bound dominates the true distance on random probes") {
    int checked = 0;
    for (std::uint64_t seed : {41ull, 42ull, 43ull, 44ull, 45ull}) {
      PolyhedralSystem sys = random_feasible_system(3, 1, 4, seed);
      Rng rng(seed + 100);
      for (int t = 0; t < 10; ++t) {
        Vector probe(3);
        for (int i = 0; i < 3; ++i) probe(i) = 3.0 * rng.normal();
        DistanceCheck chk = hoffman_distance_check(sys, probe);
        CHECK(chk.true_distance <= chk.bound * (1.0 + 1e-8) + 1e-12);
        ++checked;
      }
    }
    CHECK(checked == 50);
  }

  SECTION("infeasible systems are rejected") {
    PolyhedralSystem sys;
    sys.e.resize(0, 1);
    sys.b.resize(0);
    sys.f.resize(2, 1);
    sys.f << 1.0, -1.0;
    sys.q.resize(2);
    sys.q << -1.0, -1.0;  // x <= -1 and x >= 1
    Vector probe(1);
    probe(0) = 0.0;
    CHECK_THROWS_AS(hoffman_distance_check(sys, probe), std::invalid_argument);
  }
}

TEST_CASE("empirical solution-map lipschitz certificate") {
  const int h = 8, w = 8;
  IdentityOp ident(h, w);
  Image y0 = synth::gaussian_image(h, w, 3, 0.3);

  SECTION("no regularizer: the prox is the identity and the ratio is one") {
    AdaptiveRegularizer zero(FilterBank::dirac(3), SplinePotential::zero());
    auto res = empirical_solution_map_lipschitz(ident, Fidelity::quadratic(1.0), zero, 0.0,
                                                y0.data, 5, 0.2, 7);
    CHECK_THAT(res.max_ratio, Catch::Matchers::WithinAbs(1.0, 1e-6));
    CHECK(res.bound == 1.0);
  }

  SECTION("convex denoiser stays within the bound over pairs") {
    AdaptiveRegularizer model = convex_probe_model(5);
    auto res = empirical_solution_map_lipschitz(ident, Fidelity::quadratic(1.0), model, 1.0,
                                                y0.data, 20, 0.2, 11, 1e-10);
    CHECK(res.bound == 1.0);
    CHECK(res.max_ratio <= res.bound * (1.0 + 1e-3));
  }

  SECTION("nonconvex models are rejected") {
    FilterBank bank = FilterBank::random(2, 3, 9);
    bank.normalize_spectral(1e-8, 500, 16);
    SplinePotential wc(101, 0.002, std::vector<double>(100, 1.0), {}, 1.0, 1.0);
    AdaptiveRegularizer model(std::move(bank), std::move(wc));
    CHECK_THROWS_AS(empirical_solution_map_lipschitz(ident, Fidelity::quadratic(1.0), model, 1.0,
                                                     y0.data, 2, 0.1, 3),
                    std::invalid_argument);
  }

  SECTION("mask perturbations stay within the sensitivity bound") {
    AdaptiveRegularizer model = convex_probe_model(6);
    auto res = empirical_mask_sensitivity(ident, Fidelity::quadratic(1.0), model, 1.0, y0.data,
                                          0.05, 10, 13, 1e-10);
    CHECK(res.max_ratio <= res.bound * 1.05);
    CHECK(res.max_ratio > 0.0);
  }
}

TEST_CASE("vanishing noise rates") {
  const int h = 8, w = 8;
  IdentityOp ident(h, w);

  SECTION("quadratic model matches the closed-form error curve") {
    // R = ||x||^2/2 via a dirac channel: x(y, l) = y / (1 + l)
    AdaptiveRegularizer quad(FilterBank::dirac(3), SplinePotential::pure_quadratic());
    Image x_true(h, w, 0.01);
    RateExperiment exp;
    exp.forward = &ident;
    exp.regularizer = &quad;
    exp.x_true = x_true;
    exp.n_levels = 5;
    exp.n_seeds = 1;
    exp.delta_max = 1e-2;
    exp.delta_min = 1e-4;
    exp.solve_tol = 1e-13;
    RateResult res = vanishing_noise_rates(exp);
    REQUIRE_FALSE(res.degenerate);
    // closed form: x_k - x_0 = (y + d u)/(1+l) - y/(1+l0)
    Rng rng(exp.seed + 7919ull);
    std::vector<double> u = rng.unit_vector(h * w);
    for (int k = 0; k < exp.n_levels; ++k) {
      double d = res.deltas[k];
      double l = std::sqrt(d);
      double err_sq = 0.0;
      for (int i = 0; i < h * w; ++i) {
        double yk = x_true.data[i] + d * u[i];
        double xk = yk / (1.0 + l);
        double x0 = x_true.data[i] / (1.0 + exp.lambda_floor);
        err_sq += (xk - x0) * (xk - x0);
      }
      CHECK_THAT(res.errors[0][k], Catch::Matchers::WithinAbs(std::sqrt(err_sq), 1e-6));
    }
  }

  SECTION("zero noise is reported as degenerate") {
    AdaptiveRegularizer quad(FilterBank::dirac(3), SplinePotential::pure_quadratic());
    RateExperiment exp;
    exp.forward = &ident;
    exp.regularizer = &quad;
    exp.x_true = Image(h, w, 0.01);
    exp.n_levels = 4;
    exp.n_seeds = 1;
    exp.delta_max = 1e-13;  // below solver resolution
    exp.delta_min = 1e-16;
    RateResult res = vanishing_noise_rates(exp);
    CHECK(res.degenerate);
  }

  SECTION("fewer than four levels rejected") {
    AdaptiveRegularizer quad(FilterBank::dirac(3), SplinePotential::pure_quadratic());
    RateExperiment exp;
    exp.forward = &ident;
    exp.regularizer = &quad;
    exp.x_true = Image(h, w, 0.01);
    exp.n_levels = 3;
    CHECK_THROWS_AS(vanishing_noise_rates(exp), std::invalid_argument);
  }

  SECTION("toy convex model lands near the square-root rate") {
    AdaptiveRegularizer model = convex_probe_model(91);
    RateExperiment exp;
    exp.forward = &ident;
    exp.regularizer = &model;
    exp.x_true = synth::phantom(h, w);
    exp.n_levels = 6;
    exp.n_seeds = 2;
    exp.delta_max = 1e-1;
    exp.delta_min = 1e-4;
    exp.solve_tol = 1e-12;
    RateResult res = vanishing_noise_rates(exp);
    REQUIRE_FALSE(res.degenerate);
    CHECK(res.slope >= 0.35);
    CHECK(res.slope <= 0.65);
  }
}

TEST_CASE("gibbs coercivity") {
  SECTION("a dirac-only bank gives gamma exactly one") {
    FilterBank bank = FilterBank::dirac(3);
    CoercivityResult res = gibbs_coercivity(bank, 2, 2);
    REQUIRE(res.exact);
    CHECK_THAT(res.gamma, Catch::Matchers::WithinAbs(1.0, 1e-11));
  }

  SECTION("a dirac channel among others keeps gamma at least one") {
    FilterBank bank(2, 3);
    bank.set_kernel(0, {0, 0, 0, 0, 1, 0, 0, 0, 0});
    bank.set_kernel(1, {0, 0, 0, -1, 1, 0, 0, 0, 0});
    CoercivityResult res = gibbs_coercivity(bank, 2, 2);
    CHECK(res.gamma >= 1.0 - 1e-11);
  }

  SECTION("a difference kernel with a null pattern gives gamma zero") {
    // [1 0 -1] annihilates the (1, 0, 1) column pattern on a 3x3 grid
    FilterBank bank(1, 3);
    bank.set_kernel(0, {0, 0, 0, 1.0, 0.0, -1.0, 0, 0, 0});
    CoercivityResult res = gibbs_coercivity(bank, 3, 3);
    REQUIRE(res.exact);
    CHECK(res.gamma <= 1e-11);
  }

  SECTION("random two-channel bank matches the refined sampling oracle") {
    FilterBank bank = FilterBank::random(2, 3, 17);
    CoercivityResult res = gibbs_coercivity(bank, 2, 2);
    REQUIRE(res.exact);

    std::vector<Matrix> channels;
    for (int c = 0; c < 2; ++c)
      channels.push_back(oracle::assemble_image_map(
          [&](const Image& im) { return bank.apply_channel(c, im); }, 2, 2));
    double oracle_gamma = oracle::coercivity_sampling(channels, 1000000, 18);
    CHECK_THAT(res.gamma, Catch::Matchers::WithinAbs(oracle_gamma, 1e-3));
  }

  SECTION("scale covariance in exact mode") {
    FilterBank bank = FilterBank::random(2, 3, 19);
    FilterBank scaled(2, 3);
    for (int c = 0; c < 2; ++c) {
      auto k = bank.kernel(c);
      for (double& v : k) v *= 3.25;
      scaled.set_kernel(c, k);
    }
    double g1 = gibbs_coercivity(bank, 2, 2).gamma;
    double g2 = gibbs_coercivity(scaled, 2, 2).gamma;
    CHECK_THAT(g2, Catch::Matchers::WithinRel(3.25 * g1, 1e-9));
  }

  SECTION("subgradient mode upper-bounds the exact value") {
    FilterBank bank = FilterBank::random(2, 3, 23);
    CoercivityOptions exact_opt;
    CoercivityResult exact = gibbs_coercivity(bank, 2, 2, exact_opt);
    CoercivityOptions sub_opt;
    sub_opt.exact_max_pixels = 1;  // force the estimator path
    sub_opt.n_starts = 60;
    CoercivityResult est = gibbs_coercivity(bank, 2, 2, sub_opt);
    CHECK_FALSE(est.exact);
    CHECK(est.gamma >= exact.gamma - 1e-9);
    CHECK(est.gamma <= exact.gamma + 0.05);
  }
}

TEST_CASE("prior normalizability") {
  SECTION("positive tail slope and positive gamma certify the prior") {
    AdaptiveRegularizer model(FilterBank::dirac(3), SplinePotential::pure_quadratic());
    NormalizabilityResult res = prior_normalizability_check(model, 1.0, 4, 1.0);
    CHECK(res.ok);
    CHECK(res.tail_slope > 0.0);
    CHECK(std::isfinite(res.log_bound));
  }

  SECTION("a bounded profile fails with a tail witness") {
    AdaptiveRegularizer model(FilterBank::dirac(3), SplinePotential::zero());
    NormalizabilityResult res = prior_normalizability_check(model, 1.0, 4, 1.0);
    CHECK_FALSE(res.ok);
    CHECK(res.witness > model.potential().knot_max());
  }

  SECTION("monte carlo on a 2-pixel model respects the analytic bound") {
    // 1x2 image, dirac channel: R(x) = psi(x0) + psi(x1), gamma = 1
    FilterBank bank = FilterBank::dirac(1);
    SplinePotential pot = SplinePotential::pure_quadratic(101, 0.002, 1.0);
    AdaptiveRegularizer model(std::move(bank), std::move(pot));
    const double lambda = 1.0;
    NormalizabilityResult res = prior_normalizability_check(model, 1.0, 2, lambda);
    REQUIRE(res.ok);
    Rng rng(29);
    double total = 0.0;
    const int n_samples = 1000000;
    for (int i = 0; i < n_samples; ++i) {
      Image x(1, 2);
      x.data[0] = rng.uniform(-10.0, 10.0);
      x.data[1] = rng.uniform(-10.0, 10.0);
      total += std::exp(-lambda * model.evaluate(x));
    }
    double estimate = total / n_samples * 400.0;  // the box area
    CHECK(std::log(estimate) <= res.log_bound + 1e-6);
  }
}

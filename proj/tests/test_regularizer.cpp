#include <adaptive_ridge/regularizer.hpp>
#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace ridge;

namespace {

AdaptiveRegularizer toy_model(std::uint64_t seed, double c_cvx = 0.0, int n_channels = 3,
                              int kernel = 3) {
  FilterBank bank = FilterBank::random(n_channels, kernel, seed);
  bank.normalize_spectral(1e-8, 500, 16);
  Rng rng(seed + 1);
  std::vector<double> dp(100), dm;
  for (double& v : dp) v = rng.uniform(0.3, 1.0);
  if (c_cvx == 1.0) {
    dm.resize(100);
    for (double& v : dm) v = rng.uniform(0.0, 0.3);
  }
  SplinePotential pot(101, 0.002, dp, dm, 1.0 + rng.uniform(), c_cvx);
  AdaptiveRegularizer reg(std::move(bank), std::move(pot));
  std::vector<NoiseScaling> scalings(n_channels);
  Rng rs(seed + 2);
  for (auto& s : scalings)
    for (double& v : s.values) v = rs.uniform(-0.3, 0.3);
  reg.set_noise_scalings(scalings);
  reg.set_sigma(25.0 / 255.0);
  return reg;
}

SpatialMask random_mask(const AdaptiveRegularizer& reg, int h, int w, std::uint64_t seed,
                        double epsilon = 0.01) {
  Rng rng(seed);
  SpatialMask m;
  m.epsilon = epsilon;
  for (int c = 0; c < reg.bank().n_channels(); ++c) {
    Image wimg(h, w);
    for (double& v : wimg.data) v = rng.uniform(epsilon, 1.0);
    m.weights.push_back(std::move(wimg));
  }
  return m;
}

// naive triple-loop reference: channels, pixels, explicit mask lookup
double reference_evaluate(const AdaptiveRegularizer& reg, const Image& x) {
  double total = 0.0;
  for (int c = 0; c < reg.bank().n_channels(); ++c) {
    Image resp = reg.bank().apply_channel(c, x);
    for (int i = 0; i < resp.size(); ++i) {
      double a = reg.alpha(c);
      double lam = reg.mask().at(c, i);
      total += lam * reg.potential().eval(a * resp.data[i]).value / (a * a);
    }
  }
  return total;
}

}  // namespace

TEST_CASE("regularizer value") {
  AdaptiveRegularizer reg = toy_model(10);

  SECTION("zero image with a convex profile evaluates to zero") {
    Image z(8, 8, 0.0);
    CHECK(reg.evaluate(z) == 0.0);
  }

  SECTION("dirac channel with quadratic profile gives ||x||^2 / 2") {
    AdaptiveRegularizer quad(FilterBank::dirac(3), SplinePotential::pure_quadratic());
    Image x(6, 6);
    Rng rng(3);
    for (double& v : x.data) v = 0.02 * rng.normal();  // keep responses inside the knot range
    CHECK_THAT(quad.evaluate(x), Catch::Matchers::WithinRel(0.5 * dot(x, x), 1e-12));
  }

  SECTION("matches the naive reference loop with a random mask") {
    Image x = synth::gaussian_image(8, 8, 42, 0.2);
    reg.set_mask(random_mask(reg, 8, 8, 43));
    double got = reg.evaluate(x);
    double want = reference_evaluate(reg, x);
    CHECK_THAT(got, Catch::Matchers::WithinAbs(want, 1e-12 * std::max(1.0, std::abs(want))));
  }

  SECTION("mask shape mismatch rejected") {
    reg.set_mask(random_mask(reg, 4, 4, 9));
    Image x(8, 8, 0.1);
    CHECK_THROWS_AS(reg.evaluate(x), std::invalid_argument);
  }
}

TEST_CASE("regularizer gradient") {
  AdaptiveRegularizer reg = toy_model(20, 1.0);

  SECTION("zero at the origin") {
    Image z(8, 8, 0.0);
    CHECK(norm2(reg.gradient(z)) == 0.0);
  }

  SECTION("quadratic dirac model has gradient x") {
    AdaptiveRegularizer quad(FilterBank::dirac(3), SplinePotential::pure_quadratic());
    Image x = synth::gaussian_image(6, 6, 11, 0.03);
    Image g = quad.gradient(x);
    CHECK(max_abs_diff(g.data, x.data) < 1e-14);
  }

  SECTION("matches finite differences of evaluate") {
    Image x = synth::gaussian_image(8, 8, 77, 0.15);
    reg.set_mask(random_mask(reg, 8, 8, 78));
    Image g = reg.gradient(x);
    Image dir = synth::gaussian_image(8, 8, 79);
    double h = 1e-5;
    double fd = oracle::directional_diff([&](const Image& im) { return reg.evaluate(im); }, x, dir, h);
    double an = dot(g, dir);
    CHECK_THAT(an, Catch::Matchers::WithinRel(fd, 1e-6));
  }

  SECTION("gradient-value consistency for every mask kind") {
    Image x_est = synth::phantom(8, 8);
    Image x = synth::gaussian_image(8, 8, 90, 0.1);
    Image dir = synth::gaussian_image(8, 8, 91);
    for (MaskKind kind : {MaskKind::constant, MaskKind::local_response}) {
      MaskProvider prov;
      prov.kind = kind;
      prov.gain = 20.0;
      prov.threshold = 0.05;
      reg.set_mask(make_mask(prov, x_est, reg.bank(), 0.01));
      double fd =
          oracle::directional_diff([&](const Image& im) { return reg.evaluate(im); }, x, dir, 1e-5);
      CHECK_THAT(dot(reg.gradient(x), dir), Catch::Matchers::WithinRel(fd, 1e-6));
    }
  }
}

TEST_CASE("mask providers") {
  AdaptiveRegularizer reg = toy_model(30);
  const FilterBank& bank = reg.bank();

  SECTION("constant provider is exactly one") {
    MaskProvider prov;
    Image x_est = synth::phantom(8, 8);
    SpatialMask m = make_mask(prov, x_est, bank, 0.01);
    CHECK(m.is_ones());
    CHECK(m.at(0, 5) == 1.0);
  }

  SECTION("local response on the zero image is spatially constant") {
    MaskProvider prov;
    prov.kind = MaskKind::local_response;
    prov.gain = 7.0;
    prov.threshold = 0.2;
    Image zero(8, 8, 0.0);
    SpatialMask m = make_mask(prov, zero, bank, 0.05);
    double expect = 0.05 + 0.95 * logistic(7.0 * 0.2);
    for (int c = 0; c < bank.n_channels(); ++c)
      for (double v : m.weights[c].data) CHECK_THAT(v, Catch::Matchers::WithinAbs(expect, 1e-14));
  }

  SECTION("edges get smaller weights than flat areas") {
    FilterBank diff(1, 3);
    diff.set_kernel(0, {0, 0, 0, -1.0, 1.0, 0, 0, 0, 0});
    Image step(8, 8, 0.0);
    for (int r = 0; r < 8; ++r)
      for (int c = 4; c < 8; ++c) step.at(r, c) = 1.0;
    MaskProvider prov;
    prov.kind = MaskKind::local_response;
    prov.gain = 15.0;
    prov.threshold = 0.1;
    prov.smoothing_width = 1;
    SpatialMask m = make_mask(prov, step, diff, 0.01);
    double edge = m.weights[0].at(4, 4);  // kernel responds where the step jumps
    double flat = m.weights[0].at(4, 6);
    CHECK(edge < flat);
    CHECK(edge >= 0.01);
    CHECK(flat <= 1.0);
  }

  SECTION("file provider clamps into [epsilon, 1]") {
    MaskProvider prov;
    prov.kind = MaskKind::file;
    for (int c = 0; c < bank.n_channels(); ++c) {
      Image w(8, 8, 0.5);
      w.at(0, 0) = -3.0;
      w.at(0, 1) = 9.0;
      prov.file_weights.push_back(w);
    }
    SpatialMask m = make_mask(prov, Image(8, 8, 0.0), bank, 0.02);
    CHECK(m.weights[0].at(0, 0) == 0.02);
    CHECK(m.weights[0].at(0, 1) == 1.0);
  }

  SECTION("epsilon out of range rejected") {
    MaskProvider prov;
    CHECK_THROWS_AS(make_mask(prov, Image(8, 8, 0.0), bank, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_mask(prov, Image(8, 8, 0.0), bank, 1.0), std::invalid_argument);
  }
}

TEST_CASE("lipschitz gradient bound") {
  SECTION("zero potential gives zero") {
    AdaptiveRegularizer reg(FilterBank::dirac(3), SplinePotential::zero());
    CHECK(reg.lipschitz_gradient_bound() == 0.0);
  }

  SECTION("quadratic profile on one unit-norm channel gives one") {
    AdaptiveRegularizer reg(FilterBank::dirac(3), SplinePotential::pure_quadratic());
    CHECK_THAT(reg.lipschitz_gradient_bound(), Catch::Matchers::WithinRel(1.0, 1e-9));
  }

  SECTION("random pairs never exceed the bound") {
    AdaptiveRegularizer reg = toy_model(50, 1.0);
    reg.set_mask(random_mask(reg, 8, 8, 51));
    double bound = reg.lipschitz_gradient_bound();
    Rng rng(52);
    for (int trial = 0; trial < 100; ++trial) {
      Image x1 = synth::gaussian_image(8, 8, 100 + trial, 0.2);
      Image x2 = x1;
      for (double& v : x2.data) v += 0.05 * rng.normal();
      Image g1 = reg.gradient(x1);
      Image g2 = reg.gradient(x2);
      double num = 0.0, den = 0.0;
      for (int i = 0; i < x1.size(); ++i) {
        double dg = g1.data[i] - g2.data[i];
        double dx = x1.data[i] - x2.data[i];
        num += dg * dg;
        den += dx * dx;
      }
      CHECK(std::sqrt(num) <= bound * std::sqrt(den) * (1.0 + 1e-9));
    }
  }
}

TEST_CASE("mask monotonicity and the epsilon floor") {
  AdaptiveRegularizer reg = toy_model(60);
  const int h = 8, w = 8;

  SECTION("larger masks never decrease the cost") {
    Rng rng(61);
    for (int trial = 0; trial < 20; ++trial) {
      Image x = synth::gaussian_image(h, w, 200 + trial, 0.2);
      SpatialMask small = random_mask(reg, h, w, 300 + trial);
      SpatialMask big = small;
      for (Image& wimg : big.weights)
        for (double& v : wimg.data) v = std::min(1.0, v + rng.uniform(0.0, 1.0 - v));
      reg.set_mask(small);
      double lo = reg.evaluate(x);
      reg.set_mask(big);
      double hi = reg.evaluate(x);
      CHECK(lo <= hi + 1e-12);
    }
  }

  SECTION("R_y >= epsilon * R with the all-ones mask") {
    const double eps = 0.01;
    for (int trial = 0; trial < 100; ++trial) {
      Image x = synth::gaussian_image(h, w, 400 + trial, 0.3);
      reg.set_mask(random_mask(reg, h, w, 500 + trial, eps));
      double masked = reg.evaluate(x);
      reg.clear_mask();
      double plain = reg.evaluate(x);
      CHECK(masked >= eps * plain - 1e-12);
    }
  }

  SECTION("convex model passes a midpoint convexity check") {
    AdaptiveRegularizer cvx = toy_model(70, 0.0);
    cvx.set_mask(random_mask(cvx, h, w, 71));
    for (int trial = 0; trial < 50; ++trial) {
      Image a = synth::gaussian_image(h, w, 600 + trial, 0.2);
      Image b = synth::gaussian_image(h, w, 700 + trial, 0.2);
      Image mid(h, w);
      for (int i = 0; i < mid.size(); ++i) mid.data[i] = 0.5 * (a.data[i] + b.data[i]);
      CHECK(cvx.evaluate(mid) <= 0.5 * (cvx.evaluate(a) + cvx.evaluate(b)) + 1e-10);
    }
  }
}

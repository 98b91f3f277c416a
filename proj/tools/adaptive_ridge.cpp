// Command-line front end: denoising, task reconstruction, toy training,
// mask finetuning, the stability analyses, metrics, and data simulation.
// Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.

#include <CLI11.hpp>
#include <adaptive_ridge/checkpoint.hpp>
#include <adaptive_ridge/io.hpp>
#include <adaptive_ridge/metrics.hpp>
#include <adaptive_ridge/solver.hpp>
#include <adaptive_ridge/stability_lab.hpp>
#include <adaptive_ridge/training.hpp>
#include <algorithm>
#include <filesystem>
#include <iostream>

using namespace ridge;

namespace {

ConfigSchema config_schema() {
  return {
      {"problem",
       {"operator", "height", "width", "kernel_size", "kernel_std", "stride", "accel",
        "mask_seed", "angles", "bins", "drop_fraction", "fidelity", "fidelity_sigma",
        "photon_count", "mu_ct", "noise", "noise_sigma"}},
      {"regularizer",
       {"checkpoint", "n_channels", "kernel_size", "knot_count", "spacing", "c_cvx", "mu",
        "init_seed", "epsilon"}},
      {"solver", {"lambda", "sigma", "tol", "max_iters"}},
      {"mask", {"kind", "gain", "threshold", "smoothing_width", "file", "epsilon"}},
      {"train",
       {"patch_size", "n_patches", "batch_size", "epochs", "sigma_min", "sigma_max", "lr_spline",
        "lr_mu", "lr_alpha", "seed", "val_fraction", "prox_tol", "prox_max_iters", "warm_decay"}},
      {"finetune", {"epochs", "lr_gain", "lr_offsets", "seed"}},
      {"analyze",
       {"seed", "n_systems", "vars", "rows", "n_probes", "n_pairs", "radius", "grid_height",
        "grid_width", "delta_max", "delta_min", "n_levels", "n_seeds", "lambda_coefficient"}},
  };
}

std::unique_ptr<LinearOperator> build_operator(const Config& cfg) {
  int h = cfg.get_int("problem", "height");
  int w = cfg.get_int("problem", "width");
  std::string kind = cfg.get_or("problem", "operator", "identity");
  if (kind == "identity") return std::make_unique<IdentityOp>(h, w);
  if (kind == "blur_stride")
    return std::make_unique<BlurStrideOp>(h, w, cfg.get_int_or("problem", "kernel_size", 16),
                                          cfg.get_double_or("problem", "kernel_std", 2.0),
                                          cfg.get_int_or("problem", "stride", 4));
  if (kind == "fourier_subsample") {
    auto cols = FourierSubsampleOp::acceleration_mask(
        w, cfg.get_int_or("problem", "accel", 4),
        static_cast<std::uint64_t>(cfg.get_int_or("problem", "mask_seed", 0)));
    if (cols.empty()) std::cerr << "warning: frequency mask keeps no columns\n";
    return std::make_unique<FourierSubsampleOp>(h, w, cols);
  }
  if (kind == "radon")
    return std::make_unique<RadonOp>(h, w, cfg.get_int_or("problem", "angles", 60),
                                     cfg.get_int_or("problem", "bins",
                                                    static_cast<int>(std::ceil(1.5 * std::max(h, w)))),
                                     cfg.get_double_or("problem", "drop_fraction", 0.0));
  throw ConfigError("unknown operator '" + kind + "' in [problem] (" + cfg.origin + ")");
}

Fidelity build_fidelity(const Config& cfg) {
  std::string kind = cfg.get_or("problem", "fidelity", "quadratic");
  if (kind == "quadratic")
    return Fidelity::quadratic(cfg.get_double_or("problem", "fidelity_sigma", 1.0));
  if (kind == "ct_poisson")
    return Fidelity::ct_poisson(cfg.get_double_or("problem", "photon_count", 4096.0),
                                cfg.get_double_or("problem", "mu_ct", 81.35858));
  throw ConfigError("unknown fidelity '" + kind + "' in [problem] (" + cfg.origin + ")");
}

NoiseSpec build_noise(const Config& cfg) {
  NoiseSpec spec;
  std::string kind = cfg.get_or("problem", "noise", "gaussian");
  if (kind == "gaussian") {
    spec.kind = NoiseSpec::Kind::gaussian;
    spec.sigma = cfg.get_double_or("problem", "noise_sigma", 0.0);
  } else if (kind == "ct_poisson") {
    spec.kind = NoiseSpec::Kind::ct_poisson;
    spec.photon_count = cfg.get_double_or("problem", "photon_count", 4096.0);
    spec.mu_ct = cfg.get_double_or("problem", "mu_ct", 81.35858);
  } else {
    throw ConfigError("unknown noise '" + kind + "' in [problem] (" + cfg.origin + ")");
  }
  return spec;
}

AdaptiveRegularizer build_or_load_model(const Config& cfg, MaskProvider* provider = nullptr) {
  if (cfg.has("regularizer", "checkpoint"))
    return load_checkpoint(cfg.get("regularizer", "checkpoint"), provider);
  int n_channels = cfg.get_int_or("regularizer", "n_channels", 8);
  int kernel = cfg.get_int_or("regularizer", "kernel_size", 5);
  int knots = cfg.get_int_or("regularizer", "knot_count", 101);
  double spacing = cfg.get_double_or("regularizer", "spacing", 0.002);
  double c_cvx = cfg.get_double_or("regularizer", "c_cvx", 0.0);
  double mu = cfg.get_double_or("regularizer", "mu", 1.0);
  auto seed = static_cast<std::uint64_t>(cfg.get_int_or("regularizer", "init_seed", 2024));
  FilterBank bank = FilterBank::random(n_channels, kernel, seed);
  bank.normalize_spectral();
  SplinePotential pot(knots, spacing,
                      std::vector<double>(static_cast<size_t>(knots) - 1, 1.0), {}, mu, c_cvx);
  AdaptiveRegularizer model(std::move(bank), std::move(pot));
  model.set_noise_scalings(std::vector<NoiseScaling>(n_channels));
  return model;
}

MaskProvider build_provider(const Config& cfg) {
  MaskProvider prov;
  std::string kind = cfg.get_or("mask", "kind", "constant");
  if (kind == "constant") {
    prov.kind = MaskKind::constant;
  } else if (kind == "local_response") {
    prov.kind = MaskKind::local_response;
    prov.gain = cfg.get_double_or("mask", "gain", 10.0);
    prov.threshold = cfg.get_double_or("mask", "threshold", 0.05);
    prov.smoothing_width = cfg.get_int_or("mask", "smoothing_width", 3);
  } else if (kind == "file") {
    prov.kind = MaskKind::file;
    prov.file_weights = read_grid(cfg.get("mask", "file")).to_stack();
  } else {
    throw ConfigError("unknown mask kind '" + kind + "' in [mask] (" + cfg.origin + ")");
  }
  return prov;
}

std::vector<Image> load_image_dir(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    auto ext = entry.path().extension().string();
    if (ext == ".grf" || ext == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no .grf or .pgm images in '" + dir + "'");
  std::vector<Image> images;
  for (const auto& f : files) images.push_back(read_grid(f.string()).channel(0));
  return images;
}

std::vector<Image> extract_patches(const std::vector<Image>& images, int patch, int count,
                                   std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Image> patches;
  patches.reserve(count);
  for (int k = 0; k < count; ++k) {
    const Image& src = images[k % images.size()];
    require(src.height >= patch && src.width >= patch,
            "extract_patches: image smaller than the patch size");
    int r0 = static_cast<int>(rng.uniform() * (src.height - patch + 1));
    int c0 = static_cast<int>(rng.uniform() * (src.width - patch + 1));
    Image p(patch, patch);
    for (int r = 0; r < patch; ++r)
      for (int c = 0; c < patch; ++c) p.at(r, c) = src.at(r0 + r, c0 + c);
    patches.push_back(std::move(p));
  }
  return patches;
}

void write_trace(const std::string& path, const std::vector<double>& objective) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw ConfigError("cannot open trace file '" + path + "'");
  f << "# iteration objective\n";
  char buf[64];
  for (size_t i = 0; i < objective.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu %.17g\n", i, objective[i]);
    f << buf;
  }
}

std::string format_metric(double v) {
  if (std::isinf(v)) return "inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void emit_report(const std::string& path, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) std::cout << k << ": " << v << "\n";
  if (!path.empty()) write_report(path, kv);
}

// ---------------------------------------------------------------------------

int run_denoise(const std::string& config_path, const std::string& input,
                const std::string& output, double sigma, const std::string& trace) {
  Config cfg = parse_config(config_path, config_schema());
  AdaptiveRegularizer model = build_or_load_model(cfg);
  Image y = read_grid(input).channel(0);
  double lambda = cfg.get_double_or("solver", "lambda", 1.0);
  double tol = cfg.get_double_or("solver", "tol", 1e-6);
  int max_iters = cfg.get_int_or("solver", "max_iters", 2000);
  MaskProvider prov = build_provider(cfg);
  double eps = cfg.get_double_or("mask", "epsilon", 0.01);

  Image result;
  std::vector<double> objective_trace;
  if (prov.kind == MaskKind::constant) {
    SolverResult sol = prox_denoise(model, y, sigma, lambda, tol, max_iters);
    if (!sol.converged) std::cerr << "warning: solver hit the iteration limit\n";
    result = sol.x_hat;
    objective_trace = sol.objective_trace;
  } else {
    IdentityOp ident(y.height, y.width);
    AdaptiveResult sol = reconstruct_adaptive(y.data, ident, Fidelity::quadratic(1.0), model,
                                              lambda, sigma, prov, eps, tol, max_iters);
    result = sol.x_hat;
    objective_trace = sol.stage2.objective_trace;
  }
  if (!trace.empty()) write_trace(trace, objective_trace);
  write_grid(output, GridImage::from_image(result));
  std::cout << "wrote " << output << "\n";
  return 0;
}

int run_reconstruct(const std::string& config_path, const std::string& data_path,
                    const std::string& output, const std::string& mask_out,
                    const std::string& trace) {
  Config cfg = parse_config(config_path, config_schema());
  auto op = build_operator(cfg);
  Fidelity fidelity = build_fidelity(cfg);
  AdaptiveRegularizer model = build_or_load_model(cfg);
  MaskProvider prov = build_provider(cfg);
  GridImage data = read_grid(data_path);
  if (static_cast<int>(data.data.size()) != op->output_size())
    throw ConfigError("data size " + std::to_string(data.data.size()) + " does not match operator output " +
                      std::to_string(op->output_size()));

  double lambda = cfg.get_double("solver", "lambda");
  double sigma = cfg.get_double_or("solver", "sigma", 0.0);
  double tol = cfg.get_double_or("solver", "tol", 1e-6);
  int max_iters = cfg.get_int_or("solver", "max_iters", 2000);
  double eps = cfg.get_double_or("mask", "epsilon", 0.01);

  AdaptiveResult sol = reconstruct_adaptive(data.data, *op, fidelity, model, lambda, sigma, prov,
                                            eps, tol, max_iters);
  if (!sol.stage2.converged) std::cerr << "warning: stage 2 hit the iteration limit\n";
  if (!trace.empty()) write_trace(trace, sol.stage2.objective_trace);
  write_grid(output, GridImage::from_image(sol.x_hat));
  std::cout << "wrote " << output << " (stage1 iters " << sol.stage1.iterations << ", stage2 iters "
            << sol.stage2.iterations << ", residual " << sol.stage2.final_gradient_norm << ")\n";
  if (!mask_out.empty()) {
    ChannelStack weights = sol.mask.weights;
    if (weights.empty())
      weights.assign(model.bank().n_channels(), Image(sol.x_hat.height, sol.x_hat.width, 1.0));
    write_grid(mask_out, GridImage::from_stack(weights));
    std::cout << "wrote " << mask_out << "\n";
  }
  return 0;
}

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::string& checkpoint_out, const std::string& curve_out) {
  Config cfg = parse_config(config_path, config_schema());
  AdaptiveRegularizer model = build_or_load_model(cfg);
  TrainConfig tc;
  tc.patch_size = cfg.get_int_or("train", "patch_size", 40);
  tc.n_patches = cfg.get_int_or("train", "n_patches", 2000);
  tc.batch_size = cfg.get_int_or("train", "batch_size", 32);
  tc.epochs = cfg.get_int_or("train", "epochs", 10);
  tc.sigma_min = cfg.get_double_or("train", "sigma_min", 0.0);
  tc.sigma_max = cfg.get_double_or("train", "sigma_max", 30.0 / 255.0);
  tc.lr_spline = cfg.get_double_or("train", "lr_spline", 5e-3);
  tc.lr_mu = cfg.get_double_or("train", "lr_mu", 5e-2);
  tc.lr_alpha = cfg.get_double_or("train", "lr_alpha", 5e-3);
  tc.seed = static_cast<std::uint64_t>(cfg.get_int_or("train", "seed", 1));
  tc.val_fraction = cfg.get_double_or("train", "val_fraction", 0.1);
  tc.prox_tol = cfg.get_double_or("train", "prox_tol", 1e-6);
  tc.prox_max_iters = cfg.get_int_or("train", "prox_max_iters", 500);
  tc.linear_warm_decay = cfg.get_int_or("train", "warm_decay", 0) != 0;

  auto images = load_image_dir(data_dir);
  auto patches = extract_patches(images, tc.patch_size, tc.n_patches, tc.seed + 77);
  TrainResult res = train_denoiser(model, patches, tc);
  if (res.diverged) throw NumericalError("training diverged; checkpoint holds the last good state");
  for (size_t e = 0; e < res.loss_trace.size(); ++e)
    std::cout << "epoch " << e << " train-l1 " << res.loss_trace[e] << " val-mse "
              << res.val_trace[e] << "\n";
  if (!curve_out.empty()) {
    std::ofstream f(curve_out, std::ios::trunc);
    if (!f) throw ConfigError("cannot open curve file '" + curve_out + "'");
    f << "# epoch train_l1 val_mse\n";
    char buf[96];
    for (size_t e = 0; e < res.loss_trace.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%zu %.17g %.17g\n", e, res.loss_trace[e], res.val_trace[e]);
      f << buf;
    }
  }
  save_checkpoint(checkpoint_out, model);
  std::cout << "wrote " << checkpoint_out << " (best epoch " << res.best_epoch << ")\n";
  return 0;
}

int run_finetune(const std::string& config_path, const std::string& checkpoint,
                 const std::string& data_dir, const std::string& checkpoint_out) {
  Config cfg = parse_config(config_path, config_schema());
  MaskProvider prov;
  AdaptiveRegularizer model = load_checkpoint(checkpoint, &prov);
  if (prov.kind != MaskKind::local_response) prov = build_provider(cfg);
  if (prov.kind != MaskKind::local_response)
    throw ConfigError("finetune-mask needs a local_response provider (checkpoint or [mask] kind)");

  auto op = build_operator(cfg);
  Fidelity fidelity = build_fidelity(cfg);
  NoiseSpec noise = build_noise(cfg);
  auto truths = load_image_dir(data_dir);
  for (const Image& t : truths)
    require(t.height == op->input_height() && t.width == op->input_width(),
            "finetune-mask: image shape does not match the operator");

  FinetuneConfig fc;
  fc.epochs = cfg.get_int_or("finetune", "epochs", 10);
  fc.lr_gain = cfg.get_double_or("finetune", "lr_gain", 0.05);
  fc.lr_offsets = cfg.get_double_or("finetune", "lr_offsets", 0.01);
  fc.lambda = cfg.get_double("solver", "lambda");
  fc.sigma = cfg.get_double_or("solver", "sigma", 0.0);
  fc.epsilon = cfg.get_double_or("mask", "epsilon", 0.01);
  fc.solver_tol = cfg.get_double_or("solver", "tol", 1e-7);
  fc.solver_max_iters = cfg.get_int_or("solver", "max_iters", 2000);
  auto seed = static_cast<std::uint64_t>(cfg.get_int_or("finetune", "seed", 9));

  std::vector<std::vector<double>> data;
  for (size_t i = 0; i < truths.size(); ++i)
    data.push_back(simulate_data(*op, truths[i], noise, seed + i));

  FinetuneResult res = finetune_mask_provider(model, prov, truths, data, *op, fidelity, fc);
  for (size_t e = 0; e < res.loss_trace.size(); ++e)
    std::cout << "epoch " << e << " task-l1 " << res.loss_trace[e] << "\n";
  save_checkpoint(checkpoint_out, model, &prov);
  std::cout << "wrote " << checkpoint_out << "\n";
  return 0;
}

int run_analyze_hoffman(const Config& cfg, const std::string& report) {
  auto seed = static_cast<std::uint64_t>(cfg.get_int_or("analyze", "seed", 1));
  int n_systems = cfg.get_int_or("analyze", "n_systems", 25);
  int vars = cfg.get_int_or("analyze", "vars", 3);
  int rows = cfg.get_int_or("analyze", "rows", 4);
  int n_probes = cfg.get_int_or("analyze", "n_probes", 50);
  require(vars <= 12 && rows <= 24, "analyze hoffman: size limits are 12 variables, 24 rows");

  Rng rng(seed);
  double max_k = 0.0;
  int violations = 0;
  int checks = 0;
  for (int s = 0; s < n_systems; ++s) {
    PolyhedralSystem sys;
    sys.e.resize(vars, vars);
    sys.f.resize(rows, vars);
    for (int i = 0; i < vars; ++i)
      for (int j = 0; j < vars; ++j) sys.e(i, j) = rng.normal();
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < vars; ++j) sys.f(i, j) = rng.normal();
    Vector x0(vars);
    for (int j = 0; j < vars; ++j) x0(j) = rng.normal();
    sys.b = sys.e * x0;
    sys.q = sys.f * x0;
    for (int i = 0; i < rows; ++i) sys.q(i) += rng.uniform(0.0, 1.0);

    max_k = std::max(max_k, hoffman_constant(sys.e, sys.f));
    for (int p = 0; p < n_probes; ++p) {
      Vector probe(vars);
      for (int j = 0; j < vars; ++j) probe(j) = 3.0 * rng.normal();
      DistanceCheck chk = hoffman_distance_check(sys, probe);
      ++checks;
      if (chk.true_distance > chk.bound * (1.0 + 1e-8) + 1e-12) ++violations;
    }
  }
  emit_report(report, {{"systems", std::to_string(n_systems)},
                       {"distance_checks", std::to_string(checks)},
                       {"distance_violations", std::to_string(violations)},
                       {"max_hoffman_constant", format_metric(max_k)},
                       {"result", violations == 0 ? "pass" : "fail"}});
  return violations == 0 ? 0 : 3;
}

int run_analyze_lipschitz(const Config& cfg, const std::string& report) {
  int h = cfg.get_int_or("analyze", "grid_height", 8);
  int w = cfg.get_int_or("analyze", "grid_width", 8);
  int n_pairs = cfg.get_int_or("analyze", "n_pairs", 50);
  double radius = cfg.get_double_or("analyze", "radius", 0.2);
  auto seed = static_cast<std::uint64_t>(cfg.get_int_or("analyze", "seed", 1));

  AdaptiveRegularizer model = build_or_load_model(cfg);
  model.set_noise_scalings({});  // probes run the unscaled analysis profile
  require(model.potential().c_cvx() == 0.0, "analyze lipschitz: model must be convex");
  IdentityOp ident(h, w);
  Image y0 = Image(h, w, 0.3);
  auto data_probe = empirical_solution_map_lipschitz(ident, Fidelity::quadratic(1.0), model, 1.0,
                                                     y0.data, n_pairs, radius, seed, 1e-9);
  auto mask_probe = empirical_mask_sensitivity(ident, Fidelity::quadratic(1.0), model, 1.0,
                                               y0.data, 0.05, std::min(n_pairs, 10), seed + 1,
                                               1e-9);
  bool pass = data_probe.max_ratio <= data_probe.bound * (1.0 + 1e-3) &&
              mask_probe.max_ratio <= mask_probe.bound * 1.05;
  emit_report(report, {{"pairs", std::to_string(n_pairs)},
                       {"max_ratio", format_metric(data_probe.max_ratio)},
                       {"bound", format_metric(data_probe.bound)},
                       {"mask_max_ratio", format_metric(mask_probe.max_ratio)},
                       {"mask_bound", format_metric(mask_probe.bound)},
                       {"result", pass ? "pass" : "fail"}});
  return pass ? 0 : 3;
}

int run_analyze_rates(const Config& cfg, const std::string& report) {
  int h = cfg.get_int_or("analyze", "grid_height", 16);
  int w = cfg.get_int_or("analyze", "grid_width", 16);
  AdaptiveRegularizer model = build_or_load_model(cfg);
  model.set_noise_scalings({});  // probes run the unscaled analysis profile
  IdentityOp ident(h, w);
  RateExperiment exp;
  exp.forward = &ident;
  exp.regularizer = &model;
  exp.x_true = Image(h, w, 0.0);
  {
    // deterministic piecewise-constant scene as the clean image
    Rng rng(3);
    exp.x_true = Image(h, w, 0.2);
    for (int r = h / 4; r < 3 * h / 4; ++r)
      for (int c = w / 4; c < 3 * w / 4; ++c) exp.x_true.at(r, c) = 0.8;
  }
  exp.delta_max = cfg.get_double_or("analyze", "delta_max", 1e-1);
  exp.delta_min = cfg.get_double_or("analyze", "delta_min", 1e-4);
  exp.n_levels = cfg.get_int_or("analyze", "n_levels", 9);
  exp.n_seeds = cfg.get_int_or("analyze", "n_seeds", 5);
  exp.lambda_coefficient = cfg.get_double_or("analyze", "lambda_coefficient", 1.0);
  exp.seed = static_cast<std::uint64_t>(cfg.get_int_or("analyze", "seed", 7));
  RateResult res = vanishing_noise_rates(exp);
  bool pass = !res.degenerate && res.slope >= 0.35 && res.slope <= 0.65;
  std::vector<std::pair<std::string, std::string>> kv = {
      {"levels", std::to_string(exp.n_levels)},
      {"seeds", std::to_string(exp.n_seeds)},
      {"degenerate", res.degenerate ? "true" : "false"},
      {"slope", format_metric(res.slope)},
      {"result", pass ? "pass" : "fail"}};
  for (size_t s = 0; s < res.slopes.size(); ++s)
    kv.insert(kv.end() - 1, {"slope_seed_" + std::to_string(s), format_metric(res.slopes[s])});
  emit_report(report, kv);
  return pass ? 0 : 3;
}

int run_analyze_coercivity(const Config& cfg, const std::string& report) {
  int h = cfg.get_int_or("analyze", "grid_height", 2);
  int w = cfg.get_int_or("analyze", "grid_width", 2);
  AdaptiveRegularizer model = build_or_load_model(cfg);
  model.set_noise_scalings({});  // probes run the unscaled analysis profile
  CoercivityResult res = gibbs_coercivity(model.bank(), h, w);
  NormalizabilityResult prior = prior_normalizability_check(model, res.gamma, h * w);
  emit_report(report, {{"grid", std::to_string(h) + "x" + std::to_string(w)},
                       {"gamma", format_metric(res.gamma)},
                       {"exact", res.exact ? "true" : "false"},
                       {"prior_normalizable", prior.ok ? "true" : "false"},
                       {"tail_slope", format_metric(prior.tail_slope)},
                       {"log_partition_bound", format_metric(prior.log_bound)},
                       {"result", "pass"}});
  return 0;
}

int run_metrics(const std::string& a_path, const std::string& b_path) {
  GridImage a = read_grid(a_path);
  GridImage b = read_grid(b_path);
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    throw ConfigError("metrics: '" + a_path + "' and '" + b_path + "' have different shapes");
  double p = psnr(a.data, b.data);
  double s = ssim(a.channel(0), b.channel(0));
  std::cout << "psnr=" << format_metric(p) << " ssim=" << format_metric(s) << "\n";
  return 0;
}

int run_simulate(const std::string& config_path, const std::string& truth,
                 const std::string& output, long long seed) {
  Config cfg = parse_config(config_path, config_schema());
  auto op = build_operator(cfg);
  NoiseSpec noise = build_noise(cfg);
  Image x = read_grid(truth).channel(0);
  std::vector<double> y = simulate_data(*op, x, noise, static_cast<std::uint64_t>(seed));
  GridImage g;
  g.height = static_cast<std::uint32_t>(op->output_rows());
  g.width = static_cast<std::uint32_t>(op->output_cols());
  g.channels = 1;
  g.data = std::move(y);
  write_grid(output, g);
  std::cout << "wrote " << output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"data-adaptive ridge reconstruction toolbox"};
  app.require_subcommand(1);

  std::string config, input, output, data_path, mask_out, data_dir, checkpoint, checkpoint_out;
  std::string a_path, b_path, report, trace, curve_out;
  double sigma = 0.0;
  long long seed = 0;

  auto* denoise = app.add_subcommand("denoise", "prox denoising of a grid image");
  denoise->add_option("--config", config)->required();
  denoise->add_option("--input", input)->required();
  denoise->add_option("--sigma", sigma)->required();
  denoise->add_option("--output", output)->required();
  denoise->add_option("--trace", trace);

  auto* reconstruct = app.add_subcommand("reconstruct", "two-stage adaptive reconstruction");
  reconstruct->add_option("--config", config)->required();
  reconstruct->add_option("--data", data_path)->required();
  reconstruct->add_option("--output", output)->required();
  reconstruct->add_option("--mask-out", mask_out);
  reconstruct->add_option("--trace", trace);

  auto* train = app.add_subcommand("train", "toy denoiser training");
  train->add_option("--config", config)->required();
  train->add_option("--data-dir", data_dir)->required();
  train->add_option("--checkpoint-out", checkpoint_out)->required();
  train->add_option("--curve-out", curve_out);

  auto* finetune = app.add_subcommand("finetune-mask", "finetune the mask provider on a task");
  finetune->add_option("--config", config)->required();
  finetune->add_option("--checkpoint", checkpoint)->required();
  finetune->add_option("--data-dir", data_dir)->required();
  finetune->add_option("--checkpoint-out", checkpoint_out);  // default: update in place

  auto* analyze = app.add_subcommand("analyze", "stability lab reports");
  analyze->require_subcommand(1);
  auto* hoffman = analyze->add_subcommand("hoffman", "hoffman constants and distance bounds");
  auto* lipschitz = analyze->add_subcommand("lipschitz", "empirical solution-map stability");
  auto* rates = analyze->add_subcommand("rates", "vanishing-noise convergence rates");
  auto* coercivity = analyze->add_subcommand("coercivity", "gibbs coercivity and prior bound");
  for (auto* sub : {hoffman, lipschitz, rates, coercivity}) {
    sub->add_option("--config", config)->required();
    sub->add_option("--report", report);
  }

  auto* metrics_cmd = app.add_subcommand("metrics", "psnr and ssim between two grids");
  metrics_cmd->add_option("--a", a_path)->required();
  metrics_cmd->add_option("--b", b_path)->required();

  auto* simulate = app.add_subcommand("simulate", "apply the forward model and noise");
  simulate->add_option("--config", config)->required();
  simulate->add_option("--truth", input)->required();
  simulate->add_option("--output", output)->required();
  simulate->add_option("--seed", seed)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (denoise->parsed()) return run_denoise(config, input, output, sigma, trace);
    if (reconstruct->parsed()) return run_reconstruct(config, data_path, output, mask_out, trace);
    if (train->parsed()) return run_train(config, data_dir, checkpoint_out, curve_out);
    if (finetune->parsed())
      return run_finetune(config, checkpoint, data_dir,
                          checkpoint_out.empty() ? checkpoint : checkpoint_out);
    if (analyze->parsed()) {
      Config cfg = parse_config(config, config_schema());
      if (hoffman->parsed()) return run_analyze_hoffman(cfg, report);
      if (lipschitz->parsed()) return run_analyze_lipschitz(cfg, report);
      if (rates->parsed()) return run_analyze_rates(cfg, report);
      if (coercivity->parsed()) return run_analyze_coercivity(cfg, report);
    }
    if (metrics_cmd->parsed()) return run_metrics(a_path, b_path);
    if (simulate->parsed()) return run_simulate(config, input, output, seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

#pragma once

#include <string>

#include "io.hpp"
#include "regularizer.hpp"

namespace ridge {

// Model checkpoints in the ARRF text format. Stored arrays: psi_plus,
// psi_minus, spacing, mu, c_cvx, kernel_<c>, alpha_knots_<c>, and the mask
// provider scalars when one is attached.
inline void save_checkpoint(const std::string& path, const AdaptiveRegularizer& model,
                            const MaskProvider* provider = nullptr) {
  std::vector<NamedArray> arrays;
  const SplinePotential& pot = model.potential();
  arrays.push_back({"psi_plus", {pot.intervals()}, pot.plus_coefficients()});
  arrays.push_back({"psi_minus", {pot.intervals()}, pot.minus_coefficients()});
  arrays.push_back({"spacing", {1}, {pot.spacing()}});
  arrays.push_back({"mu", {1}, {pot.mu()}});
  arrays.push_back({"c_cvx", {1}, {pot.c_cvx()}});
  const FilterBank& bank = model.bank();
  for (int c = 0; c < bank.n_channels(); ++c)
    arrays.push_back({"kernel_" + std::to_string(c), {bank.kernel_size(), bank.kernel_size()},
                      bank.kernel(c)});
  for (size_t c = 0; c < model.noise_scalings().size(); ++c)
    arrays.push_back({"alpha_knots_" + std::to_string(c), {NoiseScaling::knot_count},
                      model.noise_scalings()[c].values});
  if (provider && provider->kind == MaskKind::local_response) {
    arrays.push_back({"mask_gain", {1}, {provider->gain}});
    arrays.push_back({"mask_threshold", {1}, {provider->threshold}});
    arrays.push_back({"mask_smoothing", {1}, {static_cast<double>(provider->smoothing_width)}});
    if (!provider->threshold_offsets.empty())
      arrays.push_back({"mask_offsets", {static_cast<int>(provider->threshold_offsets.size())},
                        provider->threshold_offsets});
  }
  write_arrays(path, arrays);
}

inline AdaptiveRegularizer load_checkpoint(const std::string& path,
                                           MaskProvider* provider_out = nullptr) {
  auto arrays = read_arrays(path);
  auto need = [&](const std::string& name) -> const NamedArray& {
    const NamedArray* a = find_array(arrays, name);
    if (!a) throw ConfigError("checkpoint '" + path + "' is missing array '" + name + "'");
    return *a;
  };

  const NamedArray& psi_plus = need("psi_plus");
  const NamedArray& psi_minus = need("psi_minus");
  int knots = psi_plus.count() + 1;
  double spacing = need("spacing").values.at(0);
  double mu = need("mu").values.at(0);
  double c_cvx = need("c_cvx").values.at(0);
  SplinePotential pot(knots, spacing, psi_plus.values, psi_minus.values, mu, c_cvx);

  int n_channels = 0;
  while (find_array(arrays, "kernel_" + std::to_string(n_channels))) ++n_channels;
  if (n_channels == 0) throw ConfigError("checkpoint '" + path + "' has no kernels");
  const NamedArray& k0 = need("kernel_0");
  if (k0.dims.size() != 2 || k0.dims[0] != k0.dims[1])
    throw ConfigError("checkpoint '" + path + "': kernel_0 must be square");
  FilterBank bank(n_channels, k0.dims[0]);
  for (int c = 0; c < n_channels; ++c) bank.set_kernel(c, need("kernel_" + std::to_string(c)).values);

  AdaptiveRegularizer model(std::move(bank), std::move(pot));
  std::vector<NoiseScaling> scalings;
  for (int c = 0; c < n_channels; ++c) {
    const NamedArray* a = find_array(arrays, "alpha_knots_" + std::to_string(c));
    if (!a) break;
    NoiseScaling s;
    s.values = a->values;
    scalings.push_back(std::move(s));
  }
  if (!scalings.empty()) {
    if (static_cast<int>(scalings.size()) != n_channels)
      throw ConfigError("checkpoint '" + path + "': alpha_knots arrays must cover every channel");
    model.set_noise_scalings(std::move(scalings));
  }

  if (provider_out) {
    if (const NamedArray* g = find_array(arrays, "mask_gain")) {
      provider_out->kind = MaskKind::local_response;
      provider_out->gain = g->values.at(0);
      provider_out->threshold = need("mask_threshold").values.at(0);
      provider_out->smoothing_width = static_cast<int>(need("mask_smoothing").values.at(0));
      if (const NamedArray* off = find_array(arrays, "mask_offsets"))
        provider_out->threshold_offsets = off->values;
    }
  }
  return model;
}

}  // namespace ridge

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "kgdial/nn/layers.hpp"

namespace kgdial::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_parameter;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares analytic gradients of `loss_fn` with central differences on up
/// to `coords_per_param` random coordinates of every parameter (all of them
/// when fewer). Relative error is |a - n| / max(|a|, |n|, floor).
/// Throws ConfigError unless eps is in [1e-6, 1e-3].
GradCheckResult gradient_check(ParameterStore& store, const std::function<Var()>& loss_fn,
                               double eps = 1e-5, std::size_t coords_per_param = 50,
                               std::uint64_t seed = 0, double floor = 1e-6);

}  // namespace kgdial::nn

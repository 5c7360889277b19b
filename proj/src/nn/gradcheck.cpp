#include "kgdial/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kgdial/errors.hpp"

namespace kgdial::nn {

GradCheckResult gradient_check(ParameterStore& store, const std::function<Var()>& loss_fn,
                               double eps, std::size_t coords_per_param, std::uint64_t seed,
                               double floor) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) throw ConfigError("gradient_check: eps must be in [1e-6, 1e-3]");
  store.zero_grad();
  backward(loss_fn());

  Rng rng(seed);
  GradCheckResult result;
  for (const auto& [name, p] : store.entries()) {
    const auto size = static_cast<std::size_t>(p->value.size());
    std::vector<std::size_t> coords(size);
    std::iota(coords.begin(), coords.end(), 0);
    if (size > coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(coords_per_param);
    }
    const Matrix analytic = p->grad.size() ? p->grad : Matrix::Zero(p->value.rows(), p->value.cols());
    for (std::size_t c : coords) {
      double& x = p->value.data()[c];
      const double saved = x;
      double plus, minus;
      {
        NoGradGuard guard;
        x = saved + eps;
        plus = loss_fn()->scalar();
        x = saved - eps;
        minus = loss_fn()->scalar();
      }
      x = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic.data()[c];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.coords_checked;
      if (rel > result.max_rel_error || result.worst_parameter.empty()) {
        if (rel >= result.max_rel_error) {
          result.max_rel_error = rel;
          result.worst_parameter = name;
          result.worst_analytic = a;
          result.worst_numeric = numeric;
        }
      }
    }
  }
  return result;
}

}  // namespace kgdial::nn

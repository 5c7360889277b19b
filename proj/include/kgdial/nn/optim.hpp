#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <json.hpp>

#include "kgdial/nn/layers.hpp"

namespace kgdial::nn {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 8;
  int epochs = 10;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Global gradient norm clip; 0 disables.
  double clip_norm = 1.0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// lr0 * max(0, 1 - step / total_steps).
double linear_decay_lr(double lr0, long step, long total_steps);

/// AdamW with decoupled weight decay. Bias and layer-norm parameters are not
/// decayed.
class AdamW {
 public:
  AdamW(ParameterStore& store, const TrainConfig& cfg);

  /// Applies one update from the accumulated gradients at learning rate
  /// `lr`. Parameters without a gradient are left untouched.
  void step(double lr);
  long steps_taken() const { return t_; }

 private:
  struct Slot {
    Var param;
    Matrix m, v;
    bool decay = true;
  };
  std::vector<Slot> slots_;
  TrainConfig cfg_;
  long t_ = 0;
};

/// Zeroes gradients, evaluates `loss_fn`, back-propagates and updates with
/// the scheduled learning rate for `step`. Throws NumericError if the loss
/// or a gradient is not finite. Returns the loss value.
double train_step(ParameterStore& store, AdamW& opt, const std::function<Var()>& loss_fn,
                  long step, long total_steps, double lr0);

}  // namespace kgdial::nn

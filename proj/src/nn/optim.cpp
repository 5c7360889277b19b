#include "kgdial/nn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kgdial/errors.hpp"

namespace kgdial::nn {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (batch_size <= 0) throw ConfigError("train: batch_size must be positive");
  if (epochs < 0) throw ConfigError("train: epochs must be non-negative");
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be non-negative");
  if (clip_norm < 0.0) throw ConfigError("train: clip_norm must be non-negative");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lr", lr},       {"batch_size", batch_size},     {"epochs", epochs},
          {"seed", seed},   {"weight_decay", weight_decay}, {"beta1", beta1},
          {"beta2", beta2}, {"adam_eps", adam_eps},         {"clip_norm", clip_norm}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr = j.value("lr", c.lr);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.validate();
  return c;
}

double linear_decay_lr(double lr0, long step, long total_steps) {
  if (total_steps <= 0) return 0.0;
  return lr0 * std::max(0.0, 1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

AdamW::AdamW(ParameterStore& store, const TrainConfig& cfg) : cfg_(cfg) {
  for (const auto& [name, p] : store.entries()) {
    Slot s;
    s.param = p;
    s.m = Matrix::Zero(p->value.rows(), p->value.cols());
    s.v = Matrix::Zero(p->value.rows(), p->value.cols());
    s.decay = !(ends_with(name, ".bias") || ends_with(name, ".gamma") || ends_with(name, ".beta"));
    slots_.push_back(std::move(s));
  }
}

void AdamW::step(double lr) {
  ++t_;
  double scale = 1.0;
  if (cfg_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& s : slots_)
      if (s.param->grad.size() != 0) sq += s.param->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) scale = cfg_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& s : slots_) {
    if (s.param->grad.size() == 0) continue;
    const Matrix g = s.param->grad * scale;
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * g;
    s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    if (lr == 0.0) continue;
    if (s.decay && cfg_.weight_decay > 0.0) s.param->value *= (1.0 - lr * cfg_.weight_decay);
    s.param->value.array() -=
        lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + cfg_.adam_eps);
  }
}

double train_step(ParameterStore& store, AdamW& opt, const std::function<Var()>& loss_fn,
                  long step, long total_steps, double lr0) {
  store.zero_grad();
  Var loss = loss_fn();
  const double value = loss->scalar();
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "non-finite loss " << value << " at step " << step << " of " << total_steps;
    throw NumericError(msg.str());
  }
  backward(loss);
  for (const auto& [name, p] : store.entries()) {
    if (p->grad.size() != 0 && !p->grad.allFinite())
      throw NumericError("non-finite gradient in " + name + " at step " + std::to_string(step));
  }
  opt.step(linear_decay_lr(lr0, step, total_steps));
  return value;
}

}  // namespace kgdial::nn

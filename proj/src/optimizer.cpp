#include "distillnn/optimizer.hpp"

#include <cmath>
#include <string>

#include "distillnn/errors.hpp"

namespace distillnn {

Sgd::Sgd(SgdConfig config, const MlpModel& model) : config_(config) {
  if (config_.total_steps == 0) throw ContractError("optimizer needs total_steps >= 1");
  if (config_.learning_rate < 0.0 || config_.momentum < 0.0 || config_.weight_decay < 0.0 ||
      config_.max_grad_norm < 0.0)
    throw ContractError("optimizer hyperparameters must be non-negative");
  for (const Tensor* p : model.parameters()) velocity_.emplace_back(p->size(), 0.0);
}

double Sgd::learning_rate_at(std::size_t step) const {
  if (step >= config_.total_steps) return 0.0;
  if (config_.poly_power == 0.0) return config_.learning_rate;
  const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(config_.total_steps);
  return config_.learning_rate * std::pow(frac, config_.poly_power);
}

void Sgd::step(MlpModel& model) {
  if (step_ >= config_.total_steps)
    throw ScheduleExhaustedError("optimizer schedule exhausted after " + std::to_string(config_.total_steps) +
                                 " steps");
  auto params = model.parameters();
  if (params.size() != velocity_.size()) throw ContractError("optimizer was built for a different model");
  const double lr = learning_rate();
  double sq = 0.0;
  for (Tensor* p : params)
    for (double g : p->grad()) sq += g * g;
  last_grad_norm_ = std::sqrt(sq);
  const double clip = config_.max_grad_norm > 0.0 && last_grad_norm_ > config_.max_grad_norm
                          ? config_.max_grad_norm / last_grad_norm_
                          : 1.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    std::vector<double>& v = velocity_[k];
    if (v.size() != p.size()) throw DimensionError("velocity shape does not match parameter");
    auto w = p.data();
    auto g = p.grad();
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = config_.momentum * v[i] + clip * g[i] + config_.weight_decay * w[i];
      w[i] -= lr * v[i];
    }
  }
  ++step_;
}

}  // namespace distillnn

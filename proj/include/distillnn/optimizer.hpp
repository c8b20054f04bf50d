#pragma once

#include <cstddef>
#include <vector>

#include "distillnn/model.hpp"

namespace distillnn {

struct SgdConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t total_steps = 1000;
  /// Exponent of the poly schedule; 0 holds the rate constant.
  double poly_power = 0.9;
  /// Rescale the whole gradient to this L2 norm when it is larger; 0 disables.
  double max_grad_norm = 0.0;
};

/// SGD with momentum, coupled weight decay and a poly learning-rate schedule:
/// after optional global-norm clipping of grad:
///   v <- momentum * v + grad + weight_decay * param
///   param <- param - lr(t) * v,   lr(t) = lr0 * (1 - t / total)^power
class Sgd {
 public:
  Sgd(SgdConfig config, const MlpModel& model);

  const SgdConfig& config() const noexcept { return config_; }
  std::size_t step_count() const noexcept { return step_; }
  /// Gradient norm seen by the last step, before clipping.
  double last_grad_norm() const noexcept { return last_grad_norm_; }
  double learning_rate() const { return learning_rate_at(step_); }
  double learning_rate_at(std::size_t step) const;

  /// Applies one update using the gradients stored on the model's parameters.
  /// Throws ScheduleExhaustedError once total_steps updates have been applied.
  void step(MlpModel& model);

 private:
  SgdConfig config_;
  std::size_t step_ = 0;
  double last_grad_norm_ = 0.0;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace distillnn

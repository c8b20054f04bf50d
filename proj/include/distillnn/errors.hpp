#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace distillnn {

/// Violated precondition or interface contract (bad argument, wrong mode, missing head...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Tensor shapes that do not compose.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// NaN or infinity where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimizer stepped past the end of its learning-rate schedule.
class ScheduleExhaustedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, std::size_t step)
      : NumericError(what + " (step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace distillnn

#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "distillnn/rng.hpp"
#include "distillnn/tensor.hpp"

namespace distillnn {

/// y = x W + b, W has shape (in, out).
struct DenseLayer {
  Tensor weight;
  Tensor bias;

  std::size_t in() const { return weight.shape()[0]; }
  std::size_t out() const { return weight.shape()[1]; }
};

struct ReluLayer {};

/// Inverted dropout: kept units are scaled by 1/(1-rate) so eval needs no rescaling.
struct DropoutLayer {
  double rate = 0.0;
};

struct SoftmaxLayer {};

using Layer = std::variant<DenseLayer, ReluLayer, DropoutLayer, SoftmaxLayer>;

enum class Mode { train, eval };

/// Per-forward record of layer inputs and dropout masks, consumed by backward.
class Tape {
 public:
  const Tensor& output() const { return output_; }
  bool empty() const { return inputs_.empty(); }

 private:
  friend class MlpModel;
  std::vector<Tensor> inputs_;
  std::vector<std::vector<double>> masks_;
  Tensor output_;
};

/// Scalar loss value together with its gradient with respect to the network output.
struct Loss {
  double value = 0.0;
  Tensor output_grad;
};

class MlpModel {
 public:
  MlpModel() = default;
  explicit MlpModel(std::vector<Layer> layers);

  /// Dense -> ReLU -> [Dropout] per hidden size, then a final dense layer.
  /// Hidden weights use He-normal initialization, the output layer a 0.1 gain; biases start at zero.
  static MlpModel make(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t output_dim,
                       double dropout_rate, Rng& init);

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::vector<Layer>& layers() noexcept { return layers_; }

  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode mode) noexcept { mode_ = mode; }
  /// Keep dropout sampling in eval mode (MC-dropout inference).
  bool mc_dropout() const noexcept { return mc_dropout_; }
  void set_mc_dropout(bool on) noexcept { mc_dropout_ = on; }
  bool dropout_active() const noexcept { return mode_ == Mode::train || mc_dropout_; }
  bool has_dropout() const;

  std::size_t input_dim() const;
  std::size_t output_dim() const;

  /// x has shape (batch, input_dim). rng is required when any dropout layer is active.
  /// Pass a tape to record what backward needs.
  Tensor forward(const Tensor& x, Rng* rng = nullptr, Tape* tape = nullptr) const;

  /// Accumulates d(loss)/d(parameter) into every parameter's grad buffer.
  void backward(const Tape& tape, const Loss& loss);

  void zero_grad();
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::vector<double> flat_parameters() const;
  std::size_t parameter_count() const;

  /// Same layers with every dropout layer removed.
  MlpModel without_dropout() const;

 private:
  void validate() const;

  std::vector<Layer> layers_;
  Mode mode_ = Mode::eval;
  bool mc_dropout_ = false;
};

/// Row-wise numerically stable softmax.
Tensor softmax_rows(const Tensor& logits);
void softmax_inplace(std::span<double> row);

}  // namespace distillnn

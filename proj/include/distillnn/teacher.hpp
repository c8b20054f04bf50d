#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "distillnn/datasets.hpp"
#include "distillnn/model.hpp"
#include "distillnn/rng.hpp"
#include "distillnn/tensor.hpp"

namespace distillnn {

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double poly_power = 0.9;
  double max_grad_norm = 10.0;
};

enum class TeacherKind { mc_dropout, ensemble };
std::string to_string(TeacherKind kind);
TeacherKind parse_teacher_kind(const std::string& text);

struct TeacherConfig {
  TeacherKind kind = TeacherKind::mc_dropout;
  double dropout_rate = 0.2;
  std::size_t ensemble_size = 5;
  bool aleatoric_head = true;
  /// Predictive samples used at evaluation.
  std::size_t eval_samples = 50;
  std::vector<std::size_t> hidden = {64, 64};
  /// Logit-noise draws per step for the classification head loss.
  std::size_t logit_noise_draws = 10;
  TrainConfig train;

  void validate() const;
};

/// One network (MC dropout) or several (ensemble). With an aleatoric head the
/// final layer emits [mu, s] with s = log variance.
class TeacherModel {
 public:
  TeacherModel(TeacherConfig config, Task task, std::size_t output_dim, std::vector<MlpModel> members);

  const TeacherConfig& config() const noexcept { return config_; }
  Task task() const noexcept { return task_; }
  std::size_t output_dim() const noexcept { return output_dim_; }
  bool has_head() const noexcept { return config_.aleatoric_head; }
  const std::vector<MlpModel>& members() const noexcept { return members_; }
  std::size_t size() const noexcept { return members_.size(); }
  bool is_ensemble() const noexcept { return config_.kind == TeacherKind::ensemble; }

  /// Sample count used when none is requested: eval_samples or the member count.
  std::size_t default_samples() const;

  /// Dropout-off forward pass of one member. Raw output (N, D or 2D).
  Tensor deterministic_forward(const Tensor& x, std::size_t member = 0) const;

 private:
  TeacherConfig config_;
  Task task_;
  std::size_t output_dim_;
  std::vector<MlpModel> members_;
};

/// T predictive samples for one input. mu holds logits for classification.
struct PredictiveSampleSet {
  Tensor mu;      // (T, D)
  Tensor logvar;  // (T, D), empty without an aleatoric head

  std::size_t count() const { return mu.rows(); }
  std::size_t dim() const { return mu.cols(); }
  bool has_logvar() const { return !logvar.empty(); }
};

/// Predictive samples for a batch: one (N, D) tensor per sample.
struct BatchSamples {
  std::vector<Tensor> mu;
  std::vector<Tensor> logvar;

  std::size_t count() const { return mu.size(); }
  std::size_t inputs() const { return mu.empty() ? 0 : mu.front().rows(); }
  std::size_t dim() const { return mu.empty() ? 0 : mu.front().cols(); }
  bool has_logvar() const { return !logvar.empty(); }
  PredictiveSampleSet at(std::size_t input) const;
};

/// Trains one dropout network or `ensemble_size` independently initialized
/// networks. `epoch_losses`, when given, receives the mean training loss per epoch.
TeacherModel train_teacher(const TeacherConfig& config, const TrainingData& data, Rng& rng,
                           std::vector<double>* epoch_losses = nullptr);
/// Same, with initialization/ordering and dropout/logit-noise drawn from separate streams.
TeacherModel train_teacher(const TeacherConfig& config, const TrainingData& data, Rng& init_rng, Rng& dropout_rng,
                           std::vector<double>* epoch_losses = nullptr);

/// T stochastic passes (MC dropout) or one pass per member, in member order (ensemble).
BatchSamples mc_predict(const TeacherModel& teacher, const Tensor& x, std::size_t samples, Rng& rng);
BatchSamples mc_predict(const TeacherModel& teacher, const Tensor& x, Rng& rng);

/// Mean over samples of softmax(logits_t).
std::vector<double> classification_mean(const PredictiveSampleSet& samples);
Tensor classification_mean(const BatchSamples& samples);

}  // namespace distillnn

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "distillnn/datasets.hpp"
#include "distillnn/model.hpp"
#include "distillnn/sampler.hpp"
#include "distillnn/teacher.hpp"

namespace distillnn {

enum class StudentMode { full_distribution, mean_only_dd };
std::string to_string(StudentMode mode);
StudentMode parse_student_mode(const std::string& text);

struct StudentConfig {
  /// Weight of the ground-truth term in the total loss.
  double lambda = 1.0;
  bool init_from_teacher = true;
  StudentMode mode = StudentMode::full_distribution;
  AugmentationSpec augmentation;
  TrainConfig train;

  /// Half the teacher learning rate, three quarters of its epochs.
  static StudentConfig derived_from(const TeacherConfig& teacher);
  void validate() const;
};

/// Mean and log-variance heads for a batch: both (N, D).
/// For classification both live in logit space.
struct DistParams {
  Tensor mu;
  Tensor logvar;
};

/// Deterministic network whose final layer emits [mu, s], s = log variance.
class StudentModel {
 public:
  StudentModel(MlpModel net, StudentConfig config, Task task, std::size_t output_dim);

  const MlpModel& net() const noexcept { return net_; }
  MlpModel& net() noexcept { return net_; }
  const StudentConfig& config() const noexcept { return config_; }
  Task task() const noexcept { return task_; }
  std::size_t output_dim() const noexcept { return output_dim_; }
  bool mean_only() const noexcept { return config_.mode == StudentMode::mean_only_dd; }

  /// Throws ContractError for mean-only students, whose variance head is untrained.
  void require_distribution(const char* what) const;

 private:
  MlpModel net_;
  StudentConfig config_;
  Task task_;
  std::size_t output_dim_;
};

/// Teacher architecture without dropout, final layer widened to 2 * output_dim.
/// With init_from_teacher, copies member 0's parameters; the mean columns of the
/// last layer come from the teacher's mean outputs and the log-variance columns
/// from its head (zero when it has none).
StudentModel make_student(const TeacherModel& teacher, const StudentConfig& config, Rng& init);

/// Copies `from` into `to` layer by layer, skipping dropout layers. The final
/// dense layers may differ in width: the first `mu_dim` output columns are copied,
/// then the matching log-variance columns if `from` has them.
void copy_compatible_parameters(const MlpModel& from, MlpModel& to, std::size_t mu_dim);

double student_loss_regression(const DistParams& params, const SampleBatch& targets);
double student_loss_classification(const DistParams& params, const SampleBatch& targets);

StudentModel train_student(const TeacherModel& teacher, const TrainingData& data, const StudentConfig& config,
                           const SamplerConfig& sampler, Rng& rng, std::vector<double>* epoch_losses = nullptr);
/// Same, with target sampling driven by its own stream.
StudentModel train_student(const TeacherModel& teacher, const TrainingData& data, const StudentConfig& config,
                           const SamplerConfig& sampler, Rng& rng, Rng& sample_rng,
                           std::vector<double>* epoch_losses = nullptr);

/// Single deterministic forward pass. Consumes no randomness.
DistParams student_predict(const StudentModel& student, const Tensor& x);

/// exp(s): the reported regression predictive variance.
Tensor predictive_variance(const StudentModel& student, const DistParams& params);

struct LogitUncertainty {
  std::vector<double> mean_probs;
  double bald = 0.0;
};

/// Draws `samples` logit vectors mu + exp(s/2) * eps, returns their mean softmax and BALD.
LogitUncertainty student_classification_uncertainty(std::span<const double> mu, std::span<const double> logvar,
                                                    std::size_t samples, Rng& rng);

struct BatchLogitUncertainty {
  Tensor mean_probs;
  std::vector<double> bald;
};

BatchLogitUncertainty student_classification_uncertainty(const StudentModel& student, const DistParams& params,
                                                         std::size_t samples, Rng& rng);

}  // namespace distillnn

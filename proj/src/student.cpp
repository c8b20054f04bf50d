#include "distillnn/student.hpp"

#include <cmath>

#include "batching.hpp"
#include "distillnn/errors.hpp"
#include "distillnn/losses.hpp"
#include "distillnn/metrics.hpp"
#include "distillnn/optimizer.hpp"

namespace distillnn {

std::string to_string(StudentMode mode) { return mode == StudentMode::full_distribution ? "full" : "dd"; }

StudentMode parse_student_mode(const std::string& text) {
  if (text == "full" || text == "full_distribution") return StudentMode::full_distribution;
  if (text == "dd" || text == "mean_only_dd") return StudentMode::mean_only_dd;
  throw ContractError("unknown student mode '" + text + "'");
}

StudentConfig StudentConfig::derived_from(const TeacherConfig& teacher) {
  StudentConfig cfg;
  cfg.train = teacher.train;
  cfg.train.learning_rate = 0.5 * teacher.train.learning_rate;
  cfg.train.epochs = std::max<std::size_t>(1, teacher.train.epochs * 3 / 4);
  return cfg;
}

void StudentConfig::validate() const {
  if (lambda < 0.0) throw ContractError("lambda must be >= 0");
  if (augmentation.jitter_range < 0.0) throw ContractError("jitter_range must be >= 0");
  if (train.epochs == 0 || train.batch_size == 0) throw ContractError("epochs and batch_size must be >= 1");
}

StudentModel::StudentModel(MlpModel net, StudentConfig config, Task task, std::size_t output_dim)
    : net_(std::move(net)), config_(std::move(config)), task_(task), output_dim_(output_dim) {
  if (net_.has_dropout()) throw ContractError("student network must not contain dropout");
  if (net_.output_dim() != 2 * output_dim_)
    throw DimensionError("student must emit 2 * output_dim values, got " + std::to_string(net_.output_dim()));
  net_.set_mode(Mode::eval);
  net_.set_mc_dropout(false);
}

void StudentModel::require_distribution(const char* what) const {
  if (mean_only())
    throw ContractError(std::string(what) + ": a mean-only (dd) student has no trained variance head");
}

namespace {

std::vector<DenseLayer*> dense_layers(MlpModel& m) {
  std::vector<DenseLayer*> out;
  for (Layer& l : m.layers())
    if (auto* d = std::get_if<DenseLayer>(&l)) out.push_back(d);
  return out;
}

std::vector<const DenseLayer*> dense_layers(const MlpModel& m) {
  std::vector<const DenseLayer*> out;
  for (const Layer& l : m.layers())
    if (const auto* d = std::get_if<DenseLayer>(&l)) out.push_back(d);
  return out;
}

}  // namespace

void copy_compatible_parameters(const MlpModel& from, MlpModel& to, std::size_t mu_dim) {
  auto src = dense_layers(from);
  auto dst = dense_layers(to);
  if (src.size() != dst.size() || src.empty())
    throw ContractError("init from teacher: dense layer counts differ");
  for (std::size_t i = 0; i + 1 < src.size(); ++i)
    if (!src[i]->weight.same_shape(dst[i]->weight))
      throw ContractError("init from teacher: hidden layer " + std::to_string(i) + " shapes differ");
  const DenseLayer& s = *src.back();
  DenseLayer& d = *dst.back();
  if (s.in() != d.in() || (s.out() != mu_dim && s.out() != 2 * mu_dim) || d.out() != 2 * mu_dim)
    throw ContractError("init from teacher: output layers are incompatible");
  for (std::size_t i = 0; i + 1 < src.size(); ++i) {
    dst[i]->weight = Tensor(src[i]->weight.shape(), src[i]->weight.values());
    dst[i]->bias = Tensor(src[i]->bias.shape(), src[i]->bias.values());
  }
  const std::size_t cols = s.out();
  for (std::size_t r = 0; r < s.in(); ++r)
    for (std::size_t c = 0; c < d.out(); ++c) d.weight(r, c) = c < cols ? s.weight(r, c) : 0.0;
  for (std::size_t c = 0; c < d.out(); ++c) d.bias[c] = c < cols ? s.bias[c] : 0.0;
}

StudentModel make_student(const TeacherModel& teacher, const StudentConfig& config, Rng& init) {
  config.validate();
  const MlpModel& base = teacher.members().front();
  const std::size_t d = teacher.output_dim();
  MlpModel net = MlpModel::make(base.input_dim(), teacher.config().hidden, 2 * d, 0.0, init);
  if (config.init_from_teacher) copy_compatible_parameters(base, net, d);
  return StudentModel(std::move(net), config, teacher.task(), d);
}

double student_loss_regression(const DistParams& params, const SampleBatch& targets) {
  return laplace_distillation_loss(params.mu, params.logvar, targets.targets).value;
}

double student_loss_classification(const DistParams& params, const SampleBatch& targets) {
  return gaussian_logit_distillation_loss(params.mu, params.logvar, targets.targets).value;
}

namespace {

HeadLoss full_distribution_loss(const StudentModel& student, const TeacherModel& teacher, const Tensor& mu,
                                const Tensor& logvar, const Tensor& inputs, const TrainingData& batch,
                                const SamplerConfig& sampler, Rng& sample_rng) {
  const SampleBatch targets = draw_targets(teacher, inputs, sampler, sample_rng);
  const double lambda = student.config().lambda;
  if (student.task() == Task::regression)
    return total_loss(laplace_distillation_loss(mu, logvar, targets.targets), lambda,
                      mean_absolute_error(mu, batch.targets));
  return total_loss(gaussian_logit_distillation_loss(mu, logvar, targets.targets), lambda,
                    softmax_cross_entropy(mu, batch.labels));
}

HeadLoss mean_only_loss(const StudentModel& student, const TeacherModel& teacher, const Tensor& mu,
                        const Tensor& inputs, const TrainingData& batch, const SamplerConfig& sampler,
                        Rng& sample_rng) {
  const std::size_t m = teacher.is_ensemble() ? std::min(sampler.m, teacher.size()) : sampler.m;
  const BatchSamples samples = mc_predict(teacher, inputs, m, sample_rng);
  const double lambda = student.config().lambda;
  Loss distill;
  Loss truth;
  if (student.task() == Task::regression) {
    Tensor mean(mu.shape());
    for (const Tensor& s : samples.mu)
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += s[i] / static_cast<double>(samples.count());
    distill = mean_squared_error(mu, mean);
    truth = mean_absolute_error(mu, batch.targets);
  } else {
    distill = soft_cross_entropy(mu, classification_mean(samples));
    truth = softmax_cross_entropy(mu, batch.labels);
  }
  HeadLoss head{distill.value, std::move(distill.output_grad), Tensor(mu.shape())};
  return total_loss(head, lambda, truth);
}

}  // namespace

StudentModel train_student(const TeacherModel& teacher, const TrainingData& data, const StudentConfig& config,
                           const SamplerConfig& sampler, Rng& rng, std::vector<double>* epoch_losses) {
  Rng sample_rng = rng.split("sampler");
  return train_student(teacher, data, config, sampler, rng, sample_rng, epoch_losses);
}

StudentModel train_student(const TeacherModel& teacher, const TrainingData& data, const StudentConfig& config,
                           const SamplerConfig& sampler, Rng& rng, Rng& sample_rng,
                           std::vector<double>* epoch_losses) {
  config.validate();
  sampler.validate(teacher.has_head());
  if (data.task != teacher.task()) throw ContractError("train_student: teacher and data tasks differ");
  if (data.size() == 0) throw ContractError("train_student: empty dataset");

  Rng init = rng.split("init");
  Rng order = rng.split("order");
  Rng jitter = rng.split("augment");

  StudentModel student = make_student(teacher, config, init);
  MlpModel& net = student.net();
  const std::size_t d = student.output_dim();
  const std::vector<double> scale = feature_std(data.inputs);

  const std::size_t per_epoch = detail::batches_per_epoch(data.size(), config.train.batch_size);
  Sgd sgd({config.train.learning_rate, config.train.momentum, config.train.weight_decay,
           config.train.epochs * per_epoch, config.train.poly_power, config.train.max_grad_norm},
          net);

  std::vector<double> losses(config.train.epochs, 0.0);
  Tape tape;
  std::size_t step = 0;
  net.set_mode(Mode::train);
  for (std::size_t epoch = 0; epoch < config.train.epochs; ++epoch) {
    double sum = 0.0;
    for (const auto& rows : detail::epoch_batches(data.size(), config.train.batch_size, order)) {
      const TrainingData batch = data.subset(rows);
      // Teacher and student see the same perturbed inputs.
      const Tensor inputs = augment(batch.inputs, config.augmentation, scale, jitter);
      net.zero_grad();
      const Tensor out = net.forward(inputs, nullptr, &tape);
      const Tensor mu = out.slice_cols(0, d);
      const Tensor logvar = out.slice_cols(d, 2 * d);
      const HeadLoss loss = student.mean_only()
                                ? mean_only_loss(student, teacher, mu, inputs, batch, sampler, sample_rng)
                                : full_distribution_loss(student, teacher, mu, logvar, inputs, batch, sampler, sample_rng);
      if (!std::isfinite(loss.value)) throw TrainingError("student training diverged", step);
      net.backward(tape, to_output_loss(loss));
      sgd.step(net);
      ++step;
      sum += loss.value * static_cast<double>(rows.size());
    }
    losses[epoch] = sum / static_cast<double>(data.size());
  }
  net.set_mode(Mode::eval);
  if (epoch_losses) *epoch_losses = std::move(losses);
  return student;
}

DistParams student_predict(const StudentModel& student, const Tensor& x) {
  const Tensor out = student.net().forward(x);
  const std::size_t d = student.output_dim();
  return {out.slice_cols(0, d), out.slice_cols(d, 2 * d)};
}

Tensor predictive_variance(const StudentModel& student, const DistParams& params) {
  student.require_distribution("predictive_variance");
  Tensor var = params.logvar;
  for (double& v : var.data()) v = std::exp(v);
  return var;
}

LogitUncertainty student_classification_uncertainty(std::span<const double> mu, std::span<const double> logvar,
                                                    std::size_t samples, Rng& rng) {
  if (samples < 2) throw ContractError("student_classification_uncertainty: need at least 2 samples");
  if (mu.size() != logvar.size() || mu.empty()) throw DimensionError("mu and logvar must have equal nonzero length");
  const std::size_t k = mu.size();
  Tensor probs({samples, k});
  for (std::size_t t = 0; t < samples; ++t) {
    auto row = probs.row(t);
    for (std::size_t j = 0; j < k; ++j) row[j] = mu[j] + std::exp(0.5 * logvar[j]) * rng.normal();
    softmax_inplace(row);
  }
  LogitUncertainty out{std::vector<double>(k, 0.0), bald(probs)};
  for (std::size_t t = 0; t < samples; ++t)
    for (std::size_t j = 0; j < k; ++j) out.mean_probs[j] += probs(t, j) / static_cast<double>(samples);
  return out;
}

BatchLogitUncertainty student_classification_uncertainty(const StudentModel& student, const DistParams& params,
                                                         std::size_t samples, Rng& rng) {
  if (student.task() != Task::classification) throw ContractError("logit uncertainty needs a classification student");
  student.require_distribution("student_classification_uncertainty");
  BatchLogitUncertainty out{Tensor(params.mu.shape()), {}};
  for (std::size_t i = 0; i < params.mu.rows(); ++i) {
    LogitUncertainty u = student_classification_uncertainty(params.mu.row(i), params.logvar.row(i), samples, rng);
    std::copy(u.mean_probs.begin(), u.mean_probs.end(), out.mean_probs.row(i).begin());
    out.bald.push_back(u.bald);
  }
  return out;
}

}  // namespace distillnn

#include "distillnn/teacher.hpp"

#include <cmath>

#include "batching.hpp"
#include "distillnn/errors.hpp"
#include "distillnn/losses.hpp"
#include "distillnn/optimizer.hpp"

namespace distillnn {

std::string to_string(TeacherKind kind) { return kind == TeacherKind::mc_dropout ? "mc_dropout" : "ensemble"; }

TeacherKind parse_teacher_kind(const std::string& text) {
  if (text == "mc_dropout") return TeacherKind::mc_dropout;
  if (text == "ensemble") return TeacherKind::ensemble;
  throw ContractError("unknown teacher kind '" + text + "'");
}

void TeacherConfig::validate() const {
  if (kind == TeacherKind::ensemble && ensemble_size < 2) throw ContractError("ensemble_size must be >= 2");
  if (kind == TeacherKind::mc_dropout && !(dropout_rate > 0.0 && dropout_rate < 1.0))
    throw ContractError("dropout_rate must lie in (0, 1) for an MC-dropout teacher");
  if (eval_samples < 2) throw ContractError("eval_samples must be >= 2");
  if (hidden.empty()) throw ContractError("teacher needs at least one hidden layer");
  if (train.epochs == 0 || train.batch_size == 0) throw ContractError("epochs and batch_size must be >= 1");
  if (aleatoric_head && logit_noise_draws == 0) throw ContractError("logit_noise_draws must be >= 1");
}

TeacherModel::TeacherModel(TeacherConfig config, Task task, std::size_t output_dim, std::vector<MlpModel> members)
    : config_(std::move(config)), task_(task), output_dim_(output_dim), members_(std::move(members)) {
  if (members_.empty()) throw ContractError("teacher needs at least one member");
  const std::size_t width = output_dim_ * (config_.aleatoric_head ? 2 : 1);
  for (MlpModel& m : members_) {
    if (m.output_dim() != width)
      throw DimensionError("teacher member emits " + std::to_string(m.output_dim()) + " values, expected " +
                           std::to_string(width));
    if (m.input_dim() != members_.front().input_dim() || m.layers().size() != members_.front().layers().size())
      throw DimensionError("ensemble members must share one architecture");
    m.set_mode(Mode::eval);
    m.set_mc_dropout(false);
  }
}

std::size_t TeacherModel::default_samples() const { return is_ensemble() ? members_.size() : config_.eval_samples; }

Tensor TeacherModel::deterministic_forward(const Tensor& x, std::size_t member) const {
  if (member >= members_.size()) throw ContractError("member index out of range");
  return members_[member].forward(x);
}

PredictiveSampleSet BatchSamples::at(std::size_t input) const {
  const std::size_t t = count(), d = dim();
  PredictiveSampleSet out{Tensor({t, d}), has_logvar() ? Tensor({t, d}) : Tensor()};
  for (std::size_t s = 0; s < t; ++s)
    for (std::size_t j = 0; j < d; ++j) {
      out.mu(s, j) = mu[s](input, j);
      if (has_logvar()) out.logvar(s, j) = logvar[s](input, j);
    }
  return out;
}

namespace {

struct StepLoss {
  double value;
  Loss output_loss;
};

StepLoss teacher_step_loss(const TeacherConfig& config, const Tensor& output, const TrainingData& batch,
                           std::size_t out_dim, Rng& noise_rng) {
  if (!config.aleatoric_head) {
    Loss l = batch.task == Task::regression ? mean_absolute_error(output, batch.targets)
                                            : softmax_cross_entropy(output, batch.labels);
    return {l.value, std::move(l)};
  }
  const Tensor mu = output.slice_cols(0, out_dim);
  const Tensor logvar = output.slice_cols(out_dim, 2 * out_dim);
  HeadLoss h = batch.task == Task::regression
                   ? heteroscedastic_laplace_nll(mu, logvar, batch.targets)
                   : logit_noise_cross_entropy(mu, logvar, batch.labels, config.logit_noise_draws, noise_rng);
  return {h.value, to_output_loss(h)};
}

MlpModel train_member(const TeacherConfig& config, const TrainingData& data, Rng& init_rng, Rng& dropout_rng,
                      double dropout_rate, std::vector<double>& epoch_losses, std::size_t& global_step) {
  Rng init = init_rng.split("init");
  Rng order = init_rng.split("order");
  Rng dropout = dropout_rng.split("dropout");
  Rng noise = dropout_rng.split("logit-noise");

  const std::size_t out_dim = data.output_dim();
  const std::size_t width = out_dim * (config.aleatoric_head ? 2 : 1);
  MlpModel model = MlpModel::make(data.inputs.cols(), config.hidden, width, dropout_rate, init);
  model.set_mode(Mode::train);

  const std::size_t per_epoch = detail::batches_per_epoch(data.size(), config.train.batch_size);
  SgdConfig sgd_cfg{config.train.learning_rate, config.train.momentum, config.train.weight_decay,
                    config.train.epochs * per_epoch, config.train.poly_power, config.train.max_grad_norm};
  Sgd sgd(sgd_cfg, model);

  epoch_losses.assign(config.train.epochs, 0.0);
  Tape tape;
  for (std::size_t epoch = 0; epoch < config.train.epochs; ++epoch) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& rows : detail::epoch_batches(data.size(), config.train.batch_size, order)) {
      const TrainingData batch = data.subset(rows);
      model.zero_grad();
      const Tensor output = model.forward(batch.inputs, &dropout, &tape);
      StepLoss loss = teacher_step_loss(config, output, batch, out_dim, noise);
      if (!std::isfinite(loss.value)) throw TrainingError("teacher training diverged", global_step);
      model.backward(tape, loss.output_loss);
      sgd.step(model);
      ++global_step;
      sum += loss.value * static_cast<double>(rows.size());
      count += rows.size();
    }
    epoch_losses[epoch] = sum / static_cast<double>(count);
  }
  model.set_mode(Mode::eval);
  return model;
}

}  // namespace

TeacherModel train_teacher(const TeacherConfig& config, const TrainingData& data, Rng& rng,
                           std::vector<double>* epoch_losses) {
  return train_teacher(config, data, rng, rng, epoch_losses);
}

TeacherModel train_teacher(const TeacherConfig& config, const TrainingData& data, Rng& init_rng, Rng& dropout_rng,
                           std::vector<double>* epoch_losses) {
  config.validate();
  if (data.size() == 0) throw ContractError("train_teacher: empty dataset");
  const std::size_t members = config.kind == TeacherKind::ensemble ? config.ensemble_size : 1;
  const double rate = config.kind == TeacherKind::mc_dropout ? config.dropout_rate : 0.0;

  std::vector<MlpModel> trained;
  std::vector<double> mean_losses(config.train.epochs, 0.0);
  std::size_t global_step = 0;
  for (std::size_t i = 0; i < members; ++i) {
    Rng member_init = init_rng.split(static_cast<std::uint64_t>(i));
    Rng member_dropout = dropout_rng.split(static_cast<std::uint64_t>(i));
    std::vector<double> losses;
    trained.push_back(train_member(config, data, member_init, member_dropout, rate, losses, global_step));
    for (std::size_t e = 0; e < losses.size(); ++e) mean_losses[e] += losses[e] / static_cast<double>(members);
  }
  if (epoch_losses) *epoch_losses = std::move(mean_losses);
  return TeacherModel(config, data.task, data.output_dim(), std::move(trained));
}

BatchSamples mc_predict(const TeacherModel& teacher, const Tensor& x, std::size_t samples, Rng& rng) {
  if (samples == 0) throw ContractError("mc_predict: need at least one sample");
  if (teacher.is_ensemble() && samples > teacher.size())
    throw ContractError("mc_predict: an ensemble of " + std::to_string(teacher.size()) + " cannot give " +
                        std::to_string(samples) + " samples");
  const std::size_t d = teacher.output_dim();
  BatchSamples out;
  auto record = [&](Tensor raw) {
    if (teacher.has_head()) {
      out.mu.push_back(raw.slice_cols(0, d));
      out.logvar.push_back(raw.slice_cols(d, 2 * d));
    } else {
      out.mu.push_back(std::move(raw));
    }
  };
  if (teacher.is_ensemble()) {
    for (std::size_t t = 0; t < samples; ++t) record(teacher.members()[t].forward(x));
  } else {
    MlpModel sampler = teacher.members().front();
    sampler.set_mc_dropout(true);
    for (std::size_t t = 0; t < samples; ++t) record(sampler.forward(x, &rng));
  }
  return out;
}

BatchSamples mc_predict(const TeacherModel& teacher, const Tensor& x, Rng& rng) {
  return mc_predict(teacher, x, teacher.default_samples(), rng);
}

std::vector<double> classification_mean(const PredictiveSampleSet& samples) {
  if (samples.count() == 0) throw ContractError("classification_mean: empty sample set");
  const Tensor probs = softmax_rows(samples.mu);
  std::vector<double> mean(samples.dim(), 0.0);
  const double inv = 1.0 / static_cast<double>(samples.count());
  for (std::size_t t = 0; t < samples.count(); ++t)
    for (std::size_t j = 0; j < samples.dim(); ++j) mean[j] += probs(t, j) * inv;
  return mean;
}

Tensor classification_mean(const BatchSamples& samples) {
  if (samples.count() == 0) throw ContractError("classification_mean: empty sample set");
  Tensor mean({samples.inputs(), samples.dim()});
  const double inv = 1.0 / static_cast<double>(samples.count());
  for (const Tensor& logits : samples.mu) {
    const Tensor probs = softmax_rows(logits);
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += probs[i] * inv;
  }
  return mean;
}

}  // namespace distillnn

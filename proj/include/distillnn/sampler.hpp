#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>

#include "distillnn/rng.hpp"
#include "distillnn/teacher.hpp"
#include "distillnn/tensor.hpp"

namespace distillnn {

/// Distribution of the unit-variance noise eps injected into targets.
enum class NoiseKind { gaussian, laplace };
std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& text);

struct SamplerConfig {
  /// Teacher predictive samples per input per epoch.
  std::size_t m = 5;
  /// Noise draws per predictive sample (aleatoric teachers only).
  std::size_t k = 10;
  /// Share one averaged noise variance across all samples of an input.
  bool use_sigma_tilde = true;
  /// Teacher passes used to average the noise variance.
  std::size_t sigma_samples = 50;
  NoiseKind noise = NoiseKind::gaussian;

  void validate(bool teacher_has_head) const;
};

/// Distillation targets: shape (N, M, D), M = m*k with noise injection and m otherwise.
struct SampleBatch {
  Tensor targets;

  std::size_t inputs() const { return targets.rank() == 3 ? targets.shape()[0] : 0; }
  std::size_t samples() const { return targets.rank() == 3 ? targets.shape()[1] : 0; }
  std::size_t dim() const { return targets.rank() == 3 ? targets.shape()[2] : 0; }
  double at(std::size_t input, std::size_t sample, std::size_t d) const {
    return targets[(input * samples() + sample) * dim() + d];
  }
};

using NoiseSource = std::function<double()>;

/// Zero-mean, unit-variance draws of the given kind.
double draw_noise(NoiseKind kind, Rng& rng);

/// Elementwise mean of exp(s_t) over the samples: (N, D).
Tensor sigma_tilde_from(const BatchSamples& samples);

/// Mean of exp(s_t) over `samples` fresh teacher draws (all members for an ensemble).
Tensor estimate_sigma_tilde(const TeacherModel& teacher, const Tensor& x, std::size_t samples, Rng& rng);

/// Builds targets from the first `m` predictive samples. With a head, each sample
/// yields `k` targets mu_t + sigma * eps, where sigma is sqrt(noise_variance) when
/// given and exp(s_t / 2) otherwise. eps comes from `noise`.
SampleBatch targets_from_samples(const BatchSamples& samples, std::size_t m, std::size_t k,
                                 const Tensor* noise_variance, const NoiseSource& noise);

/// Fresh distillation targets for a batch of inputs.
SampleBatch draw_targets(const TeacherModel& teacher, const Tensor& x, const SamplerConfig& config, Rng& rng);

/// CSV dump: input_id,sample,d0,d1,...
void write_csv(const std::filesystem::path& path, const SampleBatch& batch, std::size_t first_input_id = 0);

}  // namespace distillnn

#include "distillnn/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "distillnn/errors.hpp"
#include "distillnn/kvtext.hpp"

namespace distillnn {

std::string to_string(NoiseKind kind) { return kind == NoiseKind::gaussian ? "gaussian" : "laplace"; }

NoiseKind parse_noise_kind(const std::string& text) {
  if (text == "gaussian") return NoiseKind::gaussian;
  if (text == "laplace") return NoiseKind::laplace;
  throw ContractError("unknown noise kind '" + text + "'");
}

double draw_noise(NoiseKind kind, Rng& rng) {
  if (kind == NoiseKind::gaussian) return rng.normal();
  // Laplace with b = 1/sqrt(2) by inversion.
  const double u = rng.uniform() - 0.5;
  const double mag = -std::log(std::max(1.0 - 2.0 * std::abs(u), 0x1.0p-53));
  return (u < 0.0 ? -mag : mag) / std::numbers::sqrt2;
}

void SamplerConfig::validate(bool teacher_has_head) const {
  if (m == 0) throw ContractError("sampler m must be >= 1");
  if (teacher_has_head && k == 0) throw ContractError("sampler k must be >= 1 with an aleatoric teacher");
  if (teacher_has_head && use_sigma_tilde && sigma_samples == 0)
    throw ContractError("sampler sigma_samples must be >= 1");
}

Tensor sigma_tilde_from(const BatchSamples& samples) {
  if (!samples.has_logvar()) throw ContractError("noise variance needs a teacher with an aleatoric head");
  if (samples.count() == 0) throw ContractError("noise variance needs at least one sample");
  Tensor out({samples.inputs(), samples.dim()});
  const double inv = 1.0 / static_cast<double>(samples.count());
  for (const Tensor& s : samples.logvar)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += std::exp(s[i]) * inv;
  return out;
}

Tensor estimate_sigma_tilde(const TeacherModel& teacher, const Tensor& x, std::size_t samples, Rng& rng) {
  if (!teacher.has_head()) throw ContractError("estimate_sigma_tilde: teacher has no aleatoric head");
  const std::size_t count = teacher.is_ensemble() ? teacher.size() : samples;
  return sigma_tilde_from(mc_predict(teacher, x, count, rng));
}

SampleBatch targets_from_samples(const BatchSamples& samples, std::size_t m, std::size_t k,
                                 const Tensor* noise_variance, const NoiseSource& noise) {
  if (m == 0 || m > samples.count()) throw ContractError("targets_from_samples: m out of range");
  const std::size_t n = samples.inputs(), d = samples.dim();
  const bool inject = samples.has_logvar();
  if (inject && k == 0) throw ContractError("targets_from_samples: k must be >= 1");
  if (noise_variance && (noise_variance->rows() != n || noise_variance->cols() != d))
    throw DimensionError("noise variance shape does not match samples");
  const std::size_t per = inject ? k : 1;
  SampleBatch out{Tensor({n, m * per, d})};
  const std::size_t total = m * per;
  for (std::size_t t = 0; t < m; ++t) {
    for (std::size_t r = 0; r < per; ++r) {
      const std::size_t sample = t * per + r;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
          double value = samples.mu[t](i, j);
          if (inject) {
            const double var = noise_variance ? (*noise_variance)(i, j) : std::exp(samples.logvar[t](i, j));
            value += std::sqrt(var) * noise();
          }
          out.targets[(i * total + sample) * d + j] = value;
        }
    }
  }
  return out;
}

SampleBatch draw_targets(const TeacherModel& teacher, const Tensor& x, const SamplerConfig& config, Rng& rng) {
  config.validate(teacher.has_head());
  // Ensemble members are deterministic: every member is one fixed sample.
  const std::size_t m = teacher.is_ensemble() ? std::min(config.m, teacher.size()) : config.m;
  const bool shared_noise = teacher.has_head() && config.use_sigma_tilde;
  std::size_t passes = m;
  if (teacher.is_ensemble() && shared_noise) passes = teacher.size();
  else if (shared_noise) passes = std::max(m, config.sigma_samples);

  const BatchSamples samples = mc_predict(teacher, x, passes, rng);
  Tensor variance;
  if (shared_noise) variance = sigma_tilde_from(samples);
  return targets_from_samples(samples, m, config.k, shared_noise ? &variance : nullptr,
                              [&]() { return draw_noise(config.noise, rng); });
}

void write_csv(const std::filesystem::path& path, const SampleBatch& batch, std::size_t first_input_id) {
  std::string out = "input_id,sample";
  for (std::size_t j = 0; j < batch.dim(); ++j) out += ",d" + std::to_string(j);
  out += "\n";
  for (std::size_t i = 0; i < batch.inputs(); ++i)
    for (std::size_t t = 0; t < batch.samples(); ++t) {
      out += std::to_string(first_input_id + i) + "," + std::to_string(t);
      for (std::size_t j = 0; j < batch.dim(); ++j) out += "," + format_double(batch.at(i, t, j));
      out += "\n";
    }
  write_file_atomic(path, out);
}

}  // namespace distillnn

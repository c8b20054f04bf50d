#include <doctest.h>

#include <cmath>

#include "distillnn/errors.hpp"
#include "distillnn/sampler.hpp"
#include "support.hpp"

using namespace distillnn;

namespace {

BatchSamples one_input(std::vector<double> mu, std::vector<double> var) {
  BatchSamples s;
  for (double m : mu) s.mu.push_back(Tensor::matrix(1, 1, {m}));
  for (double v : var) s.logvar.push_back(Tensor::matrix(1, 1, {std::log(v)}));
  return s;
}

TeacherModel tiny_teacher(double rate, bool head) {
  TeacherConfig config;
  config.dropout_rate = rate;
  config.aleatoric_head = head;
  config.hidden = {6};
  Rng init(3);
  std::vector<MlpModel> members;
  members.push_back(MlpModel::make(1, config.hidden, head ? 2 : 1, rate, init));
  return TeacherModel(config, Task::regression, 1, std::move(members));
}

}  // namespace

TEST_CASE("sigma tilde averages the sampled variances") {
  CHECK(sigma_tilde_from(one_input({0, 0}, {0.5, 1.5}))[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(sigma_tilde_from(one_input({0, 1, 2}, {0.3, 0.3, 0.3}))[0] == doctest::Approx(0.3).epsilon(1e-14));

  const TeacherModel t = tiny_teacher(0.0, true);
  Rng xr(1), rng(2);
  const Tensor x = testing::random_matrix(4, 1, xr);
  const Tensor st = estimate_sigma_tilde(t, x, 10, rng);
  const Tensor det = t.deterministic_forward(x);
  for (std::size_t i = 0; i < 4; ++i) CHECK(st[i] == doctest::Approx(std::exp(det(i, 1))).epsilon(1e-12));
}

TEST_CASE("target construction") {
  SUBCASE("zero noise returns the sampled means") {
    const BatchSamples s = one_input({1.0, -2.0}, {3.0, 0.1});
    const SampleBatch b = targets_from_samples(s, 2, 3, nullptr, [] { return 0.0; });
    REQUIRE(b.samples() == 6);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(b.at(0, j, 0) == 1.0);
      CHECK(b.at(0, 3 + j, 0) == -2.0);
    }
  }
  SUBCASE("mean 1, sigma tilde 2, eps 0.5") {
    const BatchSamples s = one_input({1.0}, {99.0});
    const Tensor var = Tensor::matrix(1, 1, {4.0});
    const SampleBatch b = targets_from_samples(s, 1, 1, &var, [] { return 0.5; });
    CHECK(b.at(0, 0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  }
  SUBCASE("default m and k give 50 targets per input") {
    const TeacherModel t = tiny_teacher(0.2, true);
    Rng xr(1), rng(2);
    const SampleBatch b = draw_targets(t, testing::random_matrix(3, 1, xr), SamplerConfig{}, rng);
    CHECK(b.inputs() == 3);
    CHECK(b.samples() == 50);
    CHECK(b.dim() == 1);
  }
  SUBCASE("no head means m raw samples") {
    const TeacherModel t = tiny_teacher(0.2, false);
    Rng xr(1), rng(2);
    const SampleBatch b = draw_targets(t, testing::random_matrix(3, 1, xr), SamplerConfig{}, rng);
    CHECK(b.samples() == 5);
  }
  SUBCASE("bad configs") {
    SamplerConfig c;
    c.m = 0;
    CHECK_THROWS_AS(c.validate(true), ContractError);
    c = {};
    c.sigma_samples = 0;
    CHECK_THROWS_AS(c.validate(true), ContractError);
  }
}

TEST_CASE("injected targets have the predictive moments") {
  // One input, m sampled means with variances v_t. With sigma tilde the targets
  // have mean mean(mu) and variance var(mu) + mean(v).
  const std::vector<double> mu = {0.4, -0.3, 1.1, 0.2, 0.6};
  const std::vector<double> v = {0.5, 0.2, 0.9, 0.4, 1.0};
  const BatchSamples s = one_input(mu, v);
  const Tensor tilde = sigma_tilde_from(s);
  double mean_mu = 0.0, mean_v = 0.0, mean_mu2 = 0.0;
  for (std::size_t t = 0; t < mu.size(); ++t) {
    mean_mu += mu[t] / 5;
    mean_mu2 += mu[t] * mu[t] / 5;
    mean_v += v[t] / 5;
  }
  const double expected_var = mean_mu2 - mean_mu * mean_mu + mean_v;

  for (NoiseKind kind : {NoiseKind::gaussian, NoiseKind::laplace}) {
    CAPTURE(to_string(kind));
    Rng rng(17);
    const std::size_t k = 40000;
    const SampleBatch b = targets_from_samples(s, 5, k, &tilde, [&] { return draw_noise(kind, rng); });
    const double n = static_cast<double>(b.samples());
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < b.samples(); ++j) {
      m1 += b.at(0, j, 0);
      m2 += b.at(0, j, 0) * b.at(0, j, 0);
    }
    m1 /= n;
    const double var = m2 / n - m1 * m1;
    const double sd = std::sqrt(expected_var);
    CHECK(std::abs(m1 - mean_mu) < 3 * sd / std::sqrt(n));
    // Standard error of a sample variance is about var * sqrt(kurtosis - 1) / sqrt(n).
    const double kurt = kind == NoiseKind::gaussian ? 3.0 : 6.0;
    CHECK(std::abs(var - expected_var) < 3 * expected_var * std::sqrt(kurt - 1) / std::sqrt(n));
  }
}

TEST_CASE("noise draws are unit variance") {
  for (NoiseKind kind : {NoiseKind::gaussian, NoiseKind::laplace}) {
    Rng rng(5);
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = draw_noise(kind, rng);
      REQUIRE(std::isfinite(e));
      s1 += e;
      s2 += e * e;
    }
    CHECK(std::abs(s1 / n) < 3.0 / std::sqrt(n));
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.02));
  }
  CHECK(parse_noise_kind("laplace") == NoiseKind::laplace);
  CHECK_THROWS_AS(parse_noise_kind("cauchy"), ContractError);
}

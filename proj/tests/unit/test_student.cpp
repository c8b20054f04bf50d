#include <doctest.h>

#include <cmath>
#include <numeric>

#include "distillnn/errors.hpp"
#include "distillnn/losses.hpp"
#include "distillnn/student.hpp"
#include "support.hpp"

using namespace distillnn;

namespace {

DistParams params1(double mu, double s) { return {Tensor::matrix(1, 1, {mu}), Tensor::matrix(1, 1, {s})}; }

SampleBatch batch1(std::vector<double> targets) {
  const std::size_t m = targets.size();
  return {Tensor({1, m, 1}, std::move(targets))};
}

TeacherModel quick_teacher(Task task, std::uint64_t seed) {
  TeacherConfig config;
  config.hidden = {16, 16};
  config.train.epochs = 15;
  const TrainingData data =
      task == Task::regression ? to_training_data(gen_regression(300, {SplitKind::train, {}, seed}))
                               : to_training_data(gen_classification(300, 3, {SplitKind::train, {}, seed}));
  Rng rng(seed);
  return train_teacher(config, data, rng);
}

}  // namespace

TEST_CASE("regression distillation loss values") {
  CHECK(student_loss_regression(params1(0.5, 0.0), batch1({0.5, 0.5})) == 0.0);
  CHECK(student_loss_regression(params1(0.0, 0.0), batch1({1.0})) == doctest::Approx(1.41421356).epsilon(1e-8));
  CHECK(student_loss_regression(params1(0.0, 2 * std::log(2.0)), batch1({1.0})) ==
        doctest::Approx(std::sqrt(2.0) / 2 + std::log(2.0)).epsilon(1e-14));
  CHECK(student_loss_regression(params1(0.0, 2 * std::log(2.0)), batch1({1.0})) ==
        doctest::Approx(1.40025).epsilon(1e-5));
}

TEST_CASE("classification distillation loss values") {
  CHECK(student_loss_classification(params1(0.3, 0.0), batch1({0.3})) == 0.0);
  CHECK(student_loss_classification(params1(0.0, 0.0), batch1({std::sqrt(2.0)})) ==
        doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("loss minimizers") {
  const std::vector<double> targets = {-0.7, 0.1, 0.4, 1.9, 2.5};
  // Regression: mu* is the median, then s* = 2 ln(sqrt(2) mean|r|).
  // Classification: mu* is the mean, then s* = ln(mean r^2).
  // Coarse grid, then golden-section refinement inside the best cell.
  auto grid_min = [](auto f, double lo, double hi, std::size_t n) {
    const double step = (hi - lo) / static_cast<double>(n);
    double best = lo, best_v = f(lo);
    for (std::size_t i = 1; i <= n; ++i) {
      const double x = lo + step * static_cast<double>(i);
      if (const double v = f(x); v < best_v) best = x, best_v = v;
    }
    const double g = (std::sqrt(5.0) - 1) / 2;
    double a = best - step, c = best + step;
    while (c - a > 1e-10) {
      const double x1 = c - g * (c - a), x2 = a + g * (c - a);
      if (f(x1) < f(x2))
        c = x2;
      else
        a = x1;
    }
    return (a + c) / 2;
  };
  const SampleBatch b = batch1(targets);
  const double mu_reg = grid_min([&](double mu) { return student_loss_regression(params1(mu, 0.0), b); }, -1, 3, 400);
  CHECK(std::abs(mu_reg - 0.4) < 1e-3);
  double mean_abs = 0.0;
  for (double t : targets) mean_abs += std::abs(t - 0.4) / 5;
  const double s_reg = grid_min([&](double s) { return student_loss_regression(params1(0.4, s), b); }, -4, 4, 800);
  CHECK(std::abs(s_reg - 2 * std::log(std::sqrt(2.0) * mean_abs)) < 1e-3);

  const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / 5;
  double mean_sq = 0.0;
  for (double t : targets) mean_sq += (t - mean) * (t - mean) / 5;
  const double mu_cls =
      grid_min([&](double mu) { return student_loss_classification(params1(mu, 0.0), b); }, -1, 3, 400);
  CHECK(std::abs(mu_cls - mean) < 1e-6);
  const double s_cls =
      grid_min([&](double s) { return student_loss_classification(params1(mean, s), b); }, -4, 4, 800);
  CHECK(std::abs(s_cls - std::log(mean_sq)) < 1e-6);
}

TEST_CASE("total loss combination") {
  CHECK(total_loss(0.5, 0.0, 0.3) == 0.5);
  CHECK(total_loss(0.5, 1.0, 0.3) == doctest::Approx(0.8));
  CHECK(StudentConfig{}.lambda == 1.0);
  StudentConfig bad;
  bad.lambda = -1.0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("student built from a teacher") {
  const TeacherModel teacher = quick_teacher(Task::regression, 4);
  Rng init(1);
  const StudentModel student = make_student(teacher, StudentConfig{}, init);
  CHECK_FALSE(student.net().has_dropout());
  CHECK(student.net().output_dim() == 2);
  Rng xr(2);
  const Tensor x = testing::random_matrix(8, 1, xr);
  const DistParams p = student_predict(student, x);
  const Tensor det = teacher.deterministic_forward(x);
  for (std::size_t i = 0; i < 8; ++i) CHECK(p.mu[i] == doctest::Approx(det(i, 0)).epsilon(1e-14));

  const DistParams again = student_predict(student, x);
  CHECK(again.mu.values() == p.mu.values());
  CHECK(again.logvar.values() == p.logvar.values());
  CHECK(p.mu.shape() == std::vector<std::size_t>{8, 1});
  CHECK(p.logvar.shape() == std::vector<std::size_t>{8, 1});
}

TEST_CASE("short distillation lowers the loss and is reproducible") {
  const TeacherModel teacher = quick_teacher(Task::regression, 4);
  const TrainingData data = to_training_data(gen_regression(300, {SplitKind::train, {}, 4}));
  StudentConfig config = StudentConfig::derived_from(teacher.config());
  config.train.epochs = 12;
  Rng a(8), b(8);
  std::vector<double> la, lb;
  const StudentModel sa = train_student(teacher, data, config, SamplerConfig{}, a, &la);
  const StudentModel sb = train_student(teacher, data, config, SamplerConfig{}, b, &lb);
  CHECK(la.back() < la.front());
  CHECK(la == lb);
  CHECK(sa.net().flat_parameters() == sb.net().flat_parameters());
  CHECK(config.train.learning_rate == doctest::Approx(teacher.config().train.learning_rate / 2));
}

TEST_CASE("dd students refuse distribution queries") {
  const TeacherModel teacher = quick_teacher(Task::regression, 4);
  const TrainingData data = to_training_data(gen_regression(100, {SplitKind::train, {}, 4}));
  StudentConfig config;
  config.mode = StudentMode::mean_only_dd;
  config.train.epochs = 2;
  Rng rng(1);
  const StudentModel s = train_student(teacher, data, config, SamplerConfig{}, rng);
  CHECK(s.mean_only());
  const DistParams p = student_predict(s, data.inputs);
  CHECK_THROWS_AS(predictive_variance(s, p), ContractError);
  CHECK(parse_student_mode("dd") == StudentMode::mean_only_dd);
  CHECK(parse_student_mode("full") == StudentMode::full_distribution);
}

TEST_CASE("logit-space uncertainty") {
  Rng rng(3);
  const std::vector<double> mu = {1.0, -0.5, 0.2};
  const std::vector<double> tight = {-40, -40, -40};
  const LogitUncertainty u = student_classification_uncertainty(mu, tight, 50, rng);
  const Tensor soft = softmax_rows(Tensor::matrix(1, 3, mu));
  for (std::size_t k = 0; k < 3; ++k) CHECK(u.mean_probs[k] == doctest::Approx(soft[k]).epsilon(1e-8));
  CHECK(u.bald == doctest::Approx(0.0).epsilon(1e-8));

  const std::vector<double> wide = {1.0, 1.0, 1.0};
  const LogitUncertainty w = student_classification_uncertainty(mu, wide, 50, rng);
  CHECK(std::accumulate(w.mean_probs.begin(), w.mean_probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(w.bald > 0.0);
}

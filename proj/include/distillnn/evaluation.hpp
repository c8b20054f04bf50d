#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "distillnn/datasets.hpp"
#include "distillnn/kvtext.hpp"
#include "distillnn/metrics.hpp"
#include "distillnn/rng.hpp"
#include "distillnn/sampler.hpp"
#include "distillnn/student.hpp"
#include "distillnn/teacher.hpp"

namespace distillnn {

struct EvalOptions {
  /// MC passes for a dropout teacher; ensembles always use every member.
  std::size_t teacher_samples = 50;
  /// Logit-space draws for a classification student.
  std::size_t logit_samples = 50;
  std::size_t reliability_bins = 10;
  std::size_t coverage_levels = 30;
  /// Noise used to turn teacher samples into an empirical predictive CDF.
  NoiseKind teacher_cdf_noise = NoiseKind::gaussian;
  bool measure_timing = true;
  std::size_t timing_warmup = 3;
  std::size_t timing_repeats = 20;
};

struct EvalReport {
  std::string role;  // "teacher" or "student"
  std::string model;  // mc_dropout, ensemble, full, dd
  Task task = Task::regression;
  std::size_t count = 0;
  std::size_t samples = 0;

  std::optional<RegressionMetrics> regression;
  std::optional<ClassificationMetrics> classification;

  /// Classification: reliability ECE; regression: coverage ECE.
  std::optional<double> ece;
  std::optional<double> ause;
  bool ause_degenerate = false;
  /// What ranked the predictions for AUSE, e.g. total_variance or bald.
  std::string uncertainty_measure;
  std::string ause_error;
  /// Classification only: AUSE ranked by the entropy of the mean probabilities.
  std::optional<double> ause_entropy;

  std::optional<double> mean_epistemic;
  std::optional<double> mean_aleatoric;
  std::optional<double> mean_total;
  std::optional<double> mean_bald;

  /// Median seconds per inference call over the whole evaluation set.
  std::optional<double> inference_seconds;
  std::vector<std::string> warnings;

  /// Flat key=value form. Missing metrics are written as "unavailable".
  KeyValues to_key_values() const;
};

struct EvalCurves {
  SparsificationCurve sparsification;
  std::optional<ReliabilityDiagram> reliability;
  std::optional<CoverageCurve> coverage;
};

struct Evaluation {
  EvalReport report;
  EvalCurves curves;
  /// Per-element uncertainty used for AUSE (empty when unavailable).
  std::vector<double> uncertainty;
  /// Mean predictive output: regression means or class probabilities, (N, D).
  Tensor prediction;
};

Evaluation evaluate_teacher(const TeacherModel& teacher, const TrainingData& data, const EvalOptions& options, Rng& rng);
Evaluation evaluate_student(const StudentModel& student, const TrainingData& data, const EvalOptions& options, Rng& rng);

/// Writes <prefix>sparsification.csv plus <prefix>reliability.csv or <prefix>coverage.csv into `dir`.
/// Returns the files written.
std::vector<std::filesystem::path> write_curves(const std::filesystem::path& dir, const EvalCurves& curves,
                                                const std::string& prefix = "");

/// Median wall-clock seconds of `repeats` calls after `warmup` discarded calls.
template <class F>
double median_seconds(F&& call, std::size_t warmup, std::size_t repeats) {
  for (std::size_t i = 0; i < warmup; ++i) call();
  std::vector<double> times;
  for (std::size_t i = 0; i < std::max<std::size_t>(repeats, 1); ++i) {
    const auto start = std::chrono::steady_clock::now();
    call();
    times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  return n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
}

// Outlier separation from per-input BALD.

std::vector<double> teacher_bald(const TeacherModel& teacher, const Tensor& x, std::size_t samples, Rng& rng);
/// Full students sample the logit Gaussian; mean-only students have no spread and return zeros.
std::vector<double> student_bald(const StudentModel& student, const Tensor& x, std::size_t samples, Rng& rng);

struct OutlierSeparation {
  double js = 0.0;
  double mean_inlier = 0.0;
  double mean_outlier = 0.0;
  /// mean_outlier / mean_inlier (infinite when the inlier mean is 0).
  double relative_mean = 0.0;
  std::size_t inliers = 0;
  std::size_t outliers = 0;
};

/// Splits `bald` by whether the label is held out. Throws ContractError when either side is empty.
OutlierSeparation outlier_separation(const std::vector<double>& bald, std::span<const int> labels,
                                     const std::set<int>& held_out, std::size_t bins = 50);

}  // namespace distillnn

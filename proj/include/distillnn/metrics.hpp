#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "distillnn/teacher.hpp"
#include "distillnn/tensor.hpp"

namespace distillnn {

// Uncertainty decomposition over predictive samples.

/// Divide-by-T variance of the mean samples per output dim, clamped at 0.
std::vector<double> epistemic_variance(const PredictiveSampleSet& samples);
/// Mean of exp(s_t) per output dim.
std::vector<double> aleatoric_variance(const PredictiveSampleSet& samples);
/// epistemic_variance(mu samples) + mean exp(s_t). Requires an aleatoric head.
std::vector<double> total_variance(const PredictiveSampleSet& samples);

/// Shannon entropy in nats, 0 log 0 := 0.
double entropy(std::span<const double> probs);
/// Mutual information between prediction and model (nats): entropy of the mean
/// row minus the mean row entropy. `probs` is (T, K), rows summing to 1.
double bald(const Tensor& probs);

struct SparsificationCurve {
  std::vector<double> fractions;
  std::vector<double> model_curve;
  std::vector<double> oracle_curve;
};

struct AuseResult {
  double value = 0.0;
  SparsificationCurve curve;
  /// Set when every error is zero; value is then 0.
  bool degenerate = false;
};

/// Area between the uncertainty-ranked and error-ranked sparsification curves
/// at fractions 0, 0.01, ..., 1. Ties keep the original order.
AuseResult ause(std::span<const double> errors, std::span<const double> uncertainties);

struct ReliabilityBin {
  std::size_t count = 0;
  double accuracy = 0.0;
  double confidence = 0.0;
};

struct ReliabilityDiagram {
  std::vector<ReliabilityBin> bins;
  double ece = 0.0;
};

/// Equal-width confidence bins on (0, 1]; ECE = sum_b n_b/N |acc_b - conf_b|.
ReliabilityDiagram reliability_diagram(std::span<const double> confidences, const std::vector<bool>& correct,
                                       std::size_t bins = 10);
double ece_classification(std::span<const double> confidences, const std::vector<bool>& correct);

struct CoverageCurve {
  std::vector<double> expected;  // p_j = j / levels
  std::vector<double> observed;  // q_j
  double ece = 0.0;
};

/// Coverage of CDF values F_i(y_i) at levels j/levels, j = 1..levels;
/// ECE = sqrt(mean_j (p_j - q_j)^2).
CoverageCurve coverage_curve(std::span<const double> cdf_values, std::size_t levels = 30);
double ece_regression(std::span<const double> cdf_values);

/// Laplace CDF with mean mu and scale b = exp(s/2)/sqrt(2) (variance exp(s)).
double laplace_cdf(double y, double mu, double logvar);
/// Fraction of samples <= y.
double empirical_cdf(std::span<const double> samples, double y);

/// Base-2 Jensen-Shannon distance between histograms of two samples over their joint range.
double js_distance(std::span<const double> a, std::span<const double> b, std::size_t bins = 50);

struct RegressionMetrics {
  double rmse = 0.0;
  double rel = 0.0;
  double log10 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  /// Pairs left out of REL / log10 / delta because a value was not positive.
  std::size_t excluded = 0;
};

RegressionMetrics regression_metrics(std::span<const double> predictions, std::span<const double> targets);

struct ClassificationMetrics {
  double accuracy = 0.0;
  double classwise_accuracy = 0.0;
  double mean_iou = 0.0;
  double brier = 0.0;
};

/// Brier score of one probability vector, averaged over classes.
double brier_score(std::span<const double> probs, int label);
ClassificationMetrics classification_metrics(const Tensor& probs, std::span<const int> labels);

// CSV export.
void write_csv(const std::filesystem::path& path, const SparsificationCurve& curve);
void write_csv(const std::filesystem::path& path, const ReliabilityDiagram& diagram);
void write_csv(const std::filesystem::path& path, const CoverageCurve& curve);

}  // namespace distillnn

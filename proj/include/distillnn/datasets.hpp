#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "distillnn/rng.hpp"
#include "distillnn/tensor.hpp"

namespace distillnn {

enum class Task { regression, classification };
std::string to_string(Task task);
Task parse_task(const std::string& text);

enum class SplitKind { train, test, shift, gap };
std::string to_string(SplitKind kind);
SplitKind parse_split(const std::string& text);

struct SplitSpec {
  SplitKind kind = SplitKind::train;
  /// Classification only: classes excluded from the train and shift splits.
  std::set<int> held_out_classes;
  std::uint64_t seed = 0;
};

struct RegressionDataset {
  std::vector<double> x;
  std::vector<double> y;
  /// Ground-truth noise standard deviation at each x.
  std::vector<double> true_sigma;

  std::size_t size() const { return x.size(); }
};

struct ClassificationDataset {
  std::vector<std::array<double, 2>> x;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return x.size(); }
};

// Regression: y = x sin(x) + sigma(x) eps, sigma(x) = 0.1 + 0.2 |x|.
// Train/test draw x uniformly from [-3, 3] minus the gap (-0.5, 0.5); the gap
// split samples inside the gap; the shift split samples [3, 5].
inline constexpr double kRegressionLow = -3.0;
inline constexpr double kRegressionHigh = 3.0;
inline constexpr double kGapLow = -0.5;
inline constexpr double kGapHigh = 0.5;
inline constexpr double kShiftLow = 3.0;
inline constexpr double kShiftHigh = 5.0;

double regression_mean(double x);
double regression_sigma(double x);

/// `noise_free` keeps true_sigma but sets y to the noiseless mean.
RegressionDataset gen_regression(long n, const SplitSpec& split, bool noise_free = false);

// Classification: K isotropic blobs (std 0.35) centered on the unit circle at
// angles 2 pi c / K. Shift translates every center by (1.5, 1.5).
inline constexpr double kBlobStd = 0.35;
inline constexpr double kShiftOffset = 1.5;

std::array<double, 2> blob_center(int c, int num_classes);

/// Labels cycle through the allowed classes so each appears at least once when n >= K.
/// Test split keeps held-out classes (it doubles as the outlier-evaluation split);
/// train and shift splits drop them. No gap split exists for classification.
ClassificationDataset gen_classification(long n, int num_classes, const SplitSpec& split);

/// Uniform grid on the regression training support (gap excluded).
std::vector<double> regression_support_grid(std::size_t points);

/// Task-agnostic view used by the trainers.
struct TrainingData {
  Task task = Task::regression;
  Tensor inputs;             // (N, input_dim)
  Tensor targets;            // regression: (N, output_dim)
  std::vector<int> labels;   // classification
  int num_classes = 0;

  std::size_t size() const { return inputs.rows(); }
  std::size_t output_dim() const { return task == Task::regression ? targets.cols() : static_cast<std::size_t>(num_classes); }
  TrainingData subset(std::span<const std::size_t> rows) const;
};

TrainingData to_training_data(const RegressionDataset& data);
TrainingData to_training_data(const ClassificationDataset& data);

struct AugmentationSpec {
  bool enabled = false;
  double jitter_range = 0.2;
};

/// Per-feature population standard deviation of the rows of x.
std::vector<double> feature_std(const Tensor& x);

/// Adds U(-jitter_range * scale_f, +jitter_range * scale_f) to feature f of each row
/// when enabled; returns x unchanged otherwise.
Tensor augment(const Tensor& x, const AugmentationSpec& spec, std::span<const double> feature_scale, Rng& rng);

// CSV with header row: x,y,true_sigma for regression; x0,x1,label for classification.
void write_csv(const std::filesystem::path& path, const RegressionDataset& data);
void write_csv(const std::filesystem::path& path, const ClassificationDataset& data);
RegressionDataset read_regression_csv(const std::filesystem::path& path);
ClassificationDataset read_classification_csv(const std::filesystem::path& path, int num_classes = 0);

}  // namespace distillnn

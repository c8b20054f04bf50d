#include "distillnn/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "distillnn/errors.hpp"
#include "distillnn/kvtext.hpp"

namespace distillnn {

std::string to_string(Task task) { return task == Task::regression ? "regression" : "classification"; }

Task parse_task(const std::string& text) {
  if (text == "regression") return Task::regression;
  if (text == "classification") return Task::classification;
  throw ContractError("unknown task '" + text + "'");
}

std::string to_string(SplitKind kind) {
  switch (kind) {
    case SplitKind::train: return "train";
    case SplitKind::test: return "test";
    case SplitKind::shift: return "shift";
    case SplitKind::gap: return "gap";
  }
  return "train";
}

SplitKind parse_split(const std::string& text) {
  if (text == "train") return SplitKind::train;
  if (text == "test") return SplitKind::test;
  if (text == "shift") return SplitKind::shift;
  if (text == "gap") return SplitKind::gap;
  throw ContractError("unknown split '" + text + "'");
}

double regression_mean(double x) { return x * std::sin(x); }
double regression_sigma(double x) { return 0.1 + 0.2 * std::abs(x); }

RegressionDataset gen_regression(long n, const SplitSpec& split, bool noise_free) {
  if (n <= 0) throw ContractError("gen_regression: n must be >= 1");
  Rng rng(Rng::derive_seed(split.seed, "regression/" + to_string(split.kind)));
  RegressionDataset out;
  out.x.reserve(static_cast<std::size_t>(n));
  auto draw_x = [&]() {
    switch (split.kind) {
      case SplitKind::gap: return rng.uniform(kGapLow, kGapHigh);
      case SplitKind::shift: return rng.uniform(kShiftLow, kShiftHigh);
      default: {
        // Rejection keeps the gap strictly empty.
        double x;
        do {
          x = rng.uniform(kRegressionLow, kRegressionHigh);
        } while (x > kGapLow && x < kGapHigh);
        return x;
      }
    }
  };
  for (long i = 0; i < n; ++i) {
    const double x = draw_x();
    const double sigma = regression_sigma(x);
    const double eps = rng.normal();
    out.x.push_back(x);
    out.true_sigma.push_back(sigma);
    out.y.push_back(regression_mean(x) + (noise_free ? 0.0 : sigma * eps));
  }
  return out;
}

std::array<double, 2> blob_center(int c, int num_classes) {
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(num_classes);
  return {std::cos(angle), std::sin(angle)};
}

ClassificationDataset gen_classification(long n, int num_classes, const SplitSpec& split) {
  if (num_classes < 2) throw ContractError("gen_classification: need at least 2 classes");
  if (n < num_classes) throw ContractError("gen_classification: need n >= K");
  if (split.kind == SplitKind::gap) throw ContractError("gen_classification: no gap split for classification");
  for (int c : split.held_out_classes)
    if (c < 0 || c >= num_classes) throw ContractError("held-out class out of range");

  std::vector<int> allowed;
  const bool drop_held_out = split.kind != SplitKind::test;
  for (int c = 0; c < num_classes; ++c)
    if (!drop_held_out || !split.held_out_classes.contains(c)) allowed.push_back(c);
  if (allowed.empty()) throw ContractError("gen_classification: every class is held out");

  Rng rng(Rng::derive_seed(split.seed, "classification/" + to_string(split.kind)));
  const double offset = split.kind == SplitKind::shift ? kShiftOffset : 0.0;
  ClassificationDataset out;
  out.num_classes = num_classes;
  for (long i = 0; i < n; ++i) {
    const int c = allowed[static_cast<std::size_t>(i) % allowed.size()];
    const auto center = blob_center(c, num_classes);
    const double a = rng.normal(), b = rng.normal();
    out.x.push_back({center[0] + offset + kBlobStd * a, center[1] + offset + kBlobStd * b});
    out.labels.push_back(c);
  }
  return out;
}

std::vector<double> regression_support_grid(std::size_t points) {
  // Equal spacing over the two support intervals taken together.
  const double left = kGapLow - kRegressionLow;
  const double right = kRegressionHigh - kGapHigh;
  const double total = left + right;
  std::vector<double> grid;
  grid.reserve(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double u = points == 1 ? 0.5 : total * static_cast<double>(i) / static_cast<double>(points - 1);
    grid.push_back(u <= left ? kRegressionLow + u : kGapHigh + (u - left));
  }
  return grid;
}

TrainingData TrainingData::subset(std::span<const std::size_t> rows) const {
  TrainingData out;
  out.task = task;
  out.num_classes = num_classes;
  out.inputs = inputs.gather_rows(rows);
  if (task == Task::regression) out.targets = targets.gather_rows(rows);
  for (std::size_t r : rows)
    if (task == Task::classification) out.labels.push_back(labels[r]);
  return out;
}

TrainingData to_training_data(const RegressionDataset& data) {
  TrainingData out;
  out.task = Task::regression;
  out.inputs = Tensor::matrix(data.size(), 1, data.x);
  out.targets = Tensor::matrix(data.size(), 1, data.y);
  return out;
}

TrainingData to_training_data(const ClassificationDataset& data) {
  TrainingData out;
  out.task = Task::classification;
  out.num_classes = data.num_classes;
  std::vector<double> flat;
  flat.reserve(2 * data.size());
  for (const auto& p : data.x) {
    flat.push_back(p[0]);
    flat.push_back(p[1]);
  }
  out.inputs = Tensor::matrix(data.size(), 2, std::move(flat));
  out.labels = data.labels;
  return out;
}

std::vector<double> feature_std(const Tensor& x) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  if (n == 0) return var;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(r, j) / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < d; ++j) var[j] += (x(r, j) - mean[j]) * (x(r, j) - mean[j]) / static_cast<double>(n);
  for (double& v : var) v = std::sqrt(v);
  return var;
}

Tensor augment(const Tensor& x, const AugmentationSpec& spec, std::span<const double> feature_scale, Rng& rng) {
  if (spec.jitter_range < 0.0) throw ContractError("jitter_range must be >= 0");
  if (!spec.enabled || spec.jitter_range == 0.0) return x;
  if (feature_scale.size() != x.cols()) throw DimensionError("augment: one scale per feature required");
  Tensor out = x;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = 0; j < out.cols(); ++j) {
      const double half = spec.jitter_range * feature_scale[j];
      out(r, j) += rng.uniform(-half, half);
    }
  return out;
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const std::filesystem::path& path, std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw ContractError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      header = cells;
      first = false;
    } else {
      if (cells.size() != header.size()) throw ContractError("csv row width does not match header in " + path.string());
      rows.push_back(std::move(cells));
    }
  }
  return rows;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const RegressionDataset& data) {
  std::string out = "x,y,true_sigma\n";
  for (std::size_t i = 0; i < data.size(); ++i)
    out += format_double(data.x[i]) + "," + format_double(data.y[i]) + "," + format_double(data.true_sigma[i]) + "\n";
  write_file_atomic(path, out);
}

void write_csv(const std::filesystem::path& path, const ClassificationDataset& data) {
  std::string out = "x0,x1,label\n";
  for (std::size_t i = 0; i < data.size(); ++i)
    out += format_double(data.x[i][0]) + "," + format_double(data.x[i][1]) + "," + std::to_string(data.labels[i]) + "\n";
  write_file_atomic(path, out);
}

RegressionDataset read_regression_csv(const std::filesystem::path& path) {
  std::vector<std::string> header;
  auto rows = read_csv_rows(path, header);
  if (header.size() < 2 || header[0] != "x" || header[1] != "y") throw ContractError("regression csv needs x,y header");
  const bool has_sigma = header.size() >= 3 && header[2] == "true_sigma";
  RegressionDataset out;
  for (const auto& r : rows) {
    out.x.push_back(parse_double(r[0]));
    out.y.push_back(parse_double(r[1]));
    out.true_sigma.push_back(has_sigma ? parse_double(r[2]) : regression_sigma(out.x.back()));
  }
  return out;
}

ClassificationDataset read_classification_csv(const std::filesystem::path& path, int num_classes) {
  std::vector<std::string> header;
  auto rows = read_csv_rows(path, header);
  if (header.size() != 3 || header[2] != "label") throw ContractError("classification csv needs x0,x1,label header");
  ClassificationDataset out;
  int max_label = -1;
  for (const auto& r : rows) {
    out.x.push_back({parse_double(r[0]), parse_double(r[1])});
    const int label = std::stoi(r[2]);
    if (label < 0) throw ContractError("negative label in " + path.string());
    out.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  out.num_classes = num_classes > 0 ? num_classes : max_label + 1;
  if (max_label >= out.num_classes) throw ContractError("label exceeds class count in " + path.string());
  return out;
}

}  // namespace distillnn

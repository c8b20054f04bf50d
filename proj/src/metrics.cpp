#include "distillnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "distillnn/errors.hpp"
#include "distillnn/kvtext.hpp"

namespace distillnn {

namespace {

constexpr std::size_t kSparsificationSteps = 100;

// Remaining mean error after dropping the first ceil(j*N/100) items of `order`.
std::vector<double> sparsification(std::span<const double> errors, const std::vector<std::size_t>& order) {
  const std::size_t n = errors.size();
  // suffix[i] = sum of errors[order[i..]]
  std::vector<double> suffix(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + errors[order[i]];
  std::vector<double> curve;
  for (std::size_t j = 0; j <= kSparsificationSteps; ++j) {
    const std::size_t removed = (j * n + kSparsificationSteps - 1) / kSparsificationSteps;
    const std::size_t left = n - removed;
    curve.push_back(left == 0 ? 0.0 : suffix[removed] / static_cast<double>(left));
  }
  return curve;
}

std::vector<std::size_t> descending_order(std::span<const double> keys) {
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
  return order;
}

}  // namespace

std::vector<double> epistemic_variance(const PredictiveSampleSet& samples) {
  const std::size_t t = samples.count(), d = samples.dim();
  if (t == 0) throw ContractError("epistemic_variance: empty sample set");
  std::vector<double> out(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t s = 0; s < t; ++s) {
      const double v = samples.mu(s, j);
      sum += v;
      sq += v * v;
    }
    const double mean = sum / static_cast<double>(t);
    out[j] = std::max(0.0, sq / static_cast<double>(t) - mean * mean);
  }
  return out;
}

std::vector<double> aleatoric_variance(const PredictiveSampleSet& samples) {
  if (!samples.has_logvar()) throw ContractError("aleatoric_variance: samples carry no log-variance");
  if (samples.count() == 0) throw ContractError("aleatoric_variance: empty sample set");
  std::vector<double> out(samples.dim(), 0.0);
  for (std::size_t s = 0; s < samples.count(); ++s)
    for (std::size_t j = 0; j < samples.dim(); ++j)
      out[j] += std::exp(samples.logvar(s, j)) / static_cast<double>(samples.count());
  return out;
}

std::vector<double> total_variance(const PredictiveSampleSet& samples) {
  std::vector<double> out = epistemic_variance(samples);
  const std::vector<double> alea = aleatoric_variance(samples);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += alea[j];
  return out;
}

double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

double bald(const Tensor& probs) {
  if (probs.rank() != 2 || probs.rows() == 0) throw ContractError("bald: need a nonempty (T, K) matrix");
  const std::size_t t = probs.rows(), k = probs.cols();
  std::vector<double> mean(k, 0.0);
  double mean_entropy = 0.0;
  for (std::size_t s = 0; s < t; ++s) {
    auto row = probs.row(s);
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw ContractError("bald: negative or NaN probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ContractError("bald: probability row does not sum to 1");
    for (std::size_t j = 0; j < k; ++j) mean[j] += row[j] / static_cast<double>(t);
    mean_entropy += entropy(row) / static_cast<double>(t);
  }
  return std::max(0.0, entropy(mean) - mean_entropy);
}

AuseResult ause(std::span<const double> errors, std::span<const double> uncertainties) {
  if (errors.size() != uncertainties.size()) throw DimensionError("ause: errors and uncertainties differ in length");
  if (errors.size() < 2) throw ContractError("ause: need at least two items");
  for (double e : errors)
    if (!(e >= 0.0)) throw ContractError("ause: errors must be non-negative");

  AuseResult out;
  for (std::size_t j = 0; j <= kSparsificationSteps; ++j)
    out.curve.fractions.push_back(static_cast<double>(j) / static_cast<double>(kSparsificationSteps));
  std::vector<double> model = sparsification(errors, descending_order(uncertainties));
  std::vector<double> oracle = sparsification(errors, descending_order(errors));
  const double base = model.front();
  if (base == 0.0) {
    out.degenerate = true;
    out.curve.model_curve.assign(model.size(), 0.0);
    out.curve.oracle_curve.assign(model.size(), 0.0);
    return out;
  }
  for (double& v : model) v /= base;
  for (double& v : oracle) v /= base;
  double area = 0.0;
  for (std::size_t j = 1; j <= kSparsificationSteps; ++j) {
    const double prev = model[j - 1] - oracle[j - 1];
    const double cur = model[j] - oracle[j];
    area += 0.5 * (prev + cur) / static_cast<double>(kSparsificationSteps);
  }
  out.value = area;
  out.curve.model_curve = std::move(model);
  out.curve.oracle_curve = std::move(oracle);
  return out;
}

ReliabilityDiagram reliability_diagram(std::span<const double> confidences, const std::vector<bool>& correct,
                                       std::size_t bins) {
  if (confidences.size() != correct.size()) throw DimensionError("reliability: length mismatch");
  if (bins == 0) throw ContractError("reliability: need at least one bin");
  ReliabilityDiagram out;
  out.bins.resize(bins);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) throw ContractError("reliability: confidence outside [0, 1]");
    // Bin b covers (b/B, (b+1)/B]; zero joins the first bin.
    auto b = static_cast<std::size_t>(std::ceil(c * static_cast<double>(bins) - 1e-12));
    b = b == 0 ? 0 : std::min(b - 1, bins - 1);
    out.bins[b].count += 1;
    out.bins[b].accuracy += correct[i] ? 1.0 : 0.0;
    out.bins[b].confidence += c;
  }
  const double n = static_cast<double>(confidences.size());
  for (ReliabilityBin& bin : out.bins) {
    if (bin.count == 0) continue;
    bin.accuracy /= static_cast<double>(bin.count);
    bin.confidence /= static_cast<double>(bin.count);
    out.ece += static_cast<double>(bin.count) / n * std::abs(bin.accuracy - bin.confidence);
  }
  return out;
}

double ece_classification(std::span<const double> confidences, const std::vector<bool>& correct) {
  return reliability_diagram(confidences, correct, 10).ece;
}

CoverageCurve coverage_curve(std::span<const double> cdf_values, std::size_t levels) {
  if (levels == 0) throw ContractError("coverage: need at least one level");
  for (double f : cdf_values)
    if (!(f >= 0.0 && f <= 1.0)) throw ContractError("coverage: CDF value outside [0, 1]");
  std::vector<double> sorted(cdf_values.begin(), cdf_values.end());
  std::sort(sorted.begin(), sorted.end());
  CoverageCurve out;
  const double n = static_cast<double>(sorted.size());
  double sq = 0.0;
  for (std::size_t j = 1; j <= levels; ++j) {
    const double p = static_cast<double>(j) / static_cast<double>(levels);
    const auto below = static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), p) - sorted.begin());
    const double q = sorted.empty() ? 0.0 : below / n;
    out.expected.push_back(p);
    out.observed.push_back(q);
    sq += (p - q) * (p - q);
  }
  out.ece = std::sqrt(sq / static_cast<double>(levels));
  return out;
}

double ece_regression(std::span<const double> cdf_values) { return coverage_curve(cdf_values, 30).ece; }

double laplace_cdf(double y, double mu, double logvar) {
  const double b = std::exp(0.5 * logvar) / std::sqrt(2.0);
  const double z = (y - mu) / b;
  return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
}

double empirical_cdf(std::span<const double> samples, double y) {
  if (samples.empty()) throw ContractError("empirical_cdf: no samples");
  const auto below = std::count_if(samples.begin(), samples.end(), [y](double s) { return s <= y; });
  return static_cast<double>(below) / static_cast<double>(samples.size());
}

double js_distance(std::span<const double> a, std::span<const double> b, std::size_t bins) {
  if (a.empty() || b.empty()) throw ContractError("js_distance: both samples must be nonempty");
  if (bins == 0) throw ContractError("js_distance: need at least one bin");
  auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin), hi = std::max(*amax, *bmax);
  auto histogram = [&](std::span<const double> xs) {
    std::vector<double> h(bins, 0.0);
    for (double x : xs) {
      std::size_t idx = 0;
      if (hi > lo) idx = std::min(bins - 1, static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins)));
      h[idx] += 1.0 / static_cast<double>(xs.size());
    }
    return h;
  };
  const std::vector<double> p = histogram(a), q = histogram(b);
  double div = 0.0;
  for (std::size_t i = 0; i < bins; ++i) {
    const double mid = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) div += 0.5 * p[i] * std::log2(p[i] / mid);
    if (q[i] > 0.0) div += 0.5 * q[i] * std::log2(q[i] / mid);
  }
  return std::sqrt(std::clamp(div, 0.0, 1.0));
}

RegressionMetrics regression_metrics(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw DimensionError("regression_metrics: length mismatch");
  if (predictions.empty()) throw ContractError("regression_metrics: empty input");
  RegressionMetrics out;
  double sq = 0.0;
  std::size_t positive = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = predictions[i], y = targets[i];
    sq += (p - y) * (p - y);
    if (p <= 0.0 || y <= 0.0) {
      ++out.excluded;
      continue;
    }
    ++positive;
    out.rel += std::abs(p - y) / y;
    out.log10 += std::abs(std::log10(p) - std::log10(y));
    const double ratio = std::max(p / y, y / p);
    out.delta1 += ratio < 1.25 ? 1.0 : 0.0;
    out.delta2 += ratio < 1.25 * 1.25 ? 1.0 : 0.0;
    out.delta3 += ratio < 1.25 * 1.25 * 1.25 ? 1.0 : 0.0;
  }
  out.rmse = std::sqrt(sq / static_cast<double>(predictions.size()));
  if (positive > 0) {
    const double inv = 1.0 / static_cast<double>(positive);
    out.rel *= inv;
    out.log10 *= inv;
    out.delta1 *= inv;
    out.delta2 *= inv;
    out.delta3 *= inv;
  }
  return out;
}

double brier_score(std::span<const double> probs, int label) {
  double sum = 0.0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    const double target = static_cast<int>(j) == label ? 1.0 : 0.0;
    sum += (probs[j] - target) * (probs[j] - target);
  }
  return sum / static_cast<double>(probs.size());
}

ClassificationMetrics classification_metrics(const Tensor& probs, std::span<const int> labels) {
  if (probs.rank() != 2 || probs.rows() != labels.size()) throw DimensionError("classification_metrics: shape mismatch");
  if (labels.empty()) throw ContractError("classification_metrics: empty input");
  const std::size_t k = probs.cols(), n = labels.size();
  std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0), support(k, 0);
  ClassificationMetrics out;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = probs.row(i);
    const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= k) throw ContractError("classification_metrics: label out of range");
    support[y] += 1;
    if (pred == y) {
      tp[y] += 1;
      out.accuracy += 1.0;
    } else {
      fp[pred] += 1;
      fn[y] += 1;
    }
    out.brier += brier_score(row, labels[i]);
  }
  out.accuracy /= static_cast<double>(n);
  out.brier /= static_cast<double>(n);
  std::size_t present = 0, with_union = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (support[c] > 0) {
      out.classwise_accuracy += static_cast<double>(tp[c]) / static_cast<double>(support[c]);
      ++present;
    }
    const std::size_t uni = tp[c] + fp[c] + fn[c];
    if (uni > 0) {
      out.mean_iou += static_cast<double>(tp[c]) / static_cast<double>(uni);
      ++with_union;
    }
  }
  if (present) out.classwise_accuracy /= static_cast<double>(present);
  if (with_union) out.mean_iou /= static_cast<double>(with_union);
  return out;
}

void write_csv(const std::filesystem::path& path, const SparsificationCurve& curve) {
  std::string out = "fraction,model,oracle\n";
  for (std::size_t i = 0; i < curve.fractions.size(); ++i)
    out += format_double(curve.fractions[i]) + "," + format_double(curve.model_curve[i]) + "," +
           format_double(curve.oracle_curve[i]) + "\n";
  write_file_atomic(path, out);
}

void write_csv(const std::filesystem::path& path, const ReliabilityDiagram& diagram) {
  std::string out = "bin_upper,count,accuracy,confidence\n";
  const double width = 1.0 / static_cast<double>(diagram.bins.size());
  for (std::size_t b = 0; b < diagram.bins.size(); ++b) {
    const ReliabilityBin& bin = diagram.bins[b];
    out += format_double(width * static_cast<double>(b + 1)) + "," + std::to_string(bin.count) + "," +
           format_double(bin.accuracy) + "," + format_double(bin.confidence) + "\n";
  }
  write_file_atomic(path, out);
}

void write_csv(const std::filesystem::path& path, const CoverageCurve& curve) {
  std::string out = "level,expected,observed\n";
  for (std::size_t j = 0; j < curve.expected.size(); ++j)
    out += std::to_string(j + 1) + "," + format_double(curve.expected[j]) + "," + format_double(curve.observed[j]) + "\n";
  write_file_atomic(path, out);
}

}  // namespace distillnn

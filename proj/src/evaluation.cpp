#include "distillnn/evaluation.hpp"

#include <cmath>
#include <limits>

#include "distillnn/errors.hpp"

namespace distillnn {

namespace {

constexpr const char* kUnavailable = "unavailable";

void set_optional(KeyValues& kv, const std::string& key, const std::optional<double>& value) {
  if (value) kv.set(key, *value);
  else kv.set(key, kUnavailable);
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::vector<double> flatten(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

std::vector<bool> correctness(const Tensor& probs, std::span<const int> labels, std::vector<double>& confidence) {
  std::vector<bool> correct;
  confidence.clear();
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto row = probs.row(i);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    confidence.push_back(row[best]);
    correct.push_back(static_cast<int>(best) == labels[i]);
  }
  return correct;
}

std::vector<double> brier_errors(const Tensor& probs, std::span<const int> labels) {
  std::vector<double> out;
  for (std::size_t i = 0; i < probs.rows(); ++i) out.push_back(brier_score(probs.row(i), labels[i]));
  return out;
}

std::vector<double> absolute_errors(const Tensor& pred, const Tensor& target) {
  std::vector<double> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) out[i] = std::abs(pred[i] - target[i]);
  return out;
}

void fill_ause(Evaluation& ev, std::span<const double> errors, std::span<const double> uncertainty) {
  const AuseResult a = ause(errors, uncertainty);
  ev.report.ause = a.value;
  ev.report.ause_degenerate = a.degenerate;
  ev.curves.sparsification = a.curve;
  ev.uncertainty.assign(uncertainty.begin(), uncertainty.end());
}

void fill_classification(Evaluation& ev, const TrainingData& data, const EvalOptions& options) {
  ev.report.classification = classification_metrics(ev.prediction, data.labels);
  std::vector<double> confidence;
  const std::vector<bool> correct = correctness(ev.prediction, data.labels, confidence);
  ReliabilityDiagram diagram = reliability_diagram(confidence, correct, options.reliability_bins);
  ev.report.ece = diagram.ece;
  ev.curves.reliability = std::move(diagram);
  ev.report.ause_error = "brier";
  std::vector<double> h(ev.prediction.rows());
  for (std::size_t i = 0; i < h.size(); ++i) h[i] = entropy(ev.prediction.row(i));
  ev.report.ause_entropy = ause(brier_errors(ev.prediction, data.labels), h).value;
}

void require_data(const TrainingData& data, Task task, std::size_t input_dim) {
  if (data.size() == 0) throw ContractError("evaluation: empty dataset");
  if (data.task != task) throw ContractError("evaluation: model and dataset tasks differ");
  if (data.inputs.cols() != input_dim) throw DimensionError("evaluation: input dimension mismatch");
}

}  // namespace

KeyValues EvalReport::to_key_values() const {
  KeyValues kv;
  kv.set("role", role);
  kv.set("model", model);
  kv.set("task", to_string(task));
  kv.set("count", static_cast<std::uint64_t>(count));
  kv.set("samples", static_cast<std::uint64_t>(samples));
  kv.set("units.bald", "nats");
  kv.set("units.js", "bits");
  kv.set("units.variance", "squared target units");
  if (task == Task::regression) {
    const RegressionMetrics r = regression.value_or(RegressionMetrics{});
    kv.set("metrics.rmse", r.rmse);
    kv.set("metrics.rel", r.rel);
    kv.set("metrics.log10", r.log10);
    kv.set("metrics.delta1", r.delta1);
    kv.set("metrics.delta2", r.delta2);
    kv.set("metrics.delta3", r.delta3);
    kv.set("metrics.excluded_nonpositive", static_cast<std::uint64_t>(r.excluded));
  } else {
    const ClassificationMetrics c = classification.value_or(ClassificationMetrics{});
    kv.set("metrics.accuracy", c.accuracy);
    kv.set("metrics.classwise_accuracy", c.classwise_accuracy);
    kv.set("metrics.mean_iou", c.mean_iou);
    kv.set("metrics.brier", c.brier);
  }
  set_optional(kv, "uncertainty.ece", ece);
  set_optional(kv, "uncertainty.ause", ause);
  kv.set("uncertainty.ause_degenerate", ause_degenerate);
  kv.set("uncertainty.ause_error", ause_error.empty() ? std::string(kUnavailable) : ause_error);
  if (task == Task::classification) set_optional(kv, "uncertainty.ause_entropy", ause_entropy);
  kv.set("uncertainty.measure", uncertainty_measure.empty() ? std::string(kUnavailable) : uncertainty_measure);
  set_optional(kv, "uncertainty.mean_epistemic", mean_epistemic);
  set_optional(kv, "uncertainty.mean_aleatoric", mean_aleatoric);
  set_optional(kv, "uncertainty.mean_total", mean_total);
  set_optional(kv, "uncertainty.mean_bald", mean_bald);
  set_optional(kv, "timing.inference_seconds", inference_seconds);
  kv.set("warnings", static_cast<std::uint64_t>(warnings.size()));
  for (std::size_t i = 0; i < warnings.size(); ++i) kv.set("warning." + std::to_string(i), warnings[i]);
  return kv;
}

Evaluation evaluate_teacher(const TeacherModel& teacher, const TrainingData& data, const EvalOptions& options,
                            Rng& rng) {
  require_data(data, teacher.task(), teacher.members().front().input_dim());
  const std::size_t t = teacher.is_ensemble() ? teacher.size() : options.teacher_samples;
  if (t == 0) throw ContractError("evaluate_teacher: need at least one sample");
  Rng predict_rng = rng.split("predict");
  Rng noise_rng = rng.split("cdf-noise");
  const BatchSamples samples = mc_predict(teacher, data.inputs, t, predict_rng);
  const std::size_t n = data.size(), d = samples.dim();

  Evaluation ev;
  ev.report.role = "teacher";
  ev.report.model = to_string(teacher.config().kind);
  ev.report.task = teacher.task();
  ev.report.count = n;
  ev.report.samples = t;

  std::vector<double> epistemic, aleatoric, total;
  epistemic.reserve(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const PredictiveSampleSet set = samples.at(i);
    const std::vector<double> e = epistemic_variance(set);
    epistemic.insert(epistemic.end(), e.begin(), e.end());
    if (set.has_logvar()) {
      const std::vector<double> a = aleatoric_variance(set);
      aleatoric.insert(aleatoric.end(), a.begin(), a.end());
      for (std::size_t j = 0; j < d; ++j) total.push_back(e[j] + a[j]);
    }
  }
  ev.report.mean_epistemic = mean_of(epistemic);
  if (teacher.has_head()) {
    ev.report.mean_aleatoric = mean_of(aleatoric);
    ev.report.mean_total = mean_of(total);
  }

  if (teacher.task() == Task::regression) {
    ev.prediction = Tensor({n, d});
    for (const Tensor& s : samples.mu)
      for (std::size_t i = 0; i < ev.prediction.size(); ++i) ev.prediction[i] += s[i] / static_cast<double>(t);
    ev.report.regression = regression_metrics(flatten(ev.prediction), flatten(data.targets));
    ev.report.ause_error = "absolute_error";
    ev.report.uncertainty_measure = teacher.has_head() ? "total_variance" : "epistemic_variance";
    fill_ause(ev, absolute_errors(ev.prediction, data.targets), teacher.has_head() ? total : epistemic);

    // Empirical predictive CDF: each sample contributes one draw carrying its own noise.
    std::vector<double> cdf(n * d);
    std::vector<double> draws(t);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t s = 0; s < t; ++s) {
          draws[s] = samples.mu[s](i, j);
          if (teacher.has_head())
            draws[s] += std::exp(0.5 * samples.logvar[s](i, j)) * draw_noise(options.teacher_cdf_noise, noise_rng);
        }
        cdf[i * d + j] = empirical_cdf(draws, data.targets(i, j));
      }
    CoverageCurve coverage = coverage_curve(cdf, options.coverage_levels);
    ev.report.ece = coverage.ece;
    ev.curves.coverage = std::move(coverage);
  } else {
    ev.prediction = classification_mean(samples);
    fill_classification(ev, data, options);
    std::vector<double> b(n);
    Tensor probs({t, d});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t s = 0; s < t; ++s) {
        auto row = probs.row(s);
        auto logits = samples.mu[s].row(i);
        std::copy(logits.begin(), logits.end(), row.begin());
        softmax_inplace(row);
      }
      b[i] = bald(probs);
    }
    ev.report.mean_bald = mean_of(b);
    ev.report.uncertainty_measure = "bald";
    fill_ause(ev, brier_errors(ev.prediction, data.labels), b);
  }

  if (options.measure_timing) {
    Rng timing_rng = rng.split("timing");
    ev.report.inference_seconds = median_seconds([&] { (void)mc_predict(teacher, data.inputs, t, timing_rng); },
                                                 options.timing_warmup, options.timing_repeats);
  }
  return ev;
}

Evaluation evaluate_student(const StudentModel& student, const TrainingData& data, const EvalOptions& options,
                            Rng& rng) {
  require_data(data, student.task(), student.net().input_dim());
  const DistParams params = student_predict(student, data.inputs);
  const std::size_t n = data.size(), d = student.output_dim();

  Evaluation ev;
  ev.report.role = "student";
  ev.report.model = to_string(student.config().mode);
  ev.report.task = student.task();
  ev.report.count = n;
  ev.report.samples = 1;

  if (student.task() == Task::regression) {
    ev.prediction = params.mu;
    ev.report.regression = regression_metrics(flatten(params.mu), flatten(data.targets));
    ev.report.ause_error = "absolute_error";
    if (student.mean_only()) {
      ev.report.warnings.push_back("mean-only student: regression uncertainty metrics unavailable");
    } else {
      const Tensor var = predictive_variance(student, params);
      const std::vector<double> total = flatten(var);
      ev.report.mean_total = mean_of(total);
      ev.report.uncertainty_measure = "predictive_variance";
      fill_ause(ev, absolute_errors(params.mu, data.targets), total);
      std::vector<double> cdf(n * d);
      for (std::size_t i = 0; i < n * d; ++i) cdf[i] = laplace_cdf(data.targets[i], params.mu[i], params.logvar[i]);
      CoverageCurve coverage = coverage_curve(cdf, options.coverage_levels);
      ev.report.ece = coverage.ece;
      ev.curves.coverage = std::move(coverage);
    }
  } else {
    std::vector<double> uncertainty(n);
    if (student.mean_only()) {
      // No logit spread: rank by the entropy of the single softmax.
      ev.prediction = softmax_rows(params.mu);
      for (std::size_t i = 0; i < n; ++i) uncertainty[i] = entropy(ev.prediction.row(i));
      ev.report.uncertainty_measure = "predictive_entropy";
      ev.report.warnings.push_back("mean-only student: BALD unavailable, AUSE uses predictive entropy");
    } else {
      Rng logit_rng = rng.split("logit");
      BatchLogitUncertainty u = student_classification_uncertainty(student, params, options.logit_samples, logit_rng);
      ev.prediction = std::move(u.mean_probs);
      uncertainty = std::move(u.bald);
      ev.report.mean_bald = mean_of(uncertainty);
      ev.report.uncertainty_measure = "bald";
      ev.report.samples = options.logit_samples;
    }
    fill_classification(ev, data, options);
    fill_ause(ev, brier_errors(ev.prediction, data.labels), uncertainty);
  }

  if (options.measure_timing)
    ev.report.inference_seconds = median_seconds([&] { (void)student_predict(student, data.inputs); },
                                                 options.timing_warmup, options.timing_repeats);
  return ev;
}

std::vector<std::filesystem::path> write_curves(const std::filesystem::path& dir, const EvalCurves& curves,
                                                const std::string& prefix) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& name, const auto& curve) {
    written.push_back(dir / (prefix + name));
    write_csv(written.back(), curve);
  };
  if (!curves.sparsification.fractions.empty()) emit("sparsification.csv", curves.sparsification);
  if (curves.reliability) emit("reliability.csv", *curves.reliability);
  if (curves.coverage) emit("coverage.csv", *curves.coverage);
  return written;
}

std::vector<double> teacher_bald(const TeacherModel& teacher, const Tensor& x, std::size_t samples, Rng& rng) {
  if (teacher.task() != Task::classification) throw ContractError("teacher_bald: classification teacher required");
  const std::size_t t = teacher.is_ensemble() ? teacher.size() : samples;
  const BatchSamples s = mc_predict(teacher, x, t, rng);
  std::vector<double> out(x.rows());
  Tensor probs({t, s.dim()});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t k = 0; k < t; ++k) {
      auto row = probs.row(k);
      auto logits = s.mu[k].row(i);
      std::copy(logits.begin(), logits.end(), row.begin());
      softmax_inplace(row);
    }
    out[i] = bald(probs);
  }
  return out;
}

std::vector<double> student_bald(const StudentModel& student, const Tensor& x, std::size_t samples, Rng& rng) {
  if (student.task() != Task::classification) throw ContractError("student_bald: classification student required");
  if (student.mean_only()) return std::vector<double>(x.rows(), 0.0);
  const DistParams params = student_predict(student, x);
  return student_classification_uncertainty(student, params, samples, rng).bald;
}

OutlierSeparation outlier_separation(const std::vector<double>& bald_values, std::span<const int> labels,
                                     const std::set<int>& held_out, std::size_t bins) {
  if (bald_values.size() != labels.size()) throw DimensionError("outlier_separation: lengths differ");
  std::vector<double> in, out;
  for (std::size_t i = 0; i < labels.size(); ++i) (held_out.count(labels[i]) ? out : in).push_back(bald_values[i]);
  if (in.empty()) throw ContractError("outlier_separation: no inlier points");
  if (out.empty()) throw ContractError("outlier_separation: no outlier points");
  OutlierSeparation sep;
  sep.js = js_distance(in, out, bins);
  sep.mean_inlier = mean_of(in);
  sep.mean_outlier = mean_of(out);
  sep.relative_mean = sep.mean_inlier > 0.0 ? sep.mean_outlier / sep.mean_inlier
                                            : std::numeric_limits<double>::infinity();
  sep.inliers = in.size();
  sep.outliers = out.size();
  return sep;
}

}  // namespace distillnn

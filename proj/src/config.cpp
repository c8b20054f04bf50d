#include "distillnn/config.hpp"

#include <sstream>

#include "distillnn/errors.hpp"

namespace distillnn {

namespace {

// Consumes keys from a flat section, remembering which ones were read.
class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  template <class F>
  void apply(const std::string& key, F&& fn) {
    if (auto v = kv_.find(key)) {
      used_.insert(key);
      try {
        fn(*v);
      } catch (const ContractError& e) {
        throw ContractError("config key '" + key + "': " + e.what());
      } catch (const std::exception& e) {
        throw ContractError("config key '" + key + "': bad value '" + *v + "'");
      }
    }
  }

  void number(const std::string& key, double& out) {
    apply(key, [&](const std::string& v) { out = parse_double(v); });
  }
  void count(const std::string& key, std::size_t& out) {
    apply(key, [&](const std::string& v) { out = static_cast<std::size_t>(kv_.get_uint(key)); (void)v; });
  }
  void flag(const std::string& key, bool& out) {
    apply(key, [&](const std::string& v) { out = parse_bool(v); });
  }

  void finish(const std::string& where) const {
    for (const auto& [key, value] : kv_.entries())
      if (!used_.count(key)) throw ContractError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
  }

 private:
  const KeyValues& kv_;
  std::set<std::string> used_;
};

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::vector<long long> split_ints(const std::string& text) {
  std::vector<long long> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    const auto e = item.find_last_not_of(" \t");
    std::size_t used = 0;
    const std::string trimmed = item.substr(b, e - b + 1);
    const long long v = std::stoll(trimmed, &used);
    if (used != trimmed.size()) throw ContractError("'" + trimmed + "' is not an integer");
    out.push_back(v);
  }
  return out;
}

void put_train(KeyValues& kv, const TrainConfig& t) {
  kv.set("epochs", static_cast<std::uint64_t>(t.epochs));
  kv.set("batch_size", static_cast<std::uint64_t>(t.batch_size));
  kv.set("learning_rate", t.learning_rate);
  kv.set("momentum", t.momentum);
  kv.set("weight_decay", t.weight_decay);
  kv.set("poly_power", t.poly_power);
  kv.set("max_grad_norm", t.max_grad_norm);
}

void read_train(Reader& r, TrainConfig& t) {
  r.count("epochs", t.epochs);
  r.count("batch_size", t.batch_size);
  r.number("learning_rate", t.learning_rate);
  r.number("momentum", t.momentum);
  r.number("weight_decay", t.weight_decay);
  r.number("poly_power", t.poly_power);
  r.number("max_grad_norm", t.max_grad_norm);
}

}  // namespace

std::string to_string(AblationKind kind) {
  switch (kind) {
    case AblationKind::samples_m: return "samples_m";
    case AblationKind::lambda: return "lambda";
    case AblationKind::augmentation: return "augmentation";
  }
  return "lambda";
}

AblationKind parse_ablation_kind(const std::string& text) {
  if (text == "samples_m" || text == "m") return AblationKind::samples_m;
  if (text == "lambda") return AblationKind::lambda;
  if (text == "augmentation" || text == "aug") return AblationKind::augmentation;
  throw ContractError("unknown ablation kind '" + text + "' (samples_m, lambda, augmentation)");
}

KeyValues section(const KeyValues& kv, const std::string& prefix) {
  KeyValues out;
  const std::string p = prefix + ".";
  for (const auto& [key, value] : kv.entries())
    if (key.rfind(p, 0) == 0) out.set(key.substr(p.size()), value);
  return out;
}

KeyValues to_key_values(const TeacherConfig& c) {
  KeyValues kv;
  kv.set("kind", to_string(c.kind));
  kv.set("dropout_rate", c.dropout_rate);
  kv.set("ensemble_size", static_cast<std::uint64_t>(c.ensemble_size));
  kv.set("aleatoric_head", c.aleatoric_head);
  kv.set("eval_samples", static_cast<std::uint64_t>(c.eval_samples));
  kv.set("hidden", join_sizes(c.hidden));
  kv.set("logit_noise_draws", static_cast<std::uint64_t>(c.logit_noise_draws));
  put_train(kv, c.train);
  return kv;
}

TeacherConfig teacher_config_from(const KeyValues& kv, TeacherConfig c, bool strict) {
  Reader r(kv);
  r.apply("kind", [&](const std::string& v) { c.kind = parse_teacher_kind(v); });
  r.number("dropout_rate", c.dropout_rate);
  r.count("ensemble_size", c.ensemble_size);
  r.flag("aleatoric_head", c.aleatoric_head);
  r.count("eval_samples", c.eval_samples);
  r.apply("hidden", [&](const std::string& v) {
    c.hidden.clear();
    for (long long h : split_ints(v)) {
      if (h <= 0) throw ContractError("hidden sizes must be positive");
      c.hidden.push_back(static_cast<std::size_t>(h));
    }
  });
  r.count("logit_noise_draws", c.logit_noise_draws);
  read_train(r, c.train);
  if (strict) r.finish("teacher");
  return c;
}

KeyValues to_key_values(const SamplerConfig& c) {
  KeyValues kv;
  kv.set("m", static_cast<std::uint64_t>(c.m));
  kv.set("k", static_cast<std::uint64_t>(c.k));
  kv.set("use_sigma_tilde", c.use_sigma_tilde);
  kv.set("sigma_samples", static_cast<std::uint64_t>(c.sigma_samples));
  kv.set("noise", to_string(c.noise));
  return kv;
}

SamplerConfig sampler_config_from(const KeyValues& kv, SamplerConfig c, bool strict) {
  Reader r(kv);
  r.count("m", c.m);
  r.count("k", c.k);
  r.flag("use_sigma_tilde", c.use_sigma_tilde);
  r.count("sigma_samples", c.sigma_samples);
  r.apply("noise", [&](const std::string& v) { c.noise = parse_noise_kind(v); });
  if (strict) r.finish("sampler");
  return c;
}

KeyValues to_key_values(const StudentConfig& c) {
  KeyValues kv;
  kv.set("mode", to_string(c.mode));
  kv.set("lambda", c.lambda);
  kv.set("init_from_teacher", c.init_from_teacher);
  kv.set("augmentation", c.augmentation.enabled);
  kv.set("jitter_range", c.augmentation.jitter_range);
  put_train(kv, c.train);
  return kv;
}

StudentConfig student_config_from(const KeyValues& kv, StudentConfig c, bool strict) {
  Reader r(kv);
  r.apply("mode", [&](const std::string& v) { c.mode = parse_student_mode(v); });
  r.number("lambda", c.lambda);
  r.flag("init_from_teacher", c.init_from_teacher);
  r.flag("augmentation", c.augmentation.enabled);
  r.number("jitter_range", c.augmentation.jitter_range);
  read_train(r, c.train);
  if (strict) r.finish("student");
  return c;
}

KeyValues RunConfig::to_key_values() const {
  KeyValues kv;
  kv.set("run.experiment", experiment);
  if (seed) kv.set("run.seed", *seed);
  kv.set("run.out_dir", out_dir.string());
  kv.set("run.ablation", distillnn::to_string(ablation));

  kv.set("dataset.task", distillnn::to_string(dataset.task));
  kv.set("dataset.train_size", static_cast<std::uint64_t>(dataset.train_size));
  kv.set("dataset.eval_size", static_cast<std::uint64_t>(dataset.eval_size));
  kv.set("dataset.num_classes", dataset.num_classes);
  std::string held;
  for (int c : dataset.held_out) held += (held.empty() ? "" : ",") + std::to_string(c);
  kv.set("dataset.held_out", held);
  kv.set("dataset.eval_split", distillnn::to_string(dataset.eval_split));

  kv.merge(distillnn::to_key_values(teacher), "teacher.");
  kv.merge(distillnn::to_key_values(sampler), "sampler.");
  kv.merge(distillnn::to_key_values(student), "student.");

  kv.set("metrics.teacher_samples", static_cast<std::uint64_t>(metrics.teacher_samples));
  kv.set("metrics.logit_samples", static_cast<std::uint64_t>(metrics.logit_samples));
  kv.set("metrics.reliability_bins", static_cast<std::uint64_t>(metrics.reliability_bins));
  kv.set("metrics.coverage_levels", static_cast<std::uint64_t>(metrics.coverage_levels));
  kv.set("metrics.teacher_cdf_noise", distillnn::to_string(metrics.teacher_cdf_noise));
  kv.set("metrics.measure_timing", metrics.measure_timing);
  kv.set("metrics.timing_warmup", static_cast<std::uint64_t>(metrics.timing_warmup));
  kv.set("metrics.timing_repeats", static_cast<std::uint64_t>(metrics.timing_repeats));
  return kv;
}

RunConfig RunConfig::from_key_values(const KeyValues& kv) {
  static const std::set<std::string> kSections = {"run", "dataset", "teacher", "sampler", "student", "metrics"};
  for (const auto& [key, value] : kv.entries()) {
    const auto dot = key.find('.');
    if (dot == std::string::npos || !kSections.count(key.substr(0, dot)))
      throw ContractError("unknown config key '" + key + "'");
  }

  RunConfig c;
  {
    const KeyValues s = section(kv, "run");
    Reader r(s);
    r.apply("experiment", [&](const std::string& v) { c.experiment = v; });
    r.apply("seed", [&](const std::string&) { c.seed = s.get_uint("seed"); });
    r.apply("out_dir", [&](const std::string& v) { c.out_dir = v; });
    r.apply("ablation", [&](const std::string& v) { c.ablation = parse_ablation_kind(v); });
    r.finish("run");
  }
  {
    const KeyValues s = section(kv, "dataset");
    Reader r(s);
    r.apply("task", [&](const std::string& v) { c.dataset.task = parse_task(v); });
    r.count("train_size", c.dataset.train_size);
    r.count("eval_size", c.dataset.eval_size);
    r.apply("num_classes", [&](const std::string&) { c.dataset.num_classes = static_cast<int>(s.get_int("num_classes")); });
    r.apply("held_out", [&](const std::string& v) {
      c.dataset.held_out.clear();
      for (long long h : split_ints(v)) c.dataset.held_out.insert(static_cast<int>(h));
    });
    r.apply("eval_split", [&](const std::string& v) { c.dataset.eval_split = parse_split(v); });
    r.finish("dataset");
  }
  c.teacher = teacher_config_from(section(kv, "teacher"), c.teacher);
  c.sampler = sampler_config_from(section(kv, "sampler"), c.sampler);
  c.student = student_config_from(section(kv, "student"), c.student);
  {
    const KeyValues s = section(kv, "metrics");
    Reader r(s);
    r.count("teacher_samples", c.metrics.teacher_samples);
    r.count("logit_samples", c.metrics.logit_samples);
    r.count("reliability_bins", c.metrics.reliability_bins);
    r.count("coverage_levels", c.metrics.coverage_levels);
    r.apply("teacher_cdf_noise", [&](const std::string& v) { c.metrics.teacher_cdf_noise = parse_noise_kind(v); });
    r.flag("measure_timing", c.metrics.measure_timing);
    r.count("timing_warmup", c.metrics.timing_warmup);
    r.count("timing_repeats", c.metrics.timing_repeats);
    r.finish("metrics");
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw ContractError("config file not found: " + path.string());
  const KeyValues kv = KeyValues::read(path);
  if (!kv.contains("command")) return from_key_values(kv);
  // A run manifest: its config.* entries are the full resolved config.
  KeyValues config;
  for (const auto& [key, value] : kv.entries())
    if (key.rfind("config.", 0) == 0) config.set(key.substr(7), value);
  return from_key_values(config);
}

void RunConfig::validate() const {
  if (dataset.train_size == 0 || dataset.eval_size == 0) throw ContractError("dataset sizes must be >= 1");
  if (dataset.task == Task::classification) {
    if (dataset.num_classes < 2) throw ContractError("dataset.num_classes must be >= 2");
    for (int c : dataset.held_out)
      if (c < 0 || c >= dataset.num_classes) throw ContractError("dataset.held_out class out of range");
    if (static_cast<int>(dataset.held_out.size()) >= dataset.num_classes)
      throw ContractError("dataset.held_out removes every class");
    if (dataset.eval_split == SplitKind::gap) throw ContractError("classification has no gap split");
  } else if (!dataset.held_out.empty()) {
    throw ContractError("dataset.held_out only applies to classification");
  }
  teacher.validate();
  sampler.validate(teacher.aleatoric_head);
  student.validate();
  if (metrics.teacher_samples == 0) throw ContractError("metrics.teacher_samples must be >= 1");
  if (metrics.logit_samples < 2) throw ContractError("metrics.logit_samples must be >= 2");
  if (metrics.reliability_bins == 0 || metrics.coverage_levels == 0)
    throw ContractError("metrics bin counts must be >= 1");
}

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw ContractError("no seed given: set run.seed in the config or pass --seed");
  return *seed;
}

}  // namespace distillnn

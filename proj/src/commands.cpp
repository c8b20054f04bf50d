#include "distillnn/commands.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <thread>

#include "distillnn/errors.hpp"
#include "distillnn/evaluation.hpp"
#include "distillnn/persistence.hpp"

#ifndef DISTILLNN_VERSION
#define DISTILLNN_VERSION "0.0.0"
#endif

namespace distillnn {

const char* library_version() { return DISTILLNN_VERSION; }

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void say(const CommandOptions& o, const std::string& msg) {
  if (o.log) *o.log << msg << '\n';
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<double>& losses) {
  std::string out = "epoch,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) out += std::to_string(i) + "," + format_double(losses[i]) + "\n";
  write_file_atomic(path, out);
}

RunManifest start_manifest(const std::string& command, const RunConfig& config, const RunStreams& streams) {
  RunManifest m;
  m.command = command;
  m.config = config.to_key_values();
  m.seeds = streams.seeds();
  return m;
}

std::filesystem::path prepare_out(const RunConfig& config) {
  std::filesystem::create_directories(config.out_dir);
  return config.out_dir;
}

void require_task(const RunConfig& config, Task model_task, const char* what) {
  if (model_task != config.dataset.task)
    throw ContractError(std::string(what) + " task (" + to_string(model_task) + ") does not match dataset task (" +
                        to_string(config.dataset.task) + ")");
}

std::string csv_escape(const std::string& v) {
  if (v.find_first_of(",\"\n") == std::string::npos) return v;
  std::string out = "\"";
  for (char c : v) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

RunStreams::RunStreams(std::uint64_t root_seed)
    : root(root_seed),
      data(Rng(root_seed).split("data")),
      teacher_init(Rng(root_seed).split("teacher-init")),
      dropout(Rng(root_seed).split("dropout")),
      sampler(Rng(root_seed).split("sampler")),
      student(Rng(root_seed).split("student")),
      eval(Rng(root_seed).split("eval")) {}

KeyValues RunStreams::seeds() const {
  KeyValues kv;
  kv.set("root", root);
  kv.set("data", data.seed());
  kv.set("teacher-init", teacher_init.seed());
  kv.set("dropout", dropout.seed());
  kv.set("sampler", sampler.seed());
  kv.set("student", student.seed());
  kv.set("eval", eval.seed());
  return kv;
}

RunData make_run_data(const RunConfig& config, const RunStreams& streams) {
  const DatasetConfig& d = config.dataset;
  const std::uint64_t train_seed = streams.data.split("train").seed();
  const std::uint64_t eval_seed = streams.data.split("eval").seed();
  RunData out;
  if (d.task == Task::regression) {
    out.train = to_training_data(gen_regression(static_cast<long>(d.train_size), {SplitKind::train, {}, train_seed}));
    out.eval = to_training_data(gen_regression(static_cast<long>(d.eval_size), {d.eval_split, {}, eval_seed}));
    return out;
  }
  out.train = to_training_data(
      gen_classification(static_cast<long>(d.train_size), d.num_classes, {SplitKind::train, d.held_out, train_seed}));
  ClassificationDataset eval =
      gen_classification(static_cast<long>(d.eval_size), d.num_classes, {d.eval_split, d.held_out, eval_seed});
  ClassificationDataset kept;
  kept.num_classes = eval.num_classes;
  for (std::size_t i = 0; i < eval.size(); ++i)
    if (!d.held_out.count(eval.labels[i])) {
      kept.x.push_back(eval.x[i]);
      kept.labels.push_back(eval.labels[i]);
    }
  out.eval = to_training_data(kept);
  return out;
}

ClassificationDataset make_outlier_data(const RunConfig& config, const RunStreams& streams) {
  const DatasetConfig& d = config.dataset;
  if (d.task != Task::classification) throw ContractError("outlier data needs a classification dataset");
  return gen_classification(static_cast<long>(d.eval_size), d.num_classes,
                            {SplitKind::test, d.held_out, streams.data.split("outlier").seed()});
}

KeyValues RunManifest::to_key_values() const {
  KeyValues kv;
  kv.set("command", command);
  kv.set("library_version", library_version());
  kv.merge(seeds, "seed.");
  for (const auto& [phase, secs] : timings) kv.set("timing." + phase + "_seconds", secs);
  for (const auto& [name, path] : checkpoints) kv.set("checkpoint." + name, path.string());
  kv.merge(extra);
  kv.merge(config, "config.");
  return kv;
}

void RunManifest::write(const std::filesystem::path& path) const { to_key_values().write(path); }

RunConfig resolve_config(const CommandOptions& options) {
  RunConfig config = options.config ? RunConfig::load(*options.config) : RunConfig{};
  if (options.seed) config.seed = *options.seed;
  if (options.out) config.out_dir = *options.out;
  if (options.mode) config.student.mode = *options.mode;
  if (options.ablation) config.ablation = *options.ablation;
  config.validate();
  config.require_seed();
  return config;
}

int cmd_train_teacher(const CommandOptions& options) {
  const RunConfig config = resolve_config(options);
  const RunStreams streams(*config.seed);
  const auto dir = prepare_out(config);
  RunManifest manifest = start_manifest("train-teacher", config, streams);

  auto t0 = Clock::now();
  const RunData data = make_run_data(config, streams);
  manifest.timings.emplace_back("data", seconds_since(t0));

  Rng init = streams.teacher_init;
  Rng dropout = streams.dropout;
  std::vector<double> losses;
  t0 = Clock::now();
  say(options, "training " + to_string(config.teacher.kind) + " teacher on " + std::to_string(data.train.size()) +
                   " points");
  const TeacherModel teacher = train_teacher(config.teacher, data.train, init, dropout, &losses);
  manifest.timings.emplace_back("train", seconds_since(t0));

  const auto ckpt = dir / "teacher.ckpt";
  const auto files = save_teacher(ckpt, teacher);
  for (std::size_t i = 0; i < teacher.size(); ++i)
    manifest.checkpoints.emplace_back("member" + std::to_string(i), files[2 * i]);
  manifest.checkpoints.emplace_back("teacher", ckpt);
  write_loss_csv(dir / "teacher_loss.csv", losses);
  manifest.extra.set("output.loss_csv", (dir / "teacher_loss.csv").string());
  manifest.extra.set("final_loss", losses.empty() ? 0.0 : losses.back());
  manifest.write(dir / "train-teacher.manifest");
  say(options, "wrote " + ckpt.string());
  return kExitOk;
}

int cmd_distill(const CommandOptions& options) {
  const RunConfig config = resolve_config(options);
  if (!options.teacher) throw ContractError("distill needs --teacher CKPT");
  const RunStreams streams(*config.seed);
  const auto dir = prepare_out(config);
  RunManifest manifest = start_manifest("distill", config, streams);

  const TeacherModel teacher = load_teacher(*options.teacher);
  require_task(config, teacher.task(), "teacher");
  const RunData data = make_run_data(config, streams);
  if (data.train.output_dim() != teacher.output_dim()) throw ContractError("teacher output size does not match the dataset");

  Rng student_rng = streams.student;
  Rng sampler_rng = streams.sampler;
  std::vector<double> losses;
  auto t0 = Clock::now();
  say(options, "distilling " + to_string(config.student.mode) + " student");
  const StudentModel student =
      train_student(teacher, data.train, config.student, config.sampler, student_rng, sampler_rng, &losses);
  manifest.timings.emplace_back("train", seconds_since(t0));

  const auto ckpt = dir / "student.ckpt";
  save_student(ckpt, student);
  write_loss_csv(dir / "student_loss.csv", losses);
  manifest.checkpoints.emplace_back("teacher_input", *options.teacher);
  manifest.checkpoints.emplace_back("student", ckpt);
  manifest.extra.set("mode", to_string(student.config().mode));
  manifest.extra.set("augmentation", student.config().augmentation.enabled);
  manifest.extra.set("output.loss_csv", (dir / "student_loss.csv").string());
  manifest.extra.set("final_loss", losses.empty() ? 0.0 : losses.back());
  manifest.write(dir / "distill.manifest");
  say(options, "wrote " + ckpt.string());
  return kExitOk;
}

int cmd_evaluate(const CommandOptions& options) {
  const RunConfig config = resolve_config(options);
  if (options.teacher.has_value() == options.student.has_value())
    throw ContractError("evaluate needs exactly one of --teacher CKPT or --student CKPT");
  const RunStreams streams(*config.seed);
  const auto dir = prepare_out(config);
  const std::string role = options.teacher ? "teacher" : "student";
  RunManifest manifest = start_manifest("evaluate", config, streams);
  const auto path = options.teacher ? *options.teacher : *options.student;
  if (checkpoint_role(path) != role) throw ContractError(path.string() + " is not a " + role + " checkpoint");

  const RunData data = make_run_data(config, streams);
  Rng eval_rng = streams.eval;
  auto t0 = Clock::now();
  Evaluation ev;
  if (options.teacher) {
    const TeacherModel teacher = load_teacher(path);
    require_task(config, teacher.task(), "teacher");
    ev = evaluate_teacher(teacher, data.eval, config.metrics, eval_rng);
  } else {
    const StudentModel student = load_student(path);
    require_task(config, student.task(), "student");
    ev = evaluate_student(student, data.eval, config.metrics, eval_rng);
  }
  manifest.timings.emplace_back("evaluate", seconds_since(t0));
  for (const std::string& w : ev.report.warnings) say(options, "warning: " + w);

  const auto report = dir / (role + "_report.txt");
  ev.report.to_key_values().write(report);
  const auto curves = write_curves(dir, ev.curves, role + "_");
  manifest.checkpoints.emplace_back(role, path);
  manifest.extra.set("output.report", report.string());
  for (std::size_t i = 0; i < curves.size(); ++i) manifest.extra.set("output.curve." + std::to_string(i), curves[i].string());
  manifest.write(dir / ("evaluate-" + role + ".manifest"));
  say(options, "wrote " + report.string());
  return kExitOk;
}

std::vector<double> ablation_grid(AblationKind kind) {
  switch (kind) {
    case AblationKind::samples_m: return {1, 2, 5, 10, 20};
    case AblationKind::lambda: return {0, 0.25, 0.5, 1, 2, 4};
    case AblationKind::augmentation: return {0, 1};
  }
  return {};
}

std::size_t sweep_threads() {
  const char* env = std::getenv("DISTILLNN_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 1) throw ContractError("DISTILLNN_THREADS must be a positive integer");
  return static_cast<std::size_t>(v);
}

int cmd_ablate(const CommandOptions& options) {
  const RunConfig config = resolve_config(options);
  const RunStreams streams(*config.seed);
  const auto dir = prepare_out(config);
  const AblationKind kind = config.ablation;
  const std::string name = to_string(kind);
  RunManifest manifest = start_manifest("ablate", config, streams);
  manifest.extra.set("ablation", name);

  const RunData data = make_run_data(config, streams);
  auto t0 = Clock::now();
  TeacherModel teacher = [&] {
    if (options.teacher) {
      manifest.checkpoints.emplace_back("teacher_input", *options.teacher);
      return load_teacher(*options.teacher);
    }
    say(options, "no --teacher given, training one from the config");
    Rng init = streams.teacher_init;
    Rng dropout = streams.dropout;
    TeacherModel t = train_teacher(config.teacher, data.train, init, dropout);
    save_teacher(dir / "teacher.ckpt", t);
    manifest.checkpoints.emplace_back("teacher", dir / "teacher.ckpt");
    return t;
  }();
  require_task(config, teacher.task(), "teacher");
  manifest.timings.emplace_back("teacher", seconds_since(t0));

  const std::vector<double> grid = ablation_grid(kind);
  struct Row {
    bool ok = false;
    std::string error;
    double first_loss = 0.0, final_loss = 0.0;
    KeyValues report;
  };
  std::vector<Row> rows(grid.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto run_point = [&](std::size_t i) {
    Row& row = rows[i];
    try {
      StudentConfig scfg = config.student;
      SamplerConfig smp = config.sampler;
      switch (kind) {
        case AblationKind::samples_m: smp.m = static_cast<std::size_t>(grid[i]); break;
        case AblationKind::lambda: scfg.lambda = grid[i]; break;
        case AblationKind::augmentation: scfg.augmentation.enabled = grid[i] != 0.0; break;
      }
      // Every point reuses the same streams so only the swept setting differs.
      Rng student_rng = streams.student;
      Rng sampler_rng = streams.sampler;
      Rng eval_rng = streams.eval;
      std::vector<double> losses;
      const StudentModel student = train_student(teacher, data.train, scfg, smp, student_rng, sampler_rng, &losses);
      const Evaluation ev = evaluate_student(student, data.eval, config.metrics, eval_rng);
      row.first_loss = losses.front();
      row.final_loss = losses.back();
      if (!std::isfinite(row.final_loss)) throw TrainingError("final loss is not finite", losses.size());
      row.report = ev.report.to_key_values();
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    std::lock_guard lock(log_mutex);
    say(options, name + "=" + format_double(grid[i]) + (row.ok ? " done" : " failed: " + row.error));
  };

  t0 = Clock::now();
  const std::size_t workers = std::min(sweep_threads(), grid.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < grid.size(); ++i) run_point(i);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < grid.size();) run_point(i);
      });
  }
  manifest.timings.emplace_back("sweep", seconds_since(t0));

  // Header from a blank report of this task so failed rows line up.
  EvalReport blank;
  blank.task = config.dataset.task;
  const KeyValues blank_kv = blank.to_key_values();
  std::vector<std::string> fields;
  for (const auto& [key, value] : blank_kv.entries())
    if (key != "warnings") fields.push_back(key);
  std::string csv = "parameter,value,status,error,first_loss,final_loss";
  for (const std::string& f : fields) csv += "," + f;
  csv += "\n";
  std::size_t failed = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Row& r = rows[i];
    csv += name + "," + format_double(grid[i]) + "," + (r.ok ? "ok" : "failed") + "," + csv_escape(r.error) + ",";
    csv += r.ok ? format_double(r.first_loss) + "," + format_double(r.final_loss) : std::string(",");
    for (const std::string& f : fields) csv += "," + (r.ok ? csv_escape(r.report.find(f).value_or("")) : std::string());
    csv += "\n";
    if (!r.ok) ++failed;
  }
  const auto out = dir / ("ablate_" + name + ".csv");
  write_file_atomic(out, csv);
  manifest.extra.set("output.sweep_csv", out.string());
  manifest.extra.set("points", static_cast<std::uint64_t>(grid.size()));
  manifest.extra.set("failed_points", static_cast<std::uint64_t>(failed));
  manifest.extra.set("threads", static_cast<std::uint64_t>(std::max<std::size_t>(workers, 1)));
  manifest.write(dir / ("ablate-" + name + ".manifest"));
  say(options, "wrote " + out.string());
  return failed ? kExitPartial : kExitOk;
}

int cmd_outlier_eval(const CommandOptions& options) {
  const RunConfig config = resolve_config(options);
  if (config.dataset.task != Task::classification) throw ContractError("outlier-eval needs a classification dataset");
  if (config.dataset.held_out.empty()) throw ContractError("outlier-eval needs dataset.held_out classes");
  if (!options.teacher || !options.student) throw ContractError("outlier-eval needs --teacher and --student");
  const RunStreams streams(*config.seed);
  const auto dir = prepare_out(config);
  RunManifest manifest = start_manifest("outlier-eval", config, streams);

  const TeacherModel teacher = load_teacher(*options.teacher);
  const StudentModel student = load_student(*options.student);
  require_task(config, teacher.task(), "teacher");
  require_task(config, student.task(), "student");
  const ClassificationDataset points = make_outlier_data(config, streams);
  const TrainingData td = to_training_data(points);
  const auto& held = config.dataset.held_out;

  KeyValues report;
  report.set("units.bald", "nats");
  report.set("units.js", "bits");
  std::string csv = "model,index,label,outlier,bald\n";
  auto record = [&](const std::string& model, const std::vector<double>& b) {
    const OutlierSeparation sep = outlier_separation(b, points.labels, held);
    report.set("js_" + model, sep.js);
    report.set("mean_inlier_" + model, sep.mean_inlier);
    report.set("mean_outlier_" + model, sep.mean_outlier);
    report.set("relative_mean_" + model, sep.relative_mean);
    report.set("inliers", static_cast<std::uint64_t>(sep.inliers));
    report.set("outliers", static_cast<std::uint64_t>(sep.outliers));
    for (std::size_t i = 0; i < b.size(); ++i)
      csv += model + "," + std::to_string(i) + "," + std::to_string(points.labels[i]) + "," +
             (held.count(points.labels[i]) ? "1" : "0") + "," + format_double(b[i]) + "\n";
    return sep;
  };

  Rng eval_rng = streams.eval;
  Rng teacher_rng = eval_rng.split("teacher");
  Rng student_rng = eval_rng.split("student");
  const auto ts = record("teacher", teacher_bald(teacher, td.inputs, config.metrics.teacher_samples, teacher_rng));
  const auto ss = record("student", student_bald(student, td.inputs, config.metrics.logit_samples, student_rng));
  report.set("js_student_ge_teacher", ss.js >= ts.js);
  manifest.checkpoints.emplace_back("teacher_input", *options.teacher);
  manifest.checkpoints.emplace_back("student_input", *options.student);

  if (options.reference) {
    Rng ref_rng = eval_rng.split("reference");
    const std::string role = checkpoint_role(*options.reference);
    std::vector<double> b;
    if (role == "teacher") {
      const TeacherModel ref = load_teacher(*options.reference);
      require_task(config, ref.task(), "reference");
      b = teacher_bald(ref, td.inputs, config.metrics.teacher_samples, ref_rng);
    } else {
      const StudentModel ref = load_student(*options.reference);
      require_task(config, ref.task(), "reference");
      b = student_bald(ref, td.inputs, config.metrics.logit_samples, ref_rng);
    }
    record("reference", b);
    manifest.checkpoints.emplace_back("reference_input", *options.reference);
  }

  const auto out = dir / "outlier_report.txt";
  report.write(out);
  write_file_atomic(dir / "outlier_bald.csv", csv);
  manifest.extra.set("output.report", out.string());
  manifest.extra.set("output.bald_csv", (dir / "outlier_bald.csv").string());
  manifest.write(dir / "outlier-eval.manifest");
  say(options, "wrote " + out.string());
  return kExitOk;
}

int cmd_print_defaults(std::ostream& out) {
  out << "# distillnn " << library_version() << " defaults\n";
  out << "# run.seed has no default: set it here or pass --seed\n";
  out << RunConfig{}.to_key_values().to_sectioned_string();
  return kExitOk;
}

int run_command(const std::function<int()>& command, std::ostream& err) {
  try {
    return command();
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return kExitContract;
  } catch (const ScheduleExhaustedError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitContract;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace distillnn

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "distillnn/commands.hpp"
#include "distillnn/errors.hpp"

using namespace distillnn;

namespace {

struct Flags {
  std::string config, out, teacher, student, reference, mode, ablation;
  std::uint64_t seed = 0;
};

void add_common(CLI::App* cmd, Flags& f, bool teacher, bool student) {
  cmd->add_option("--config", f.config, "Run config file");
  cmd->add_option("--seed", f.seed, "Root seed (overrides run.seed)");
  cmd->add_option("--out", f.out, "Output directory (overrides run.out_dir)");
  if (teacher) cmd->add_option("--teacher", f.teacher, "Teacher checkpoint");
  if (student) cmd->add_option("--student", f.student, "Student checkpoint");
  cmd->add_option("--mode", f.mode, "Student mode")->check(CLI::IsMember({"full", "dd"}));
}

CommandOptions to_options(const CLI::App& cmd, const Flags& f) {
  CommandOptions o;
  o.log = &std::cerr;
  auto given = [&](const char* name) {
    const CLI::Option* opt = cmd.get_option_no_throw(name);
    return opt && opt->count() > 0;
  };
  if (given("--config")) o.config = f.config;
  if (given("--seed")) o.seed = f.seed;
  if (given("--out")) o.out = f.out;
  if (given("--teacher")) o.teacher = f.teacher;
  if (given("--student")) o.student = f.student;
  if (given("--reference")) o.reference = f.reference;
  if (given("--mode")) o.mode = parse_student_mode(f.mode);
  if (given("kind")) o.ablation = parse_ablation_kind(f.ablation);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distils a sampling-based Bayesian teacher into a single-pass student."};
  app.set_version_flag("--version", std::string(library_version()));
  app.require_subcommand(1);

  Flags f;
  std::map<CLI::App*, std::function<int(const CommandOptions&)>> commands;

  auto* train = app.add_subcommand("train-teacher", "Train an MC-dropout or ensemble teacher");
  add_common(train, f, false, false);
  commands[train] = cmd_train_teacher;

  auto* distill = app.add_subcommand("distill", "Distil a teacher checkpoint into a student");
  add_common(distill, f, true, false);
  commands[distill] = cmd_distill;

  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a teacher or student checkpoint");
  add_common(evaluate, f, true, true);
  commands[evaluate] = cmd_evaluate;

  auto* ablate = app.add_subcommand("ablate", "Sweep m, lambda or augmentation");
  add_common(ablate, f, true, false);
  ablate->add_option("kind", f.ablation, "samples_m, lambda or augmentation (default run.ablation)");
  commands[ablate] = cmd_ablate;

  auto* outlier = app.add_subcommand("outlier-eval", "BALD separation of held-out classes");
  add_common(outlier, f, true, true);
  outlier->add_option("--reference", f.reference, "Optional reference checkpoint trained on all classes");
  commands[outlier] = cmd_outlier_eval;

  auto* defaults = app.add_subcommand("print-defaults", "Print every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitContract;
  }

  if (defaults->parsed()) return cmd_print_defaults(std::cout);
  for (const auto& [cmd, fn] : commands)
    if (cmd->parsed())
      return run_command([&, cmd = cmd, fn = fn] { return fn(to_options(*cmd, f)); }, std::cerr);
  return kExitContract;
}

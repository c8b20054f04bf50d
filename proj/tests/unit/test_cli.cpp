#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "distillnn/kvtext.hpp"
#include "support.hpp"

using distillnn::KeyValues;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(DISTILLNN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// A few epochs on a few hundred points: enough to exercise every command quickly.
fs::path write_config(const fs::path& dir, const std::string& name, const std::string& extra) {
  const fs::path p = dir / name;
  std::ofstream(p) << "[run]\nseed = 7\nout_dir = " << (dir / "out").string()
                   << "\n[teacher]\nepochs = 4\nhidden = 16,16\n[student]\nepochs = 3\n"
                      "[dataset]\ntrain_size = 200\neval_size = 100\n[metrics]\ntiming_repeats = 2\ntiming_warmup = 1\n"
                   << extra;
  return p;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("cli exit codes for bad input") {
  const fs::path dir = testing::scratch_dir("cli_errors");
  CHECK(run("train-teacher --config " + q(dir / "missing.cfg") + " --seed 1") == 2);
  CHECK(run("") == 2);
  CHECK(run("print-defaults") == 0);
  std::ofstream(dir / "noseed.cfg") << "[teacher]\nepochs = 1\n";
  CHECK(run("train-teacher --config " + q(dir / "noseed.cfg")) == 2);
  std::ofstream(dir / "typo.cfg") << "[teacher]\nepoch = 1\n";
  CHECK(run("train-teacher --seed 1 --config " + q(dir / "typo.cfg")) == 2);
  CHECK(run("distill --seed 1 --mode sometimes") == 2);
  std::ofstream(dir / "diverge.cfg")
      << "[run]\nseed = 1\nout_dir = " << (dir / "d").string()
      << "\n[teacher]\nepochs = 3\nlearning_rate = 1e12\nmax_grad_norm = 0\n[dataset]\ntrain_size = 64\n";
  CHECK(run("train-teacher --config " + q(dir / "diverge.cfg")) == 3);
  CHECK(run("ablate --seed 1 --config " + q(dir / "missing.cfg")) == 2);
}

TEST_CASE("regression pipeline through the cli") {
  const fs::path dir = testing::scratch_dir("cli_regression");
  const fs::path cfg = write_config(dir, "run.cfg", "");
  const fs::path out = dir / "out";
  REQUIRE(run("train-teacher --config " + q(cfg)) == 0);
  CHECK(fs::exists(out / "teacher.ckpt"));
  CHECK(fs::exists(out / "teacher_loss.csv"));
  const KeyValues tm = KeyValues::read(out / "train-teacher.manifest");
  CHECK(tm.at("command") == "train-teacher");
  CHECK(tm.contains("library_version"));
  CHECK(tm.contains("seed.sampler"));
  CHECK(tm.contains("timing.train_seconds"));
  CHECK(tm.at("config.run.seed") == "7");

  // Same config and seed: byte-identical checkpoint.
  REQUIRE(run("train-teacher --config " + q(cfg) + " --out " + q(dir / "again")) == 0);
  CHECK(slurp(out / "teacher.member0.ckpt.params") == slurp(dir / "again" / "teacher.member0.ckpt.params"));
  CHECK(slurp(out / "teacher.member0.ckpt") == slurp(dir / "again" / "teacher.member0.ckpt"));
  // The manifest alone reproduces the run.
  REQUIRE(run("train-teacher --config " + q(out / "train-teacher.manifest") + " --out " + q(dir / "replay")) == 0);
  CHECK(slurp(out / "teacher.member0.ckpt.params") == slurp(dir / "replay" / "teacher.member0.ckpt.params"));
  // A different seed changes it.
  REQUIRE(run("train-teacher --config " + q(cfg) + " --seed 8 --out " + q(dir / "other")) == 0);
  CHECK(slurp(out / "teacher.member0.ckpt.params") != slurp(dir / "other" / "teacher.member0.ckpt.params"));

  const std::string teacher = " --teacher " + q(out / "teacher.ckpt");
  REQUIRE(run("distill --config " + q(cfg) + teacher) == 0);
  CHECK(KeyValues::read(out / "distill.manifest").at("mode") == "full");
  CHECK(KeyValues::read(out / "distill.manifest").at("config.sampler.m") == "5");
  CHECK(KeyValues::read(out / "distill.manifest").at("config.sampler.k") == "10");
  REQUIRE(run("distill --config " + q(cfg) + teacher + " --mode dd --out " + q(dir / "dd")) == 0);
  CHECK(KeyValues::read(dir / "dd" / "distill.manifest").at("mode") == "dd");

  REQUIRE(run("evaluate --config " + q(cfg) + teacher) == 0);
  const KeyValues tr = KeyValues::read(out / "teacher_report.txt");
  CHECK(tr.at("samples") == "50");
  CHECK(tr.contains("timing.inference_seconds"));
  CHECK(fs::exists(out / "teacher_sparsification.csv"));
  CHECK(fs::exists(out / "teacher_coverage.csv"));

  REQUIRE(run("evaluate --config " + q(cfg) + " --student " + q(out / "student.ckpt")) == 0);
  const KeyValues sr = KeyValues::read(out / "student_report.txt");
  CHECK(sr.at("samples") == "1");
  CHECK(sr.at("uncertainty.mean_total") != "unavailable");

  // dd regression: uncertainty metrics unavailable, still exit 0.
  REQUIRE(run("evaluate --config " + q(cfg) + " --student " + q(dir / "dd" / "student.ckpt") + " --out " +
              q(dir / "dd")) == 0);
  const KeyValues dr = KeyValues::read(dir / "dd" / "student_report.txt");
  CHECK(dr.at("uncertainty.mean_total") == "unavailable");
  CHECK(dr.at("uncertainty.ece") == "unavailable");
  CHECK(dr.at("warnings") == "1");

  // Role and task checks.
  CHECK(run("evaluate --config " + q(cfg) + " --teacher " + q(out / "student.ckpt")) == 2);
  CHECK(run("evaluate --config " + q(cfg)) == 2);
  CHECK(run("outlier-eval --config " + q(cfg) + teacher + " --student " + q(out / "student.ckpt")) == 2);
  const fs::path cls = write_config(dir, "cls.cfg", "[dataset]\ntask = classification\n");
  CHECK(run("distill --config " + q(cls) + teacher + " --out " + q(dir / "mismatch")) == 2);

  // Sweeps reuse the teacher and write one row per grid point.
  REQUIRE(run("ablate augmentation --config " + q(cfg) + teacher) == 0);
  const std::string aug = slurp(out / "ablate_augmentation.csv");
  CHECK(std::count(aug.begin(), aug.end(), '\n') == 3);
  REQUIRE(run("ablate samples_m --config " + q(cfg) + teacher) == 0);
  const std::string m = slurp(out / "ablate_samples_m.csv");
  CHECK(std::count(m.begin(), m.end(), '\n') == 6);
  CHECK(m.find("samples_m,1,ok") != std::string::npos);
  CHECK(m.find("samples_m,20,ok") != std::string::npos);
}

TEST_CASE("ensemble teacher writes five member checkpoints") {
  const fs::path dir = testing::scratch_dir("cli_ensemble");
  const fs::path cfg = write_config(dir, "run.cfg", "[teacher]\nkind = ensemble\n");
  REQUIRE(run("train-teacher --config " + q(cfg)) == 0);
  for (int i = 0; i < 5; ++i) CHECK(fs::exists(dir / "out" / ("teacher.member" + std::to_string(i) + ".ckpt")));
  CHECK_FALSE(fs::exists(dir / "out" / "teacher.member5.ckpt"));
  CHECK(KeyValues::read(dir / "out" / "train-teacher.manifest").contains("checkpoint.member4"));
}

TEST_CASE("classification pipeline and outlier evaluation") {
  const fs::path dir = testing::scratch_dir("cli_classification");
  const fs::path cfg =
      write_config(dir, "run.cfg", "[dataset]\ntask = classification\nnum_classes = 4\nheld_out = 3\n");
  const fs::path out = dir / "out";
  REQUIRE(run("train-teacher --config " + q(cfg)) == 0);
  const std::string teacher = " --teacher " + q(out / "teacher.ckpt");
  REQUIRE(run("distill --config " + q(cfg) + teacher) == 0);
  REQUIRE(run("evaluate --config " + q(cfg) + " --student " + q(out / "student.ckpt")) == 0);
  const KeyValues sr = KeyValues::read(out / "student_report.txt");
  CHECK(sr.at("samples") == "50");
  CHECK(sr.at("uncertainty.measure") == "bald");
  CHECK(fs::exists(out / "student_reliability.csv"));

  const std::string both = teacher + " --student " + q(out / "student.ckpt");
  REQUIRE(run("outlier-eval --config " + q(cfg) + both) == 0);
  const KeyValues rep = KeyValues::read(out / "outlier_report.txt");
  CHECK(rep.contains("js_teacher"));
  CHECK(rep.contains("js_student"));
  CHECK(rep.contains("relative_mean_teacher"));
  CHECK_FALSE(rep.contains("js_reference"));
  REQUIRE(run("outlier-eval --config " + q(cfg) + both + " --reference " + q(out / "teacher.ckpt")) == 0);
  CHECK(KeyValues::read(out / "outlier_report.txt").contains("js_reference"));

  // Empty held-out set: no outliers to separate.
  const fs::path none = write_config(dir, "none.cfg", "[dataset]\ntask = classification\n");
  CHECK(run("outlier-eval --config " + q(none) + both) == 2);

  // Reports are reproducible apart from wall-clock timing.
  REQUIRE(run("evaluate --config " + q(cfg) + " --student " + q(out / "student.ckpt") + " --out " +
              q(dir / "again")) == 0);
  KeyValues a = KeyValues::read(out / "student_report.txt"), b = KeyValues::read(dir / "again" / "student_report.txt");
  for (const auto& [key, value] : a.entries())
    if (key.rfind("timing.", 0) != 0) CHECK(b.at(key) == value);
}

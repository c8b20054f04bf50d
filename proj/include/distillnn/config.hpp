#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>

#include "distillnn/datasets.hpp"
#include "distillnn/evaluation.hpp"
#include "distillnn/kvtext.hpp"
#include "distillnn/sampler.hpp"
#include "distillnn/student.hpp"
#include "distillnn/teacher.hpp"

namespace distillnn {

struct DatasetConfig {
  Task task = Task::regression;
  std::size_t train_size = 2000;
  std::size_t eval_size = 1000;
  int num_classes = 4;
  /// Classification: classes removed from training, kept for outlier evaluation.
  std::set<int> held_out;
  SplitKind eval_split = SplitKind::test;
};

enum class AblationKind { samples_m, lambda, augmentation };
std::string to_string(AblationKind kind);
AblationKind parse_ablation_kind(const std::string& text);

/// Everything a run needs. Sections: run, dataset, teacher, sampler, student, metrics.
struct RunConfig {
  std::string experiment = "default";
  /// Root seed; every random stream is derived from it. Required before running.
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = "runs/default";

  DatasetConfig dataset;
  TeacherConfig teacher;
  SamplerConfig sampler;
  StudentConfig student = StudentConfig::derived_from(TeacherConfig{});
  EvalOptions metrics;
  AblationKind ablation = AblationKind::lambda;

  /// Every key with its value, seed included only when set.
  KeyValues to_key_values() const;
  /// Starts from defaults, applies every key. Unknown keys or bad values throw ContractError.
  static RunConfig from_key_values(const KeyValues& kv);
  static RunConfig load(const std::filesystem::path& path);

  /// Throws ContractError for inconsistent settings.
  void validate() const;
  std::uint64_t require_seed() const;
};

// Section-level conversions, also used by checkpoint manifests.
KeyValues to_key_values(const TeacherConfig& config);
KeyValues to_key_values(const SamplerConfig& config);
KeyValues to_key_values(const StudentConfig& config);
/// Reads keys without a prefix; unknown keys throw when `strict`.
TeacherConfig teacher_config_from(const KeyValues& kv, TeacherConfig base = {}, bool strict = true);
SamplerConfig sampler_config_from(const KeyValues& kv, SamplerConfig base = {}, bool strict = true);
StudentConfig student_config_from(const KeyValues& kv, StudentConfig base = {}, bool strict = true);

/// Entries whose key starts with `prefix.`, with the prefix removed.
KeyValues section(const KeyValues& kv, const std::string& prefix);

}  // namespace distillnn

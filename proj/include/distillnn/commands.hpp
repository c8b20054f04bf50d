#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "distillnn/config.hpp"
#include "distillnn/kvtext.hpp"
#include "distillnn/rng.hpp"

namespace distillnn {

const char* library_version();

enum ExitCode : int { kExitOk = 0, kExitContract = 2, kExitNumeric = 3, kExitPartial = 4 };

/// Command-line level inputs. Flags override the matching config entries.
struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> teacher;
  std::optional<std::filesystem::path> student;
  std::optional<std::filesystem::path> reference;
  std::optional<StudentMode> mode;
  std::optional<AblationKind> ablation;
  /// Progress and warnings; nullptr silences them.
  std::ostream* log = nullptr;
};

/// Named random streams, all split from one root seed.
struct RunStreams {
  explicit RunStreams(std::uint64_t root);

  std::uint64_t root;
  Rng data;
  Rng teacher_init;
  Rng dropout;
  Rng sampler;
  Rng student;
  Rng eval;

  /// Seeds of every stream, for manifests.
  KeyValues seeds() const;
};

/// Datasets a run needs, generated from the data stream.
struct RunData {
  TrainingData train;
  /// In-distribution evaluation points (held-out classes removed).
  TrainingData eval;
};
RunData make_run_data(const RunConfig& config, const RunStreams& streams);
/// Classification test points with held-out classes kept.
ClassificationDataset make_outlier_data(const RunConfig& config, const RunStreams& streams);

struct RunManifest {
  std::string command;
  KeyValues config;
  KeyValues seeds;
  std::vector<std::pair<std::string, double>> timings;
  std::vector<std::pair<std::string, std::filesystem::path>> checkpoints;
  KeyValues extra;

  KeyValues to_key_values() const;
  /// Atomic write.
  void write(const std::filesystem::path& path) const;
};

/// Loads the config (or defaults when none is given) and applies flag overrides.
RunConfig resolve_config(const CommandOptions& options);

// Each command throws ContractError / NumericError on failure; run_command maps them to exit codes.
int cmd_train_teacher(const CommandOptions& options);
int cmd_distill(const CommandOptions& options);
int cmd_evaluate(const CommandOptions& options);
/// Returns kExitPartial when any grid point failed.
int cmd_ablate(const CommandOptions& options);
int cmd_outlier_eval(const CommandOptions& options);
int cmd_print_defaults(std::ostream& out);

/// Grid values for an ablation, in sweep order.
std::vector<double> ablation_grid(AblationKind kind);

/// Runs `command`, printing any error to `err` and returning the exit code.
int run_command(const std::function<int()>& command, std::ostream& err);

/// Sweep parallelism from DISTILLNN_THREADS (default 1, minimum 1).
std::size_t sweep_threads();

}  // namespace distillnn

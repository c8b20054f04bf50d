#pragma once

#include <filesystem>

#include "distillnn/kvtext.hpp"
#include "distillnn/model.hpp"

namespace distillnn {

/// A model plus free-form metadata stored alongside it in the manifest.
struct Checkpoint {
  MlpModel model;
  KeyValues meta;
};

/// Writes `path` (text manifest: layer kinds, shapes, dropout rates, metadata)
/// and `path` + ".params" (parameters as little-endian f64, layer by layer,
/// weight before bias). Loading then saving reproduces both files byte for byte.
void save_checkpoint(const std::filesystem::path& path, const MlpModel& model, const KeyValues& meta = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::filesystem::path params_path(const std::filesystem::path& manifest);

}  // namespace distillnn

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "reperfq/quantification.hpp"

namespace reperfq {

/// The whole pipeline's configuration in one document. Every field has a
/// default; JSON files with unknown keys are rejected so typos never pass
/// silently. Command-line flags override file values.
struct PipelineConfig {
  quant::ScoreConfig score;
  std::optional<std::string> model_path;
  std::optional<std::string> atlas_dir;
  uint64_t seed = 0;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Loads atlases from a directory: every `<name>.pgm` (or .png) paired with
/// `<name>_mask.pgm` (or .png), sorted by name for determinism.
std::vector<Atlas> load_atlas_dir(const std::filesystem::path& dir);

}  // namespace reperfq

#pragma once

#include <cstdint>
#include <filesystem>

#include "lfvg/grounding.hpp"
#include "lfvg/training.hpp"

namespace lfvg {

// Checkpoint: a directory holding header.json (hyperparameters, grounding
// shape, training config hash, parameter table) and params/<name>.bin, one
// LFVG blob per grounding parameter. Values are stored as float32.

struct Checkpoint {
  TrainConfig config;
  GroundingModel model;
  std::uint64_t config_hash = 0;
};

void save_checkpoint(const std::filesystem::path& dir, const GroundingModel& model, const TrainConfig& cfg);
/// Throws LoadError on a missing file, a shape mismatch or an unknown layout.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace lfvg

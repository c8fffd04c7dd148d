#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "jetssm/dataset.hpp"
#include "jetssm/neural_net.hpp"

namespace jetssm {

/// Versioned snapshot of a trained model: architecture config, every named
/// parameter array (including normalization running statistics), and the
/// dataset normalization stats needed to reproduce inference exactly.
/// On disk: "JSSM" magic, u32 version, u64 header length, JSON header, then
/// raw little-endian float64 arrays in header order.
struct Checkpoint {
  int format_version = 1;
  ModelKind kind = ModelKind::S4D;
  ModelConfig config;
  std::vector<ParamArray> arrays;
  NormStats feature_stats;
  NormStats target_stats;
  bool targets_standardized = true;
  std::uint64_t train_seed = 0;
};

Checkpoint snapshot_model(const Model& model, NormStats feature_stats, NormStats target_stats,
                          bool targets_standardized, std::uint64_t train_seed);

/// Rebuilds the model and copies every array by name; any missing array or
/// shape mismatch raises IncompatibilityError naming the offender.
std::unique_ptr<Model> restore_model(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace jetssm

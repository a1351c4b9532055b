#pragma once

#include <string>
#include <vector>

#include "hrrp/models.hpp"

namespace hrrp {

/// Everything needed to rebuild a trained model and re-derive its data
/// splits: the architecture, the training seed, and the angle source used.
struct CheckpointMeta {
  bool multi_view = false;
  models::BackboneSpec backbone;
  models::SequenceSpec seq;  // meaningful when multi_view
  uint64_t train_seed = 0;
  std::string angle_source = "none";
  std::string config_hash;
};

/// Checkpoint file: 8-byte little-endian header length, UTF-8 JSON header
/// (topology plus per-parameter element offsets), then all parameter and
/// state values as little-endian 64-bit floats.
void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<nn::Param*>& params,
                     const std::vector<nn::StateRef>& state);

CheckpointMeta read_checkpoint_meta(const std::string& path);

/// Fills an already-built model's parameters and state by name.
/// Throws std::runtime_error on any topology mismatch.
void load_checkpoint_values(const std::string& path,
                            const std::vector<nn::Param*>& params,
                            const std::vector<nn::StateRef>& state);

}  // namespace hrrp

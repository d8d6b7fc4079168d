#pragma once

// Checkpoint file layout:
//
//   MTADCKPT\n
//   <header byte length>\n
//   <JSON header: format, version, model_config, norm_stats, tensors[{name, shape, offset, count}], metadata>
//   <little-endian float64 blobs, concatenated in manifest order>

#include <cstdint>
#include <filesystem>
#include <string>

#include "mtad/network.hpp"
#include "mtad/preprocess.hpp"

namespace mtad {

inline constexpr int kCheckpointVersion = 1;

struct TrainingMetadata {
  Index epoch = 0;
  double final_loss = 0;
  std::uint64_t seed = 0;
  bool operator==(const TrainingMetadata&) const = default;
};

struct Checkpoint {
  ModelConfig model;
  NormStats norm;
  ModelParams params;
  TrainingMetadata meta;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);

// Throws CorruptCheckpointError for malformed bytes, CheckpointVersionError for an
// unknown version and ConfigError when the manifest disagrees with the model config.
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Concatenated little-endian parameter blobs, as stored in the file.
std::string parameter_blob(const ModelParams& params);

// ConfigError unless data with `features` columns can be fed to the checkpoint.
void require_compatible(const Checkpoint& ckpt, Index features);

}  // namespace mtad

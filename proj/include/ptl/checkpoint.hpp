#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ptl/model.hpp"

namespace ptl {

// Checkpoint container, little-endian:
//   "PTCK" | u32 version | u32 n + n bytes of key=value lines (config and metadata)
//   | u32 tensor count | per tensor: u32 name length, name bytes, u32 rank,
//     rank × u64 extents, numel × f64

constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMeta {
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
  std::string source_tag;

  friend bool operator==(const TrainingMeta&, const TrainingMeta&) = default;
};

struct Checkpoint {
  ModelParams params;
  TrainingMeta meta;
  std::vector<std::string> class_names;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
/// Validates the tensors against the stored config (names and shapes).
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Parameters for a model with `num_classes` outputs. A class-count mismatch
/// is a ShapeError naming both counts unless `allow_head_reinit`, in which
/// case the head is reinitialized from `seed`.
ModelParams restore_params(const Checkpoint& checkpoint, std::size_t num_classes,
                           bool allow_head_reinit, std::uint64_t seed = 0);

}  // namespace ptl

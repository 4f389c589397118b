#pragma once

// Binary containers. All integers are little-endian, values are IEEE-754
// binary32.
//
// Checkpoint (version 1):
//   "FSCALCKP" u32 version u64 iteration
//   u32 meta_len, meta bytes (JSON config echo)
//   u32 count, then per tensor:
//     u32 name_len, name, u32 ndim, u32 dims[ndim], f32 values[prod(dims)]
//
// Feature container (version 1):
//   "FSCALFEA" u32 version
//   u32 id_len, video_id bytes, u32 num_steps, u32 channels, u32 stride
//   f32 values[num_steps * channels] (row-major)

#include <cstdint>
#include <filesystem>
#include <string>

#include "fscal/diff.hpp"

namespace fscal {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kFeatureVersion = 1;

struct Checkpoint {
  diff::ParameterStore params;
  std::string config_json;
  std::uint64_t iteration = 0;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Rounds every parameter to binary32, matching what a checkpoint stores.
void round_to_float(diff::ParameterStore& params);

/// Backbone output: num_steps x C, plus the frame stride per step.
struct FrameFeatures {
  std::string video_id;
  diff::Matrix values;
  int stride = 8;

  Eigen::Index num_steps() const { return values.rows(); }
  Eigen::Index channels() const { return values.cols(); }
};

std::string encode_features(const FrameFeatures& f);
FrameFeatures decode_features(const std::string& bytes);

void save_features(const FrameFeatures& f, const std::filesystem::path& path);

/// Loads a feature file and validates its channel count against
/// `expected_channels` (skipped when < 0).
FrameFeatures load_precomputed(const std::filesystem::path& path, int expected_channels = -1);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace fscal

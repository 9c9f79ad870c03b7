#pragma once

#include "m3d/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace m3d {

inline constexpr char kCheckpointMagic[4] = {'M', '3', 'D', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian layout:
///   magic "M3DC", version u32,
///   config_hash str, structural_config str, full_config str, step i64, rng_state str,
///   tensor_count u32, then per tensor: name str, rows u32, cols u32,
///   value f64[rows*cols], adam_m f64[rows*cols], adam_v f64[rows*cols]
/// where str is (u32 byte length, bytes). Matrices are row-major.
struct CheckpointData {
  std::string config_hash;
  std::string structural_config;
  std::string full_config;
  std::int64_t step = 0;
  std::string rng_state;
  struct Tensor {
    std::string name;
    ag::Mat value, m, v;
  };
  std::vector<Tensor> tensors;
};

/// Snapshot of parameters and (optionally) optimizer moments.
CheckpointData capture_checkpoint(const nn::ParameterStore& ps, const nn::Adam* adam);
/// Copies values back; throws DataError when names or shapes do not match the store.
void restore_checkpoint(const CheckpointData& data, nn::ParameterStore& ps, nn::Adam* adam);

void write_checkpoint(std::ostream& os, const CheckpointData& data);
void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
/// Throws DataError on bad magic, unsupported version or truncation.
CheckpointData read_checkpoint(std::istream& is);
CheckpointData read_checkpoint(const std::filesystem::path& path);

}  // namespace m3d

#pragma once

#include "m3d/scene_sim.hpp"

#include <filesystem>
#include <iosfwd>

namespace m3d {

inline constexpr char kSequenceMagic[4] = {'M', '3', 'D', 'S'};
inline constexpr std::uint32_t kSequenceVersion = 1;

/// Little-endian layout:
///   header  {magic "M3DS", version u32, frame_count u32}
///   frame   {timestamp f64, pose 16 x f64 (row-major), point_count u32, points 3 x f32 each,
///            box_count u32, boxes (7 x f32 box, 2 x f32 velocity, u32 track id) each}
void write_sequence(std::ostream& os, const Sequence& seq);
void write_sequence(const std::filesystem::path& path, const Sequence& seq);

/// Throws DataError on bad magic, unsupported version, truncation or invalid records.
Sequence read_sequence(std::istream& is);
Sequence read_sequence(const std::filesystem::path& path);

/// Reads only the header's frame_count.
std::uint32_t read_sequence_frame_count(const std::filesystem::path& path);

}  // namespace m3d

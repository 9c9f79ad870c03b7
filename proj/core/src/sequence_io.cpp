#include "m3d/sequence_io.hpp"

#include "m3d/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace m3d {

static_assert(std::endian::native == std::endian::little, "sequence files assume a little-endian host");

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw DataError("sequence file truncated");
  return v;
}

constexpr std::uint32_t kMaxPoints = 50'000'000;
constexpr std::uint32_t kMaxBoxes = 1'000'000;

}  // namespace

void write_sequence(std::ostream& os, const Sequence& seq) {
  os.write(kSequenceMagic, 4);
  put<std::uint32_t>(os, kSequenceVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(seq.size()));
  for (const auto& fr : seq) {
    put<double>(os, fr.timestamp);
    for (double v : fr.ego_pose.row_major()) put<double>(os, v);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(fr.points.size()));
    for (const auto& p : fr.points)
      for (float c : p) put<float>(os, c);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(fr.gt.size()));
    for (const auto& g : fr.gt) {
      for (double v : g.box.as_array()) put<float>(os, static_cast<float>(v));
      put<float>(os, static_cast<float>(g.vx));
      put<float>(os, static_cast<float>(g.vy));
      put<std::uint32_t>(os, g.track_id);
    }
  }
  if (!os) throw DataError("failed writing sequence");
}

void write_sequence(const std::filesystem::path& path, const Sequence& seq) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  write_sequence(os, seq);
}

Sequence read_sequence(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kSequenceMagic, 4) != 0) throw DataError("bad sequence magic");
  const auto version = get<std::uint32_t>(is);
  if (version != kSequenceVersion) throw DataError("unsupported sequence version " + std::to_string(version));
  const auto frames = get<std::uint32_t>(is);
  Sequence seq;
  for (std::uint32_t f = 0; f < frames; ++f) {
    FrameRecord fr;
    fr.timestamp = get<double>(is);
    std::array<double, 16> m{};
    for (double& v : m) v = get<double>(is);
    try {
      fr.ego_pose = Pose::from_row_major(m);
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("invalid pose: ") + e.what());
    }
    const auto np = get<std::uint32_t>(is);
    if (np > kMaxPoints) throw DataError("implausible point count");
    fr.points.resize(np);
    if (np > 0 && !is.read(reinterpret_cast<char*>(fr.points.data()), static_cast<std::streamsize>(np) * 12)) {
      throw DataError("sequence file truncated");
    }
    const auto nb = get<std::uint32_t>(is);
    if (nb > kMaxBoxes) throw DataError("implausible box count");
    for (std::uint32_t b = 0; b < nb; ++b) {
      std::array<double, 7> a{};
      for (double& v : a) v = get<float>(is);
      GtObject g;
      try {
        g.box = Box7::from_array(a);
      } catch (const std::invalid_argument& e) {
        throw DataError(std::string("invalid box: ") + e.what());
      }
      g.vx = get<float>(is);
      g.vy = get<float>(is);
      g.track_id = get<std::uint32_t>(is);
      fr.gt.push_back(g);
    }
    if (!seq.empty() && !(fr.timestamp > seq.back().timestamp)) throw DataError("timestamps not increasing");
    seq.push_back(std::move(fr));
  }
  return seq;
}

Sequence read_sequence(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  return read_sequence(is);
}

std::uint32_t read_sequence_frame_count(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kSequenceMagic, 4) != 0) throw DataError("bad sequence magic");
  get<std::uint32_t>(is);
  return get<std::uint32_t>(is);
}

}  // namespace m3d

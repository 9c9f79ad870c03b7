#include "m3d/checkpoint.hpp"

#include "m3d/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace m3d {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

CheckpointData capture_checkpoint(const nn::ParameterStore& ps, const nn::Adam* adam) {
  CheckpointData d;
  const auto& entries = ps.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    CheckpointData::Tensor t;
    t.name = entries[i].name;
    t.value = entries[i].var.value();
    if (adam) {
      t.m = adam->first_moments()[i];
      t.v = adam->second_moments()[i];
    } else {
      t.m = ag::Mat::Zero(t.value.rows(), t.value.cols());
      t.v = t.m;
    }
    d.tensors.push_back(std::move(t));
  }
  if (adam) d.step = adam->steps();
  return d;
}

void restore_checkpoint(const CheckpointData& data, nn::ParameterStore& ps, nn::Adam* adam) {
  auto& entries = ps.entries();
  if (entries.size() != data.tensors.size()) {
    throw DataError("checkpoint has " + std::to_string(data.tensors.size()) + " tensors, model expects " +
                    std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& t = data.tensors[i];
    if (t.name != entries[i].name || t.value.rows() != entries[i].var.rows() || t.value.cols() != entries[i].var.cols()) {
      throw DataError("checkpoint tensor '" + t.name + "' does not match model parameter '" + entries[i].name + "'");
    }
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].var.mutable_value() = data.tensors[i].value;
    if (adam) {
      adam->first_moments()[i] = data.tensors[i].m;
      adam->second_moments()[i] = data.tensors[i].v;
    }
  }
  if (adam) adam->set_steps(data.step);
}

namespace {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_mat(std::ostream& os, const ag::Mat& m) {
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("checkpoint truncated");
  return v;
}

std::string get_str(std::istream& is) {
  const auto n = get<std::uint32_t>(is);
  if (n > (1u << 28)) throw DataError("checkpoint string length implausible");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) throw DataError("checkpoint truncated");
  return s;
}

ag::Mat get_mat(std::istream& is, std::uint32_t rows, std::uint32_t cols) {
  ag::Mat m(rows, cols);
  if (m.size() && !is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
    throw DataError("checkpoint truncated");
  }
  return m;
}

}  // namespace

void write_checkpoint(std::ostream& os, const CheckpointData& d) {
  os.write(kCheckpointMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  put_str(os, d.config_hash);
  put_str(os, d.structural_config);
  put_str(os, d.full_config);
  put<std::int64_t>(os, d.step);
  put_str(os, d.rng_state);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(d.tensors.size()));
  for (const auto& t : d.tensors) {
    put_str(os, t.name);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.value.rows()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t.value.cols()));
    put_mat(os, t.value);
    put_mat(os, t.m);
    put_mat(os, t.v);
  }
}

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& d) {
  // write-then-rename
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write checkpoint " + tmp);
    write_checkpoint(f, d);
    if (!f) throw std::runtime_error("error writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw DataError("not a checkpoint file");
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  CheckpointData d;
  d.config_hash = get_str(is);
  d.structural_config = get_str(is);
  d.full_config = get_str(is);
  d.step = get<std::int64_t>(is);
  d.rng_state = get_str(is);
  const auto n = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    CheckpointData::Tensor t;
    t.name = get_str(is);
    const auto rows = get<std::uint32_t>(is), cols = get<std::uint32_t>(is);
    if (static_cast<std::uint64_t>(rows) * cols > (1ull << 28)) throw DataError("checkpoint tensor too large");
    t.value = get_mat(is, rows, cols);
    t.m = get_mat(is, rows, cols);
    t.v = get_mat(is, rows, cols);
    d.tensors.push_back(std::move(t));
  }
  return d;
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint " + path.string());
  return read_checkpoint(f);
}

}  // namespace m3d

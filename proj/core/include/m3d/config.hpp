#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace m3d {

/// Flat configuration with dotted keys ("fsd.nms.kernel"). Every key has a documented default;
/// unknown keys and values that do not parse as the key's type are rejected with
/// std::invalid_argument.
class RunConfig {
 public:
  enum class Type { kInt, kDouble, kBool, kString, kIntList, kDoubleList };

  struct Entry {
    Type type;
    std::string value;
    std::string default_value;
    std::string help;
    bool structural = false;  // changes the parameter layout or model semantics
  };

  RunConfig();

  void set(const std::string& key, const std::string& value);
  /// Parses "key = value" lines; '#' starts a comment.
  void load_text(const std::string& text);
  void load_file(const std::filesystem::path& path);
  /// Applies "key=value".
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::int64_t get_int64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;

  const std::map<std::string, Entry>& entries() const { return entries_; }

  /// Sorted "key = value" lines (all keys).
  std::string dump() const;
  /// Only structural keys.
  std::string structural_dump() const;
  /// FNV-1a 64 of dump() / structural_dump(), as 16 hex digits.
  std::string hash() const;
  std::string structural_hash() const;
  /// Default value documentation, one key per line.
  std::string describe() const;

 private:
  void declare(const std::string& key, Type type, const std::string& def, const std::string& help, bool structural = false);
  std::map<std::string, Entry> entries_;
};

std::uint64_t fnv1a64(const std::string& data);
std::string hex64(std::uint64_t v);

/// Parses a "key = value" dump into a map (used for checkpoint structural diffs).
std::map<std::string, std::string> parse_dump(const std::string& text);
/// Human-readable list of keys whose values differ: "key: a -> b".
std::vector<std::string> diff_dumps(const std::string& a, const std::string& b);

}  // namespace m3d

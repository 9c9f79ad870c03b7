#include "m3d/config.hpp"

#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace m3d {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

bool parse_int(const std::string& s, std::int64_t& v) {
  const auto t = trim(s);
  if (t.empty()) return false;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  return ec == std::errc() && p == t.data() + t.size();
}

bool parse_double(const std::string& s, double& v) {
  const auto t = trim(s);
  if (t.empty()) return false;
  if (t == "inf") {
    v = std::numeric_limits<double>::infinity();
    return true;
  }
  try {
    std::size_t n = 0;
    v = std::stod(t, &n);
    return n == t.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_bool(const std::string& s, bool& v) {
  const auto t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") {
    v = true;
    return true;
  }
  if (t == "false" || t == "0" || t == "no" || t == "off") {
    v = false;
    return true;
  }
  return false;
}

bool valid_value(RunConfig::Type type, const std::string& value) {
  std::int64_t i;
  double d;
  bool b;
  switch (type) {
    case RunConfig::Type::kInt: return parse_int(value, i);
    case RunConfig::Type::kDouble: return parse_double(value, d);
    case RunConfig::Type::kBool: return parse_bool(value, b);
    case RunConfig::Type::kString: return true;
    case RunConfig::Type::kIntList:
      for (const auto& part : split(value, ','))
        if (!parse_int(part, i)) return false;
      return !trim(value).empty();
    case RunConfig::Type::kDoubleList:
      for (const auto& part : split(value, ','))
        if (!parse_double(part, d)) return false;
      return !trim(value).empty();
  }
  return false;
}

}  // namespace

void RunConfig::declare(const std::string& key, Type type, const std::string& def, const std::string& help,
                        bool structural) {
  entries_[key] = Entry{type, def, def, help, structural};
}

RunConfig::RunConfig() {
  using T = Type;
  declare("seed", T::kInt, "0", "master seed for data, initialization and sampling");

  declare("scene.num_objects", T::kInt, "4", "labeled vehicles per sequence");
  declare("scene.num_frames", T::kInt, "12", "frames per generated sequence (10 Hz)");
  declare("scene.bucket_mix", T::kDoubleList, "0.25,0.25,0.25,0.25", "probabilities of stationary/slow/medium/fast");
  declare("scene.fast_max_speed", T::kDouble, "10", "upper speed of the fast bucket, m/s");
  declare("scene.points_density", T::kDouble, "2000", "expected points per object at 1 m");
  declare("scene.noise_sigma", T::kDouble, "0.02", "Gaussian point noise, m");
  declare("scene.top_face_weight", T::kDouble, "0.25", "relative sampling weight of the roof");
  declare("scene.vehicle_silhouette", T::kBool, "true", "lowered hood over the front quarter");
  declare("scene.num_clutter", T::kInt, "3", "unlabeled static obstacles per sequence");
  declare("scene.ego_speed", T::kDouble, "0", "constant ego speed along world +x, m/s");
  declare("scene.spawn_half_extent", T::kDouble, "9", "objects end inside [-e, e]^2 of the last frame");
  declare("scene.sensor_z", T::kDouble, "1.8", "sensor height above ground, m");

  declare("data.train_sequences", T::kInt, "200", "sequences generated for training");
  declare("data.eval_sequences", T::kInt, "50", "held-out sequences");
  declare("data.max_corrupt_fraction", T::kDouble, "0.1", "abort when more sequence files than this are unreadable");

  declare("grid.x_min", T::kDouble, "-19.2", "", true);
  declare("grid.x_max", T::kDouble, "19.2", "", true);
  declare("grid.y_min", T::kDouble, "-19.2", "", true);
  declare("grid.y_max", T::kDouble, "19.2", "", true);
  declare("grid.z_min", T::kDouble, "-2", "", true);
  declare("grid.z_max", T::kDouble, "4", "", true);
  declare("grid.nx", T::kInt, "128", "pillars along x", true);
  declare("grid.ny", T::kInt, "128", "pillars along y", true);

  declare("model.pillar_widths", T::kIntList, "64,64", "per-point MLP widths of the pillar encoder", true);
  declare("model.block_channels", T::kIntList, "32,64,128", "backbone block widths", true);
  declare("model.block_layers", T::kIntList, "2,2,2", "convs per backbone block", true);
  declare("model.block_strides", T::kIntList, "1,2,2", "stride of each block's first conv", true);
  declare("model.up_channels", T::kIntList, "32,16,16", "upsampled widths; their sum is C", true);
  declare("model.output_stride", T::kInt, "1", "backbone output stride S", true);

  declare("fsd.nms.kernel", T::kInt, "7", "MaxPoolNMS window");
  declare("fsd.num_proposals", T::kInt, "32", "proposals per frame N");
  declare("fsd.num_bins", T::kInt, "12", "orientation bins of the dense head", true);
  declare("fsd.prior.length", T::kDouble, "4.7", "", true);
  declare("fsd.prior.width", T::kDouble, "2.1", "", true);
  declare("fsd.prior.height", T::kDouble, "1.7", "", true);
  declare("fsd.prior.z", T::kDouble, "0.85", "", true);
  declare("fsd.assign", T::kString, "hungarian", "hungarian | centeredness");
  declare("fsd.match_iou", T::kString, "3d", "3d | bev, IoU used for matching proposals to gts");

  declare("roi.k", T::kInt, "7", "key points per side for rotated ROI pooling");

  declare("mvaa.enabled", T::kBool, "true", "false gives the single-stage box head on target features", true);
  declare("mvaa.attn_channels", T::kInt, "0", "C' (0 means C)", true);
  declare("mvaa.heads", T::kInt, "1", "attention heads", true);
  declare("mvaa.bias", T::kString, "joint", "joint | separate", true);
  declare("mvaa.residual", T::kBool, "false", "add F_t to the alignment output", true);
  declare("mvaa.include_target", T::kBool, "true", "present the target frame as an extra view", true);
  declare("mvaa.keys", T::kString, "union", "union | per_frame", true);
  declare("mvaa.crossview", T::kBool, "true", "cross-view heads and L_cv", true);

  declare("loss.beta", T::kDouble, "1.0", "smooth-L1 threshold");
  declare("loss.min_iou", T::kDouble, "0.05", "second-stage IoU below which a proposal is unassigned");

  declare("train.frames", T::kInt, "4", "frames per example F", true);
  declare("train.window", T::kInt, "1", "frames per window W", true);
  declare("train.window_stride", T::kInt, "1", "frames between window starts", true);
  declare("train.steps", T::kInt, "2000", "optimizer steps");
  declare("train.batch_size", T::kInt, "4", "examples per step");
  declare("train.lr", T::kDouble, "0.003", "initial learning rate");
  declare("train.decay_start", T::kDouble, "0.1", "fraction of steps where exponential decay starts");
  declare("train.decay_end", T::kDouble, "0.9", "fraction of steps where decay reaches its final ratio");
  declare("train.decay_final", T::kDouble, "0.1", "final learning-rate ratio");
  declare("train.grad_clip", T::kDouble, "10", "global gradient-norm clip (<= 0 disables)");
  declare("train.flip", T::kBool, "true", "random flip across the x axis");
  declare("train.rotate", T::kBool, "true", "random rotation about z");
  declare("train.rotate_max", T::kDouble, "0.785398", "max rotation, rad");
  declare("train.fsd_warmup", T::kInt, "0", "steps training only L_fsd");
  declare("train.log_interval", T::kInt, "10", "steps between training-log records");
  declare("train.checkpoint_interval", T::kInt, "500", "steps between checkpoints");
  declare("train.min_points", T::kInt, "1", "points a gt needs in its window to be labeled");

  declare("eval.thresholds", T::kDoubleList, "0.7", "IoU thresholds");
  declare("eval.range_bins", T::kDoubleList, "0,30,50,inf", "range bin edges, m");
  declare("eval.velocity.slow", T::kDouble, "0.2", "");
  declare("eval.velocity.medium", T::kDouble, "1.0", "");
  declare("eval.velocity.fast", T::kDouble, "5.0", "");
  declare("eval.iou", T::kString, "3d", "3d | bev");
  declare("eval.score_threshold", T::kDouble, "0.01", "detections below this probability are dropped");
  declare("eval.pr_plot", T::kBool, "false", "write precision-recall curves as SVG and CSV");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  if (!valid_value(it->second.type, value)) {
    throw std::invalid_argument("bad value '" + value + "' for config key '" + key + "'");
  }
  it->second.value = trim(value);
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("override must be key=value: '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::load_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.find('=') == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_override(line);
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  load_text(ss.str());
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  return it->second.value;
}

std::int64_t RunConfig::get_int64(const std::string& key) const {
  std::int64_t v = 0;
  if (!parse_int(get(key), v)) throw std::invalid_argument("config key '" + key + "' is not an integer");
  return v;
}

int RunConfig::get_int(const std::string& key) const { return static_cast<int>(get_int64(key)); }

double RunConfig::get_double(const std::string& key) const {
  double v = 0;
  if (!parse_double(get(key), v)) throw std::invalid_argument("config key '" + key + "' is not a number");
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  bool v = false;
  if (!parse_bool(get(key), v)) throw std::invalid_argument("config key '" + key + "' is not a bool");
  return v;
}

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& part : split(get(key), ',')) {
    std::int64_t v = 0;
    if (!parse_int(part, v)) throw std::invalid_argument("config key '" + key + "' is not an integer list");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& part : split(get(key), ',')) {
    double v = 0;
    if (!parse_double(part, v)) throw std::invalid_argument("config key '" + key + "' is not a number list");
    out.push_back(v);
  }
  return out;
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& [k, e] : entries_) out += k + " = " + e.value + "\n";
  return out;
}

std::string RunConfig::structural_dump() const {
  std::string out;
  for (const auto& [k, e] : entries_)
    if (e.structural) out += k + " = " + e.value + "\n";
  return out;
}

std::string RunConfig::hash() const { return hex64(fnv1a64(dump())); }
std::string RunConfig::structural_hash() const { return hex64(fnv1a64(structural_dump())); }

std::string RunConfig::describe() const {
  std::string out;
  for (const auto& [k, e] : entries_) {
    out += k + " = " + e.default_value;
    if (!e.help.empty()) out += "    # " + e.help;
    out += "\n";
  }
  return out;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

std::map<std::string, std::string> parse_dump(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

std::vector<std::string> diff_dumps(const std::string& a, const std::string& b) {
  const auto ma = parse_dump(a), mb = parse_dump(b);
  std::vector<std::string> out;
  for (const auto& [k, v] : ma) {
    auto it = mb.find(k);
    if (it == mb.end()) out.push_back(k + ": " + v + " -> (missing)");
    else if (it->second != v) out.push_back(k + ": " + v + " -> " + it->second);
  }
  for (const auto& [k, v] : mb)
    if (!ma.count(k)) out.push_back(k + ": (missing) -> " + v);
  return out;
}

}  // namespace m3d

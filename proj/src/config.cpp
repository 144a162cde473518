#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "weclick/trainer.hpp"

namespace weclick {
inline namespace WECLICK_ABI {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: '" + key + "' out of range: '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config: '" + key + "' expects true or false, got '" + v + "'");
}

struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

#define REAL_FIELD(name, member)                                                                  \
  Field {                                                                                         \
    name, [](const TrainConfig& c) { return format_real(c.member); },                             \
        [](TrainConfig& c, const std::string& v) { c.member = parse_real(name, v); }              \
  }
#define COUNT_FIELD(name, member)                                                                 \
  Field {                                                                                         \
    name, [](const TrainConfig& c) { return std::to_string(c.member); },                          \
        [](TrainConfig& c, const std::string& v) { c.member = parse_count(name, v); }             \
  }
#define BOOL_FIELD(name, member)                                                                  \
  Field {                                                                                         \
    name, [](const TrainConfig& c) { return std::string(c.member ? "true" : "false"); },          \
        [](TrainConfig& c, const std::string& v) { c.member = parse_bool(name, v); }              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      REAL_FIELD("lr0", lr0),
      REAL_FIELD("lr_power", lr_power),
      REAL_FIELD("momentum", momentum),
      REAL_FIELD("weight_decay", weight_decay),
      COUNT_FIELD("epochs", epochs),
      COUNT_FIELD("teacher_epochs", teacher_epochs),
      REAL_FIELD("lambda", lambda),
      REAL_FIELD("alpha", alpha),
      REAL_FIELD("beta", beta),
      REAL_FIELD("gamma", gamma),
      COUNT_FIELD("n", n),
      Field{"direction", [](const TrainConfig& c) { return to_string(c.direction); },
            [](TrainConfig& c, const std::string& v) { c.direction = parse_direction(v); }},
      Field{"sampling", [](const TrainConfig& c) { return to_string(c.sampling); },
            [](TrainConfig& c, const std::string& v) { c.sampling = parse_sampling(v); }},
      Field{"wf_mode", [](const TrainConfig& c) { return to_string(c.wf_mode); },
            [](TrainConfig& c, const std::string& v) { c.wf_mode = parse_wf_mode(v); }},
      Field{"flow", [](const TrainConfig& c) { return to_string(c.flow); },
            [](TrainConfig& c, const std::string& v) { c.flow = parse_flow_provider(v); }},
      BOOL_FIELD("mask_invalid_warp", mask_invalid_warp),
      Field{"reg_radius", [](const TrainConfig& c) { return std::to_string(c.regularizer.radius); },
            [](TrainConfig& c, const std::string& v) {
              const auto r = parse_count("reg_radius", v);
              if (r > 64) throw std::invalid_argument("config: 'reg_radius' too large: " + v);
              c.regularizer.radius = static_cast<int>(r);
            }},
      REAL_FIELD("reg_sigma_xy", regularizer.sigma_xy),
      REAL_FIELD("reg_sigma_rgb", regularizer.sigma_rgb),
      BOOL_FIELD("reg_detach_clicked", regularizer.detach_clicked),
      COUNT_FIELD("teacher_channels", teacher_channels),
      COUNT_FIELD("student_channels", student_channels),
      COUNT_FIELD("seed", seed),
      COUNT_FIELD("data_seed", data_seed),
      COUNT_FIELD("val_every", val_every),
      BOOL_FIELD("cache_teacher", cache_teacher),
  };
  return table;
}

#undef REAL_FIELD
#undef COUNT_FIELD
#undef BOOL_FIELD

}  // namespace

std::string to_string(Direction d) {
  switch (d) {
    case Direction::forward: return "forward";
    case Direction::backward: return "backward";
    case Direction::bidirection: return "bidirection";
  }
  return "?";
}

Direction parse_direction(const std::string& text) {
  if (text == "forward") return Direction::forward;
  if (text == "backward") return Direction::backward;
  if (text == "bidirection") return Direction::bidirection;
  throw std::invalid_argument("unknown direction '" + text + "'");
}

std::string to_string(const Sampling& s) {
  return (s.kind == Sampling::Kind::fixed ? "fixed:" : "random:") + std::to_string(s.value);
}

Sampling parse_sampling(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  if (colon == std::string::npos) throw std::invalid_argument("sampling '" + text + "' needs the form kind:value");
  const auto value = parse_count("sampling", text.substr(colon + 1));
  if (kind == "fixed") return Sampling::fixed(value);
  if (kind == "random") return Sampling::random(value);
  throw std::invalid_argument("unknown sampling policy '" + kind + "'");
}

void TrainConfig::validate() const {
  if (!(lr0 > 0)) throw std::invalid_argument("config: lr0 must be > 0");
  if (lr_power < 0) throw std::invalid_argument("config: lr_power must be >= 0");
  if (momentum < 0 || momentum >= 1) throw std::invalid_argument("config: momentum must be in [0, 1)");
  if (weight_decay < 0) throw std::invalid_argument("config: weight_decay must be >= 0");
  if (n < 1) throw std::invalid_argument("config: n must be >= 1");
  if (sampling.value < 1) throw std::invalid_argument("config: sampling interval/range must be >= 1");
  if (regularizer.radius < 1) throw std::invalid_argument("config: reg_radius must be >= 1");
  if (!(regularizer.sigma_xy > 0) || !(regularizer.sigma_rgb > 0)) {
    throw std::invalid_argument("config: regulariser bandwidths must be > 0");
  }
  loss_weights().validate();
}

TrainConfig default_config() { return TrainConfig{}; }

void apply_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      return;
    }
  }
  throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::string config_to_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + "=" + f.get(cfg) + "\n";
  return out;
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
    }
    apply_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open config");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

std::string config_fingerprint(const TrainConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace WECLICK_ABI
}  // namespace weclick

#include "camp/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "camp/schedule.hpp"

namespace camp {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int32_t parse_i32(const std::string& v) {
  size_t pos = 0;
  long out = 0;
  try {
    out = std::stol(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("expected integer, got '" + v + "'");
  }
  if (pos != v.size() || out < INT32_MIN || out > INT32_MAX) {
    throw std::invalid_argument("expected integer, got '" + v + "'");
  }
  return static_cast<int32_t>(out);
}

uint64_t parse_u64(const std::string& v) {
  size_t pos = 0;
  unsigned long long out = 0;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("expected unsigned integer, got '" + v + "'");
  }
  if (pos != v.size()) throw std::invalid_argument("expected unsigned integer, got '" + v + "'");
  return out;
}

double parse_f64(const std::string& v) {
  size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("expected number, got '" + v + "'");
  }
  if (pos != v.size() || !std::isfinite(out)) {
    throw std::invalid_argument("expected finite number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true/false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw std::invalid_argument("empty element in list '" + v + "'");
    out.push_back(parse_f64(item));
  }
  if (out.empty()) throw std::invalid_argument("expected comma-separated list, got '" + v + "'");
  return out;
}

std::string format_list(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

struct KeyEntry {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyEntry>& key_table() {
  static const std::vector<KeyEntry> table = {
      {"tasks", [](RunConfig& c, const std::string& v) { c.tasks = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.tasks); }},
      {"episode_steps", [](RunConfig& c, const std::string& v) { c.episode_steps = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.episode_steps); }},
      {"horizon", [](RunConfig& c, const std::string& v) { c.horizon = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.horizon); }},
      {"action_max", [](RunConfig& c, const std::string& v) { c.action_max = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.action_max); }},
      {"dt", [](RunConfig& c, const std::string& v) { c.dt = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.dt); }},
      {"controller_gain",
       [](RunConfig& c, const std::string& v) { c.controller_gain = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.controller_gain); }},
      {"episodes_per_task",
       [](RunConfig& c, const std::string& v) { c.episodes_per_task = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.episodes_per_task); }},
      {"pairs_per_task",
       [](RunConfig& c, const std::string& v) { c.pairs_per_task = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.pairs_per_task); }},
      {"quality_levels",
       [](RunConfig& c, const std::string& v) { c.quality_levels = parse_list(v); },
       [](const RunConfig& c) { return format_list(c.quality_levels); }},
      {"repr_dim", [](RunConfig& c, const std::string& v) { c.repr_dim = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.repr_dim); }},
      {"d_model", [](RunConfig& c, const std::string& v) { c.d_model = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.d_model); }},
      {"margin", [](RunConfig& c, const std::string& v) { c.margin = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.margin); }},
      {"eps_recip", [](RunConfig& c, const std::string& v) { c.eps_recip = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.eps_recip); }},
      {"lr_encoder", [](RunConfig& c, const std::string& v) { c.lr_encoder = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.lr_encoder); }},
      {"lr_wstar", [](RunConfig& c, const std::string& v) { c.lr_wstar = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.lr_wstar); }},
      {"K", [](RunConfig& c, const std::string& v) { c.denoise_steps = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.denoise_steps); }},
      {"schedule", [](RunConfig& c, const std::string& v) { c.schedule = v; },
       [](const RunConfig& c) { return c.schedule; }},
      {"zeta", [](RunConfig& c, const std::string& v) { c.zeta = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.zeta); }},
      {"dropout_prob", [](RunConfig& c, const std::string& v) { c.dropout_prob = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.dropout_prob); }},
      {"guidance", [](RunConfig& c, const std::string& v) { c.guidance = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.guidance); }},
      {"lr_diffusion", [](RunConfig& c, const std::string& v) { c.lr_diffusion = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.lr_diffusion); }},
      {"weighted_score_loss",
       [](RunConfig& c, const std::string& v) { c.weighted_score_loss = parse_bool(v); },
       [](const RunConfig& c) { return c.weighted_score_loss ? "true" : "false"; }},
      {"batch_prior_mi",
       [](RunConfig& c, const std::string& v) { c.batch_prior_mi = parse_bool(v); },
       [](const RunConfig& c) { return c.batch_prior_mi ? "true" : "false"; }},
      {"condition_sampling",
       [](RunConfig& c, const std::string& v) { c.condition_sampling = parse_bool(v); },
       [](const RunConfig& c) { return c.condition_sampling ? "true" : "false"; }},
      {"lr_invdyn", [](RunConfig& c, const std::string& v) { c.lr_invdyn = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.lr_invdyn); }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.batch_size = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.batch_size); }},
      {"train_steps", [](RunConfig& c, const std::string& v) { c.train_steps = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.train_steps); }},
      {"checkpoint_interval",
       [](RunConfig& c, const std::string& v) { c.checkpoint_interval = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.checkpoint_interval); }},
      {"log_interval", [](RunConfig& c, const std::string& v) { c.log_interval = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.log_interval); }},
      {"eval_episodes", [](RunConfig& c, const std::string& v) { c.eval_episodes = parse_i32(v); },
       [](const RunConfig& c) { return std::to_string(c.eval_episodes); }},
      {"success_threshold",
       [](RunConfig& c, const std::string& v) { c.success_threshold = parse_f64(v); },
       [](const RunConfig& c) { return format_double(c.success_threshold); }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
  };
  return table;
}

const KeyEntry* find_key(const std::string& name) {
  for (const KeyEntry& e : key_table()) {
    if (name == e.name) return &e;
  }
  return nullptr;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const KeyEntry& e : key_table()) out.emplace_back(e.name);
  return out;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const KeyEntry* entry = find_key(key);
    if (entry == nullptr) {
      throw std::invalid_argument("unknown config key '" + key + "' (line " +
                                  std::to_string(line_no) + ")");
    }
    if (!seen.insert(key).second) {
      throw std::invalid_argument("duplicate config key '" + key + "' (line " +
                                  std::to_string(line_no) + ")");
    }
    try {
      entry->set(config, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ", key '" + key +
                                  "': " + e.what());
    }
  }
  validate_config(config);
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const KeyEntry& e : key_table()) {
    out += e.name;
    out += " = ";
    out += e.get(config);
    out += "\n";
  }
  return out;
}

void apply_config_override(RunConfig& config, const std::string& key, const std::string& value) {
  const KeyEntry* entry = find_key(key);
  if (entry == nullptr) throw std::invalid_argument("unknown config key '" + key + "'");
  entry->set(config, value);
}

void validate_config(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (c.tasks < 1) fail("tasks must be >= 1");
  if (c.episode_steps < 1) fail("episode_steps must be >= 1");
  if (c.horizon < 1) fail("horizon must be >= 1");
  if (c.episode_steps % c.horizon != 0) fail("episode_steps must be a multiple of horizon");
  if (!(c.action_max > 0.0)) fail("action_max must be positive");
  if (!(c.dt > 0.0)) fail("dt must be positive");
  if (!(c.controller_gain > 0.0)) fail("controller_gain must be positive");
  if (c.episodes_per_task < 1) fail("episodes_per_task must be >= 1");
  if (c.pairs_per_task < 0) fail("pairs_per_task must be >= 0");
  if (c.quality_levels.empty()) fail("quality_levels must not be empty");
  for (double q : c.quality_levels) {
    if (q < 0.0 || q > 1.0) fail("quality_levels entries must lie in [0, 1]");
  }
  if (c.repr_dim < 1) fail("repr_dim must be >= 1");
  if (c.d_model < 1) fail("d_model must be >= 1");
  if (!(c.margin > 0.0)) fail("margin must be positive");
  if (!(c.eps_recip > 0.0)) fail("eps_recip must be positive");
  if (!(c.lr_encoder > 0.0)) fail("lr_encoder must be positive");
  if (!(c.lr_wstar > 0.0)) fail("lr_wstar must be positive");
  if (c.denoise_steps < 2) fail("K must be >= 2");
  schedule_kind_from_string(c.schedule);  // throws on unknown kinds
  if (c.zeta < 0.0) fail("zeta must be >= 0");
  if (c.dropout_prob < 0.0 || c.dropout_prob > 1.0) fail("dropout_prob must lie in [0, 1]");
  if (c.guidance < 0.0) fail("guidance must be >= 0");
  if (!(c.lr_diffusion > 0.0)) fail("lr_diffusion must be positive");
  if (!(c.lr_invdyn > 0.0)) fail("lr_invdyn must be positive");
  if (c.batch_size < 1) fail("batch_size must be >= 1");
  if (c.train_steps < 0) fail("train_steps must be >= 0");
  if (c.checkpoint_interval < 1) fail("checkpoint_interval must be >= 1");
  if (c.log_interval < 1) fail("log_interval must be >= 1");
  if (c.eval_episodes < 1) fail("eval_episodes must be >= 1");
  if (!(c.success_threshold > 0.0)) fail("success_threshold must be positive");
}

bool config_equal(const RunConfig& a, const RunConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace camp

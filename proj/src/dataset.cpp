#include "camp/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace camp {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'C', 'A', 'M', 'P', 'D', 'S', '1', '\n'};
constexpr int32_t kFormatVersion = 1;

void append_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_f32(std::string& out, double v) {
  const float f = static_cast<float>(v);
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  append_u32(out, bits);
}

uint32_t read_u32(const char* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

double read_f32(const char* p) {
  const uint32_t bits = read_u32(p);
  float f;
  std::memcpy(&f, &bits, 4);
  return static_cast<double>(f);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

// Header + byte offset where the payload starts.
std::pair<ordered_json, size_t> parse_header(const std::string& bytes, const std::string& path) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw std::runtime_error(path + ": not a CAMPDS1 file");
  }
  const uint32_t header_len = read_u32(bytes.data() + 8);
  if (bytes.size() < 12 + header_len) throw std::runtime_error(path + ": truncated header");
  ordered_json header = ordered_json::parse(bytes.substr(12, header_len));
  return {std::move(header), 12 + static_cast<size_t>(header_len)};
}

}  // namespace

void OfflineDataset::validate() const {
  if (meta.num_tasks < 1) throw std::invalid_argument("dataset: num_tasks must be >= 1");
  std::vector<int32_t> per_task(meta.num_tasks, 0);
  for (const TrajectorySegment& s : segments) {
    s.validate();
    if (s.task_id < 0 || s.task_id >= meta.num_tasks) {
      throw std::invalid_argument("dataset: segment task_id " + std::to_string(s.task_id) +
                                  " outside [0, " + std::to_string(meta.num_tasks) + ")");
    }
    if (s.horizon() != meta.horizon) {
      throw std::invalid_argument("dataset: segment horizon " + std::to_string(s.horizon()) +
                                  " != " + std::to_string(meta.horizon));
    }
    ++per_task[s.task_id];
  }
  for (int32_t t = 0; t < meta.num_tasks; ++t) {
    if (per_task[t] == 0) {
      throw std::invalid_argument("dataset: task " + std::to_string(t) + " has no segments");
    }
  }
  for (const PreferencePair& p : pairs) {
    if (p.first >= segments.size() || p.second >= segments.size()) {
      throw std::invalid_argument("dataset: pair references segment outside table");
    }
    const int32_t ta = segments[p.first].task_id;
    const int32_t tb = segments[p.second].task_id;
    if (p.kind == PairKind::intra_task) {
      if (ta != p.target_task || tb != p.target_task) {
        throw std::invalid_argument("dataset: intra-task pair with foreign segment");
      }
    } else {
      const bool first_is_target = ta == p.target_task;
      if (first_is_target == (tb == p.target_task)) {
        throw std::invalid_argument("dataset: inter-task pair needs exactly one target segment");
      }
      if ((first_is_target && p.label != 1.0) || (!first_is_target && p.label != 0.0)) {
        throw std::invalid_argument("dataset: inter-task label does not prefer the target task");
      }
    }
  }
}

PreferencePair scripted_preference(const TrajectorySegment& a, const TrajectorySegment& b,
                                   uint32_t index_a, uint32_t index_b, int32_t target_task) {
  const bool a_target = a.task_id == target_task;
  const bool b_target = b.task_id == target_task;
  if (!a_target && !b_target) {
    throw std::invalid_argument("scripted_preference: neither segment belongs to target task " +
                                std::to_string(target_task));
  }
  PreferencePair pair;
  pair.first = index_a;
  pair.second = index_b;
  pair.target_task = target_task;
  if (a.task_id == b.task_id) {
    pair.kind = PairKind::intra_task;
    const double ra = segment_return(a);
    const double rb = segment_return(b);
    if (std::abs(ra - rb) <= kReturnTieTolerance) {
      pair.label = 0.5;
    } else {
      pair.label = ra > rb ? 1.0 : 0.0;
    }
  } else {
    pair.kind = PairKind::inter_task;
    pair.label = a_target ? 1.0 : 0.0;
  }
  return pair;
}

OfflineDataset build_dataset(const BuildDatasetOptions& options) {
  if (options.num_tasks < 1) throw std::invalid_argument("build_dataset: num_tasks must be >= 1");
  if (options.episodes_per_task < 1) {
    throw std::invalid_argument("build_dataset: episodes_per_task must be >= 1");
  }
  if (options.pairs_per_task < 0) {
    throw std::invalid_argument("build_dataset: pairs_per_task must be >= 0");
  }
  if (options.quality_levels.empty()) {
    throw std::invalid_argument("build_dataset: quality_levels must not be empty");
  }
  const int32_t inter_per_task = options.intra_only ? 0 : options.pairs_per_task / 2;
  const int32_t intra_per_task = options.pairs_per_task - inter_per_task;
  if (options.num_tasks == 1 && inter_per_task > 0) {
    throw std::invalid_argument(
        "build_dataset: inter-task pairs requested but only one task exists (set intra_only)");
  }

  OfflineDataset ds;
  ds.meta.num_tasks = options.num_tasks;
  ds.meta.horizon = options.segment_horizon;
  ds.meta.seed = options.seed;
  ds.meta.quality_levels = options.quality_levels;

  Rng root(options.seed);
  std::vector<std::vector<uint32_t>> by_task(options.num_tasks);
  for (int32_t task_id = 0; task_id < options.num_tasks; ++task_id) {
    const PointMassTask task =
        PointMassTask::make(task_id, options.num_tasks, options.episode_steps);
    Rng task_rng = root.child(0x100 + static_cast<uint64_t>(task_id));
    for (int32_t e = 0; e < options.episodes_per_task; ++e) {
      const double quality = options.quality_levels[task_rng.uniform_index(
          static_cast<int64_t>(options.quality_levels.size()))];
      auto segs = rollout(task, options.env, quality, options.segment_horizon, task_rng);
      for (TrajectorySegment& s : segs) {
        by_task[task_id].push_back(static_cast<uint32_t>(ds.segments.size()));
        ds.segments.push_back(std::move(s));
      }
    }
    if (intra_per_task > 0 && by_task[task_id].size() < 2) {
      throw std::invalid_argument("build_dataset: task needs >= 2 segments for intra-task pairs");
    }
  }

  for (int32_t target = 0; target < options.num_tasks; ++target) {
    Rng pair_rng = root.child(0x9000 + static_cast<uint64_t>(target));
    const auto& own = by_task[target];
    for (int32_t n = 0; n < intra_per_task; ++n) {
      const uint32_t ia = own[pair_rng.uniform_index(static_cast<int64_t>(own.size()))];
      uint32_t ib = ia;
      while (ib == ia) {
        ib = own[pair_rng.uniform_index(static_cast<int64_t>(own.size()))];
      }
      ds.pairs.push_back(scripted_preference(ds.segments[ia], ds.segments[ib], ia, ib, target));
    }
    for (int32_t n = 0; n < inter_per_task; ++n) {
      const uint32_t ia = own[pair_rng.uniform_index(static_cast<int64_t>(own.size()))];
      int32_t other = target;
      while (other == target) {
        other = static_cast<int32_t>(pair_rng.uniform_index(options.num_tasks));
      }
      const auto& theirs = by_task[other];
      const uint32_t ib = theirs[pair_rng.uniform_index(static_cast<int64_t>(theirs.size()))];
      // Randomize which side holds the target segment.
      if (pair_rng.uniform() < 0.5) {
        ds.pairs.push_back(scripted_preference(ds.segments[ia], ds.segments[ib], ia, ib, target));
      } else {
        ds.pairs.push_back(scripted_preference(ds.segments[ib], ds.segments[ia], ib, ia, target));
      }
    }
  }

  ds.validate();
  return ds;
}

OfflineDataset extend_dataset_with_task(const OfflineDataset& base, const PointMassTask& task,
                                        int32_t episodes, int32_t pairs,
                                        const std::vector<double>& quality_levels,
                                        const EnvParams& env, uint64_t seed) {
  if (task.task_id != base.meta.num_tasks) {
    throw std::invalid_argument("extend_dataset_with_task: new task id must equal " +
                                std::to_string(base.meta.num_tasks));
  }
  if (episodes < 1 || pairs < 0) {
    throw std::invalid_argument("extend_dataset_with_task: invalid episode/pair counts");
  }
  OfflineDataset ds = base;
  ds.meta.num_tasks += 1;

  Rng root(seed);
  Rng roll_rng = root.child(0x200);
  std::vector<uint32_t> own;
  for (int32_t e = 0; e < episodes; ++e) {
    const double quality =
        quality_levels[roll_rng.uniform_index(static_cast<int64_t>(quality_levels.size()))];
    auto segs = rollout(task, env, quality, base.meta.horizon, roll_rng);
    for (TrajectorySegment& s : segs) {
      own.push_back(static_cast<uint32_t>(ds.segments.size()));
      ds.segments.push_back(std::move(s));
    }
  }
  if (own.size() < 2) {
    throw std::invalid_argument("extend_dataset_with_task: need >= 2 new segments");
  }

  Rng pair_rng = root.child(0x9100);
  const int32_t inter = pairs / 2;
  const int32_t intra = pairs - inter;
  for (int32_t n = 0; n < intra; ++n) {
    const uint32_t ia = own[pair_rng.uniform_index(static_cast<int64_t>(own.size()))];
    uint32_t ib = ia;
    while (ib == ia) ib = own[pair_rng.uniform_index(static_cast<int64_t>(own.size()))];
    ds.pairs.push_back(
        scripted_preference(ds.segments[ia], ds.segments[ib], ia, ib, task.task_id));
  }
  const uint32_t base_count = static_cast<uint32_t>(base.segments.size());
  for (int32_t n = 0; n < inter; ++n) {
    const uint32_t ia = own[pair_rng.uniform_index(static_cast<int64_t>(own.size()))];
    const uint32_t ib = static_cast<uint32_t>(pair_rng.uniform_index(base_count));
    if (pair_rng.uniform() < 0.5) {
      ds.pairs.push_back(
          scripted_preference(ds.segments[ia], ds.segments[ib], ia, ib, task.task_id));
    } else {
      ds.pairs.push_back(
          scripted_preference(ds.segments[ib], ds.segments[ia], ib, ia, task.task_id));
    }
  }
  ds.validate();
  return ds;
}

void save_dataset(const OfflineDataset& ds, const std::string& path) {
  ds.validate();
  const int32_t h = ds.meta.horizon;
  const int32_t sd = ds.segments.empty() ? ds.meta.state_dim : ds.segments[0].state_dim;
  const int32_t ad = ds.segments.empty() ? ds.meta.action_dim : ds.segments[0].action_dim;
  const size_t segment_bytes = 4 * (static_cast<size_t>(h + 1) * sd + static_cast<size_t>(h) * ad +
                                    static_cast<size_t>(h));
  const size_t pairs_offset = ds.segments.size() * segment_bytes;

  ordered_json header;
  header["version"] = kFormatVersion;
  header["m"] = ds.meta.num_tasks;
  header["h"] = h;
  header["state_dim"] = sd;
  header["action_dim"] = ad;
  header["seed"] = ds.meta.seed;
  header["segment_count"] = ds.segments.size();
  header["pair_count"] = ds.pairs.size();
  header["quality_levels"] = ds.meta.quality_levels;
  ordered_json task_ids = ordered_json::array();
  for (const TrajectorySegment& s : ds.segments) task_ids.push_back(s.task_id);
  header["segment_task_ids"] = std::move(task_ids);
  header["offsets"] = {{"segments", 0}, {"pairs", pairs_offset}};
  const std::string header_text = header.dump();

  std::string out;
  out.reserve(12 + header_text.size() + pairs_offset + ds.pairs.size() * 20);
  out.append(kMagic, 8);
  append_u32(out, static_cast<uint32_t>(header_text.size()));
  out += header_text;
  for (const TrajectorySegment& s : ds.segments) {
    for (double v : s.states) append_f32(out, v);
    for (double v : s.actions) append_f32(out, v);
    for (double v : s.rewards) append_f32(out, v);
  }
  for (const PreferencePair& p : ds.pairs) {
    append_u32(out, p.first);
    append_u32(out, p.second);
    append_u32(out, static_cast<uint32_t>(p.kind));
    append_u32(out, static_cast<uint32_t>(p.target_task));
    append_f32(out, p.label);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("short write to " + path);
}

OfflineDataset load_dataset(const std::string& path) {
  const std::string bytes = read_file(path);
  auto [header, payload_start] = parse_header(bytes, path);
  if (header.at("version").get<int32_t>() != kFormatVersion) {
    throw std::runtime_error(path + ": unsupported dataset version");
  }

  OfflineDataset ds;
  ds.meta.num_tasks = header.at("m").get<int32_t>();
  ds.meta.horizon = header.at("h").get<int32_t>();
  ds.meta.state_dim = header.at("state_dim").get<int32_t>();
  ds.meta.action_dim = header.at("action_dim").get<int32_t>();
  ds.meta.seed = header.at("seed").get<uint64_t>();
  ds.meta.quality_levels = header.at("quality_levels").get<std::vector<double>>();
  const auto task_ids = header.at("segment_task_ids").get<std::vector<int32_t>>();
  const size_t segment_count = header.at("segment_count").get<size_t>();
  const size_t pair_count = header.at("pair_count").get<size_t>();
  if (task_ids.size() != segment_count) {
    throw std::runtime_error(path + ": segment_task_ids does not match segment_count");
  }

  const int32_t h = ds.meta.horizon;
  const int32_t sd = ds.meta.state_dim;
  const int32_t ad = ds.meta.action_dim;
  const size_t segment_bytes = 4 * (static_cast<size_t>(h + 1) * sd + static_cast<size_t>(h) * ad +
                                    static_cast<size_t>(h));
  const size_t need = payload_start + segment_count * segment_bytes + pair_count * 20;
  if (bytes.size() != need) {
    throw std::runtime_error(path + ": payload size mismatch (have " +
                             std::to_string(bytes.size()) + ", expected " + std::to_string(need) +
                             ")");
  }

  const char* p = bytes.data() + payload_start;
  ds.segments.reserve(segment_count);
  for (size_t i = 0; i < segment_count; ++i) {
    TrajectorySegment s;
    s.task_id = task_ids[i];
    s.state_dim = sd;
    s.action_dim = ad;
    s.states.resize(static_cast<size_t>(h + 1) * sd);
    s.actions.resize(static_cast<size_t>(h) * ad);
    s.rewards.resize(static_cast<size_t>(h));
    for (double& v : s.states) { v = read_f32(p); p += 4; }
    for (double& v : s.actions) { v = read_f32(p); p += 4; }
    for (double& v : s.rewards) { v = read_f32(p); p += 4; }
    ds.segments.push_back(std::move(s));
  }
  ds.pairs.reserve(pair_count);
  for (size_t i = 0; i < pair_count; ++i) {
    PreferencePair pair;
    pair.first = read_u32(p); p += 4;
    pair.second = read_u32(p); p += 4;
    const uint32_t kind = read_u32(p); p += 4;
    if (kind > 1) throw std::runtime_error(path + ": invalid pair kind");
    pair.kind = static_cast<PairKind>(kind);
    pair.target_task = static_cast<int32_t>(read_u32(p)); p += 4;
    pair.label = read_f32(p); p += 4;
    ds.pairs.push_back(pair);
  }
  ds.validate();
  return ds;
}

std::string dataset_header_json(const std::string& path) {
  const std::string bytes = read_file(path);
  auto [header, payload_start] = parse_header(bytes, path);
  (void)payload_start;
  return header.dump(2);
}

std::string file_digest(const std::string& path) {
  const std::string bytes = read_file(path);
  uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buf);
}

}  // namespace camp

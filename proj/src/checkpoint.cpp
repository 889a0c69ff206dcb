#include "camp/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace camp {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'C', 'A', 'M', 'P', 'C', 'K', 'P', 'T'};
constexpr int32_t kFormatVersion = 1;

void append_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t read_u32(const char* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void append_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double read_f64(const char* p) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::pair<ordered_json, size_t> parse_header(const std::string& bytes, const std::string& path) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw std::runtime_error(path + ": not a CAMPCKPT file");
  }
  const uint32_t header_len = read_u32(bytes.data() + 8);
  if (bytes.size() < 12 + header_len) throw std::runtime_error(path + ": truncated header");
  return {ordered_json::parse(bytes.substr(12, header_len)), 12 + static_cast<size_t>(header_len)};
}

}  // namespace

void Checkpoint::add(const std::string& name, Tensor t) {
  if (has(name)) throw std::invalid_argument("checkpoint: duplicate tensor " + name);
  tensors.emplace_back(name, std::move(t));
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return true;
  }
  return false;
}

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw std::invalid_argument("checkpoint: missing tensor " + name);
}

void Checkpoint::add_store(const std::string& prefix, const ParamStore& store) {
  for (ParamId id = 0; id < store.count(); ++id) {
    add(prefix + store.name(id), store.value(id));
  }
}

void Checkpoint::load_store(const std::string& prefix, ParamStore& store) const {
  for (ParamId id = 0; id < store.count(); ++id) {
    const Tensor& src = get(prefix + store.name(id));
    Tensor& dst = store.value(id);
    if (!src.same_shape(dst)) {
      throw std::runtime_error("checkpoint: tensor " + prefix + store.name(id) + " has shape " +
                               shape_str(src.shape) + ", expected " + shape_str(dst.shape));
    }
    dst = src;
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ordered_json header;
  header["version"] = kFormatVersion;
  header["meta"] = ckpt.meta;
  ordered_json params = ordered_json::array();
  size_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    ordered_json entry;
    entry["name"] = name;
    entry["shape"] = t.shape;
    entry["offset"] = offset;
    params.push_back(std::move(entry));
    offset += static_cast<size_t>(t.size()) * 8;
  }
  header["params"] = std::move(params);
  const std::string header_text = header.dump();

  std::string out;
  out.reserve(12 + header_text.size() + offset);
  out.append(kMagic, 8);
  append_u32(out, static_cast<uint32_t>(header_text.size()));
  out += header_text;
  for (const auto& [name, t] : ckpt.tensors) {
    for (double v : t.data) append_f64(out, v);
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  auto [header, payload_start] = parse_header(bytes, path);
  if (header.at("version").get<int32_t>() != kFormatVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version");
  }
  Checkpoint ckpt;
  ckpt.meta = header.at("meta");
  for (const auto& entry : header.at("params")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<int64_t>>();
    const size_t offset = entry.at("offset").get<size_t>();
    const int64_t count = shape_product(shape);
    const size_t end = payload_start + offset + static_cast<size_t>(count) * 8;
    if (end > bytes.size()) throw std::runtime_error(path + ": payload truncated at " + name);
    Tensor t(shape);
    for (int64_t i = 0; i < count; ++i) {
      t.data[i] = read_f64(bytes.data() + payload_start + offset + static_cast<size_t>(i) * 8);
    }
    ckpt.add(name, std::move(t));
  }
  return ckpt;
}

std::string checkpoint_header_json(const std::string& path) {
  const std::string bytes = read_file(path);
  auto [header, payload_start] = parse_header(bytes, path);
  (void)payload_start;
  return header.dump(2);
}

}  // namespace camp

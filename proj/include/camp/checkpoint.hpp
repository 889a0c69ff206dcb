#pragma once

#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "camp/tape.hpp"
#include "camp/tensor.hpp"

namespace camp {

/// CAMPCKPT container: magic "CAMPCKPT", u32-le header length, UTF-8 JSON
/// header ({version, meta, params: [{name, shape, offset}]}), then a
/// little-endian float64 payload. `meta` carries whatever the owning module
/// needs beyond raw parameters (schedule vectors, normalization statistics,
/// model dimensions).
struct Checkpoint {
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;

  void add(const std::string& name, Tensor t);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;

  /// Copies every parameter of `store` under `prefix` + its parameter name.
  void add_store(const std::string& prefix, const ParamStore& store);

  /// Writes checkpoint tensors back into `store`, matching by name and
  /// validating shapes.
  void load_store(const std::string& prefix, ParamStore& store) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Header JSON of a CAMPCKPT file without reading the payload.
std::string checkpoint_header_json(const std::string& path);

}  // namespace camp

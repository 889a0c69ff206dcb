#include "camp/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace camp {

Tensor init_weight(int64_t fan_in, int64_t fan_out, Rng& rng) {
  Tensor w({fan_in, fan_out});
  const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : w.data) v = std * rng.normal();
  return w;
}

Mlp::Mlp(ParamStore& store, const std::string& prefix, int32_t in_dim,
         const std::vector<int32_t>& hidden, int32_t out_dim, Rng& init)
    : in_dim_(in_dim), out_dim_(out_dim) {
  int32_t prev = in_dim;
  std::vector<int32_t> dims = hidden;
  dims.push_back(out_dim);
  for (size_t layer = 0; layer < dims.size(); ++layer) {
    const std::string base = prefix + ".layer" + std::to_string(layer);
    weights_.push_back(store.add(base + ".weight", init_weight(prev, dims[layer], init)));
    biases_.push_back(store.add(base + ".bias", Tensor({dims[layer]})));
    prev = dims[layer];
  }
}

Var Mlp::forward_node(Tape& t, ParamStore& store, Var x) const {
  Var h = x;
  for (size_t layer = 0; layer < weights_.size(); ++layer) {
    h = t.linear(h, t.param(store, weights_[layer]), t.param(store, biases_[layer]));
    if (layer + 1 < weights_.size()) h = t.tanh(h);
  }
  return h;
}

Tensor Mlp::infer(const ParamStore& store, const Tensor& x) const {
  Tensor h = x;
  for (size_t layer = 0; layer < weights_.size(); ++layer) {
    h = t_add(t_matmul(h, store.value(weights_[layer])), store.value(biases_[layer]));
    if (layer + 1 < weights_.size()) h = t_tanh(h);
  }
  return h;
}

std::vector<double> sinusoidal_embedding(int32_t k, int32_t dim) {
  if (dim <= 0 || dim % 2 != 0) {
    throw std::invalid_argument("sinusoidal_embedding: dim must be positive and even");
  }
  std::vector<double> out(dim);
  for (int32_t i = 0; i < dim / 2; ++i) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / dim);
    out[2 * i] = std::sin(k * freq);
    out[2 * i + 1] = std::cos(k * freq);
  }
  return out;
}

}  // namespace camp

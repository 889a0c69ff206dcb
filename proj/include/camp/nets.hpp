#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camp/rng.hpp"
#include "camp/tape.hpp"

namespace camp {

/// Fully connected stack with tanh hidden activations and a linear head.
/// Weights go into the owning model's ParamStore under `prefix.layerN.*`;
/// init is N(0, 1/fan_in) for weights, zero for biases.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& prefix, int32_t in_dim,
      const std::vector<int32_t>& hidden, int32_t out_dim, Rng& init);

  /// x: [B, in_dim] -> [B, out_dim], parameters mounted trainable.
  Var forward_node(Tape& tape, ParamStore& store, Var x) const;

  /// Gradient-free forward used by sampling and evaluation.
  Tensor infer(const ParamStore& store, const Tensor& x) const;

  int32_t in_dim() const { return in_dim_; }
  int32_t out_dim() const { return out_dim_; }

 private:
  std::vector<ParamId> weights_;
  std::vector<ParamId> biases_;
  int32_t in_dim_ = 0;
  int32_t out_dim_ = 0;
};

/// Sinusoidal position/timestep features of even dimension `dim`:
/// out[2i] = sin(k * w_i), out[2i+1] = cos(k * w_i), w_i = 10000^(-2i/dim).
std::vector<double> sinusoidal_embedding(int32_t k, int32_t dim);

/// Gaussian init tensor with std 1/sqrt(fan_in).
Tensor init_weight(int64_t fan_in, int64_t fan_out, Rng& rng);

}  // namespace camp

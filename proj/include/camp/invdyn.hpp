#pragma once

#include <cstdint>
#include <vector>

#include "camp/nets.hpp"
#include "camp/tape.hpp"

namespace camp {

/// g_omega(s, s') -> a, trained by squared-error regression on dataset
/// transitions. Predictions are clipped to the actuator bound at inference.
class InverseDynamics {
 public:
  InverseDynamics(int32_t state_dim, int32_t action_dim, double action_max, uint64_t init_seed,
                  std::vector<int32_t> hidden = {128, 128});

  int32_t state_dim() const { return state_dim_; }
  int32_t action_dim() const { return action_dim_; }
  double action_max() const { return action_max_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// Mean over the batch of the squared action error ||a - g(s, s')||^2.
  /// inputs: [B, 2 * state_dim], targets: [B, action_dim].
  Var loss_node(Tape& tape, const Tensor& inputs, const Tensor& targets);

  double loss_value(const Tensor& inputs, const Tensor& targets);

  /// Clipped action for one (s, s') pair.
  std::vector<double> predict(const std::vector<double>& state,
                              const std::vector<double>& next_state) const;

  /// Unclipped batched forward, used by tests and the loss path.
  Tensor infer(const Tensor& inputs) const;

 private:
  int32_t state_dim_ = 0;
  int32_t action_dim_ = 0;
  double action_max_ = 0.0;
  ParamStore store_;
  Mlp mlp_;
};

}  // namespace camp

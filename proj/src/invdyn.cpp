#include "camp/invdyn.hpp"

#include <algorithm>
#include <stdexcept>

namespace camp {

InverseDynamics::InverseDynamics(int32_t state_dim, int32_t action_dim, double action_max,
                                 uint64_t init_seed, std::vector<int32_t> hidden)
    : state_dim_(state_dim), action_dim_(action_dim), action_max_(action_max) {
  if (state_dim < 1 || action_dim < 1 || !(action_max > 0.0)) {
    throw std::invalid_argument("InverseDynamics: invalid dimensions or action bound");
  }
  Rng init(init_seed);
  mlp_ = Mlp(store_, "omega.mlp", 2 * state_dim, hidden, action_dim, init);
}

Var InverseDynamics::loss_node(Tape& t, const Tensor& inputs, const Tensor& targets) {
  if (inputs.rank() != 2 || inputs.shape[1] != 2 * state_dim_) {
    throw std::invalid_argument("invdyn loss: inputs must be [batch, 2 * state_dim]");
  }
  if (targets.rank() != 2 || targets.shape[0] != inputs.shape[0] ||
      targets.shape[1] != action_dim_) {
    throw std::invalid_argument("invdyn loss: targets must be [batch, action_dim]");
  }
  if (inputs.rows() == 0) throw std::invalid_argument("invdyn loss: empty batch");
  Var pred = mlp_.forward_node(t, store_, t.constant(inputs));
  return t.mean(t.sum_last(t.square(t.sub(t.constant(targets), pred))));
}

double InverseDynamics::loss_value(const Tensor& inputs, const Tensor& targets) {
  Tape t;
  return t.val(loss_node(t, inputs, targets)).item();
}

Tensor InverseDynamics::infer(const Tensor& inputs) const {
  return mlp_.infer(store_, inputs);
}

std::vector<double> InverseDynamics::predict(const std::vector<double>& state,
                                             const std::vector<double>& next_state) const {
  if (static_cast<int32_t>(state.size()) != state_dim_ ||
      static_cast<int32_t>(next_state.size()) != state_dim_) {
    throw std::invalid_argument("invdyn predict: state dims do not match model");
  }
  Tensor in({1, 2 * state_dim_});
  std::copy(state.begin(), state.end(), in.data.begin());
  std::copy(next_state.begin(), next_state.end(), in.data.begin() + state_dim_);
  Tensor out = infer(in);
  std::vector<double> a(out.data.begin(), out.data.end());
  for (double& v : a) v = std::clamp(v, -action_max_, action_max_);
  return a;
}

}  // namespace camp

#include "camp/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace camp {

Adam::Adam(ParamStore& store, AdamConfig cfg) : store_(store), cfg_(cfg) {
  first_moment_.reserve(store.count());
  second_moment_.reserve(store.count());
  for (ParamId id = 0; id < store.count(); ++id) {
    first_moment_.emplace_back(store.value(id).shape);
    second_moment_.emplace_back(store.value(id).shape);
  }
}

void Adam::apply(const std::vector<std::pair<ParamId, Tensor>>& grads) {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
  for (const auto& [id, g] : grads) {
    if (id < 0 || id >= static_cast<ParamId>(first_moment_.size())) {
      throw std::invalid_argument("Adam: unknown parameter id " + std::to_string(id));
    }
    Tensor& p = store_.value(id);
    if (!g.same_shape(p)) {
      throw std::invalid_argument("Adam: gradient shape " + shape_str(g.shape) +
                                  " does not match parameter " + store_.name(id) + " " +
                                  shape_str(p.shape));
    }
    Tensor& m = first_moment_[id];
    Tensor& v = second_moment_[id];
    for (int64_t i = 0; i < p.size(); ++i) {
      m.data[i] = cfg_.beta1 * m.data[i] + (1.0 - cfg_.beta1) * g.data[i];
      v.data[i] = cfg_.beta2 * v.data[i] + (1.0 - cfg_.beta2) * g.data[i] * g.data[i];
      const double m_hat = m.data[i] / bc1;
      const double v_hat = v.data[i] / bc2;
      p.data[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }
}

}  // namespace camp

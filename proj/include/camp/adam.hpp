#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "camp/tape.hpp"

namespace camp {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction over one ParamStore. Moment tensors mirror the
/// parameter shapes; step_count advances by exactly one per apply().
class Adam {
 public:
  Adam(ParamStore& store, AdamConfig cfg);

  /// One update from (id, gradient) pairs. Ids without a pair this step keep
  /// their moments untouched. Shape mismatches throw.
  void apply(const std::vector<std::pair<ParamId, Tensor>>& grads);

  int64_t step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }

  /// Adjust the step size mid-run (for decay schedules).
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

 private:
  ParamStore& store_;
  AdamConfig cfg_;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
  int64_t step_count_ = 0;
};

}  // namespace camp

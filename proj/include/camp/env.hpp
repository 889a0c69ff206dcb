#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "camp/rng.hpp"

namespace camp {

/// 2-D point mass with linear dynamics pos' = pos + dt * a and per-task goal
/// on the unit circle: goal_i = (cos 2*pi*i/m, sin 2*pi*i/m). Reward is the
/// negative Euclidean distance to the goal after the transition.
struct PointMassTask {
  int32_t task_id = 0;
  std::array<double, 2> goal{1.0, 0.0};
  int32_t episode_steps = 32;  // full episode length T
  double dt = 1.0;

  static PointMassTask make(int32_t task_id, int32_t num_tasks, int32_t episode_steps = 32,
                            double dt = 1.0);

  /// Task with a goal at an arbitrary angle on the unit circle, for goals
  /// that fall between the canonical task goals.
  static PointMassTask with_goal_angle(int32_t task_id, double angle, int32_t episode_steps = 32,
                                       double dt = 1.0);
};

struct EnvParams {
  double action_max = 0.25;
  double controller_gain = 0.5;  // expert proportional gain
};

/// Fixed-horizon slice of an episode: h+1 states, h actions, h rewards.
/// Generated data satisfies states[t+1] = states[t] + dt * actions[t].
struct TrajectorySegment {
  int32_t task_id = 0;
  int32_t state_dim = 2;
  int32_t action_dim = 2;
  std::vector<double> states;   // (h+1) * state_dim, row-major
  std::vector<double> actions;  // h * action_dim
  std::vector<double> rewards;  // h

  int32_t horizon() const { return static_cast<int32_t>(rewards.size()); }
  const double* state(int32_t t) const { return states.data() + t * state_dim; }
  const double* action(int32_t t) const { return actions.data() + t * action_dim; }

  void validate() const;  // throws when the size relations are broken
};

/// Undiscounted sum of rewards (the R(tau) used by preference labeling).
double segment_return(const TrajectorySegment& segment);

/// One environment transition; the action is clipped per-component to
/// [-action_max, action_max] before integration. Returns the reward.
double env_step(const PointMassTask& task, const EnvParams& params,
                std::array<double, 2>& pos, std::array<double, 2> action);

double expert_action_component(double gain, double delta, double action_max);

/// Expert proportional action clip(gain * (goal - pos)).
std::array<double, 2> expert_action(const PointMassTask& task, const EnvParams& params,
                                    const std::array<double, 2>& pos);

/// Roll one episode and chunk it into segments of length `h`.
///
/// policy_quality in [0, 1] blends the expert controller with uniform random
/// actions per step: a = clip(q * a_expert + (1 - q) * a_random). Start state
/// is uniform in [-1, 1]^2. episode_steps must be a multiple of h.
std::vector<TrajectorySegment> rollout(const PointMassTask& task, const EnvParams& params,
                                       double policy_quality, int32_t h, Rng& rng);

}  // namespace camp

#include "camp/env.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace camp {

PointMassTask PointMassTask::make(int32_t task_id, int32_t num_tasks, int32_t episode_steps,
                                  double dt) {
  if (num_tasks < 1) throw std::invalid_argument("PointMassTask: num_tasks must be >= 1");
  if (task_id < 0 || task_id >= num_tasks) {
    throw std::invalid_argument("PointMassTask: task_id " + std::to_string(task_id) +
                                " outside [0, " + std::to_string(num_tasks) + ")");
  }
  if (episode_steps < 1) throw std::invalid_argument("PointMassTask: episode_steps must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("PointMassTask: dt must be positive");
  const double angle = 2.0 * std::numbers::pi * static_cast<double>(task_id) /
                       static_cast<double>(num_tasks);
  PointMassTask t;
  t.task_id = task_id;
  t.goal = {std::cos(angle), std::sin(angle)};
  t.episode_steps = episode_steps;
  t.dt = dt;
  return t;
}

PointMassTask PointMassTask::with_goal_angle(int32_t task_id, double angle, int32_t episode_steps,
                                             double dt) {
  if (task_id < 0) throw std::invalid_argument("PointMassTask: task_id must be >= 0");
  if (episode_steps < 1) throw std::invalid_argument("PointMassTask: episode_steps must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("PointMassTask: dt must be positive");
  PointMassTask t;
  t.task_id = task_id;
  t.goal = {std::cos(angle), std::sin(angle)};
  t.episode_steps = episode_steps;
  t.dt = dt;
  return t;
}

void TrajectorySegment::validate() const {
  const size_t h = rewards.size();
  if (actions.size() != h * static_cast<size_t>(action_dim) ||
      states.size() != (h + 1) * static_cast<size_t>(state_dim)) {
    throw std::invalid_argument(
        "TrajectorySegment: inconsistent lengths (states " + std::to_string(states.size()) +
        ", actions " + std::to_string(actions.size()) + ", rewards " + std::to_string(h) + ")");
  }
}

double segment_return(const TrajectorySegment& segment) {
  double total = 0.0;
  for (double r : segment.rewards) total += r;
  return total;
}

namespace {
double clip(double v, double lim) { return v > lim ? lim : (v < -lim ? -lim : v); }
}  // namespace

double expert_action_component(double gain, double delta, double action_max) {
  return clip(gain * delta, action_max);
}

std::array<double, 2> expert_action(const PointMassTask& task, const EnvParams& params,
                                    const std::array<double, 2>& pos) {
  return {expert_action_component(params.controller_gain, task.goal[0] - pos[0], params.action_max),
          expert_action_component(params.controller_gain, task.goal[1] - pos[1], params.action_max)};
}

double env_step(const PointMassTask& task, const EnvParams& params, std::array<double, 2>& pos,
                std::array<double, 2> action) {
  action[0] = clip(action[0], params.action_max);
  action[1] = clip(action[1], params.action_max);
  pos[0] += task.dt * action[0];
  pos[1] += task.dt * action[1];
  const double dx = pos[0] - task.goal[0];
  const double dy = pos[1] - task.goal[1];
  if (!std::isfinite(pos[0]) || !std::isfinite(pos[1])) {
    throw std::runtime_error("env_step: non-finite state");
  }
  return -std::sqrt(dx * dx + dy * dy);
}

std::vector<TrajectorySegment> rollout(const PointMassTask& task, const EnvParams& params,
                                       double policy_quality, int32_t h, Rng& rng) {
  if (policy_quality < 0.0 || policy_quality > 1.0) {
    throw std::invalid_argument("rollout: policy_quality must lie in [0, 1]");
  }
  if (h < 1 || task.episode_steps % h != 0) {
    throw std::invalid_argument("rollout: episode_steps (" + std::to_string(task.episode_steps) +
                                ") must be a positive multiple of h (" + std::to_string(h) + ")");
  }

  std::array<double, 2> pos{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

  std::vector<double> states, actions, rewards;
  states.insert(states.end(), pos.begin(), pos.end());
  for (int32_t t = 0; t < task.episode_steps; ++t) {
    const std::array<double, 2> expert = expert_action(task, params, pos);
    const std::array<double, 2> random{rng.uniform(-params.action_max, params.action_max),
                                       rng.uniform(-params.action_max, params.action_max)};
    std::array<double, 2> a{
        clip(policy_quality * expert[0] + (1.0 - policy_quality) * random[0], params.action_max),
        clip(policy_quality * expert[1] + (1.0 - policy_quality) * random[1], params.action_max)};
    const double r = env_step(task, params, pos, a);
    actions.insert(actions.end(), a.begin(), a.end());
    states.insert(states.end(), pos.begin(), pos.end());
    rewards.push_back(r);
  }

  std::vector<TrajectorySegment> segments;
  const int32_t chunks = task.episode_steps / h;
  segments.reserve(chunks);
  for (int32_t c = 0; c < chunks; ++c) {
    TrajectorySegment seg;
    seg.task_id = task.task_id;
    const int32_t s0 = c * h;
    seg.states.assign(states.begin() + s0 * 2, states.begin() + (s0 + h + 1) * 2);
    seg.actions.assign(actions.begin() + s0 * 2, actions.begin() + (s0 + h) * 2);
    seg.rewards.assign(rewards.begin() + s0, rewards.begin() + s0 + h);
    seg.validate();
    segments.push_back(std::move(seg));
  }
  return segments;
}

}  // namespace camp

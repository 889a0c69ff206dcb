#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "camp/dataset.hpp"
#include "camp/env.hpp"
#include "camp/rng.hpp"

using namespace camp;

namespace {
std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}
}  // namespace

TEST_CASE("task goals sit on the unit circle and are distinct") {
  const int m = 5;
  for (int i = 0; i < m; ++i) {
    const PointMassTask t = PointMassTask::make(i, m);
    CHECK(std::abs(std::hypot(t.goal[0], t.goal[1]) - 1.0) < 1e-12);
    for (int j = i + 1; j < m; ++j) {
      const PointMassTask u = PointMassTask::make(j, m);
      CHECK((std::abs(t.goal[0] - u.goal[0]) > 1e-9 || std::abs(t.goal[1] - u.goal[1]) > 1e-9));
    }
  }
}

TEST_CASE("expert rollout reaches the goal within 32 steps") {
  const PointMassTask task = PointMassTask::make(0, 3, 32);
  const EnvParams env;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    auto segments = rollout(task, env, 1.0, 16, rng);
    REQUIRE(segments.size() == 2);
    const TrajectorySegment& last = segments.back();
    const double* fin = last.state(last.horizon());
    CHECK(std::hypot(fin[0] - task.goal[0], fin[1] - task.goal[1]) < 0.05);
  }
}

TEST_CASE("higher policy quality earns higher mean return") {
  const PointMassTask task = PointMassTask::make(1, 3, 32);
  const EnvParams env;
  double expert_total = 0.0, random_total = 0.0;
  for (uint64_t e = 0; e < 100; ++e) {
    Rng r1 = Rng(1000).child(e);
    for (const auto& seg : rollout(task, env, 1.0, 16, r1)) expert_total += segment_return(seg);
    Rng r0 = Rng(2000).child(e);
    for (const auto& seg : rollout(task, env, 0.0, 16, r0)) random_total += segment_return(seg);
  }
  CHECK(expert_total > random_total);
}

TEST_CASE("rollout is deterministic and dynamics-consistent") {
  const PointMassTask task = PointMassTask::make(2, 3, 32);
  const EnvParams env;
  Rng r1(77), r2(77);
  auto a = rollout(task, env, 0.5, 16, r1);
  auto b = rollout(task, env, 0.5, 16, r2);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].states == b[i].states);
    CHECK(a[i].actions == b[i].actions);
    CHECK(a[i].rewards == b[i].rewards);
    // states[t+1] == states[t] + dt * actions[t]
    for (int32_t t = 0; t < a[i].horizon(); ++t) {
      for (int32_t d = 0; d < 2; ++d) {
        CHECK(std::abs(a[i].state(t + 1)[d] - (a[i].state(t)[d] + task.dt * a[i].action(t)[d])) <
              1e-9);
      }
    }
  }
}

TEST_CASE("actions recovered from consecutive states exactly") {
  const PointMassTask task = PointMassTask::make(0, 3, 32);
  const EnvParams env;
  Rng rng(5);
  for (const auto& seg : rollout(task, env, 0.3, 16, rng)) {
    for (int32_t t = 0; t < seg.horizon(); ++t) {
      for (int32_t d = 0; d < 2; ++d) {
        const double recovered = (seg.state(t + 1)[d] - seg.state(t)[d]) / task.dt;
        CHECK(std::abs(recovered - seg.action(t)[d]) < 1e-9);
      }
    }
  }
}

TEST_CASE("segment_return sums rewards") {
  TrajectorySegment seg;
  seg.task_id = 0;
  seg.states.assign(4 * 2, 0.0);
  seg.actions.assign(3 * 2, 0.0);
  seg.rewards = {0.0, 0.0, 0.0};
  CHECK(segment_return(seg) == 0.0);
  seg.rewards = {-1.0, -2.0, -3.0};
  CHECK(segment_return(seg) == doctest::Approx(-6.0));
  seg.task_id = 2;  // relabeling does not change the return
  CHECK(segment_return(seg) == doctest::Approx(-6.0));
}

namespace {
TrajectorySegment make_segment(int32_t task, double reward_each, int32_t h = 2) {
  TrajectorySegment seg;
  seg.task_id = task;
  seg.states.assign((h + 1) * 2, 0.0);
  seg.actions.assign(h * 2, 0.0);
  seg.rewards.assign(h, reward_each);
  return seg;
}
}  // namespace

TEST_CASE("scripted preference follows the two rules") {
  // same task: return comparison
  const TrajectorySegment a = make_segment(0, -1.5);   // R = -3
  const TrajectorySegment b = make_segment(0, -3.0);   // R = -6
  PreferencePair p = scripted_preference(a, b, 0, 1, 0);
  CHECK(p.label == 1.0);
  CHECK(p.kind == PairKind::intra_task);

  // cross task: target wins regardless of return
  const TrajectorySegment worse_target = make_segment(0, -50.0);
  const TrajectorySegment better_other = make_segment(1, -0.5);
  p = scripted_preference(worse_target, better_other, 0, 1, 0);
  CHECK(p.label == 1.0);
  CHECK(p.kind == PairKind::inter_task);

  // tie
  const TrajectorySegment c = make_segment(0, -1.5);
  p = scripted_preference(a, c, 0, 1, 0);
  CHECK(p.label == 0.5);

  // neither segment from the target task
  CHECK_THROWS_AS(scripted_preference(a, b, 0, 1, 2), std::invalid_argument);
}

TEST_CASE("inter-task antisymmetry: swapping the target flips the label") {
  const TrajectorySegment ti = make_segment(0, -4.0);
  const TrajectorySegment tj = make_segment(1, -1.0);
  const PreferencePair as_i = scripted_preference(ti, tj, 0, 1, 0);
  const PreferencePair as_j = scripted_preference(ti, tj, 0, 1, 1);
  CHECK(as_i.label == 1.0);
  CHECK(as_j.label == 0.0);
}

TEST_CASE("intra-task transitivity on strict return gaps") {
  const TrajectorySegment a = make_segment(0, -1.0);
  const TrajectorySegment b = make_segment(0, -2.0);
  const TrajectorySegment c = make_segment(0, -3.0);
  CHECK(scripted_preference(a, b, 0, 1, 0).label == 1.0);
  CHECK(scripted_preference(b, c, 1, 2, 0).label == 1.0);
  CHECK(scripted_preference(a, c, 0, 2, 0).label == 1.0);
}

TEST_CASE("build_dataset splits pair kinds evenly and labels correctly") {
  BuildDatasetOptions options;
  options.num_tasks = 3;
  options.episodes_per_task = 20;
  options.pairs_per_task = 100;
  options.seed = 9;
  const OfflineDataset ds = build_dataset(options);
  ds.validate();

  std::vector<int> intra(3, 0), inter(3, 0);
  for (const PreferencePair& p : ds.pairs) {
    if (p.kind == PairKind::intra_task) {
      ++intra[p.target_task];
    } else {
      ++inter[p.target_task];
      const TrajectorySegment& preferred =
          ds.segments[p.label == 1.0 ? p.first : p.second];
      CHECK(preferred.task_id == p.target_task);
    }
    // labels agree with an independent re-derivation
    const PreferencePair re = scripted_preference(ds.segments[p.first], ds.segments[p.second],
                                                  p.first, p.second, p.target_task);
    CHECK(re.label == p.label);
    CHECK(re.kind == p.kind);
  }
  for (int t = 0; t < 3; ++t) {
    CHECK(intra[t] == 50);
    CHECK(inter[t] == 50);
  }
}

TEST_CASE("single-task dataset requires intra_only") {
  BuildDatasetOptions options;
  options.num_tasks = 1;
  options.episodes_per_task = 5;
  options.pairs_per_task = 10;
  CHECK_THROWS_AS(build_dataset(options), std::invalid_argument);
  options.intra_only = true;
  const OfflineDataset ds = build_dataset(options);
  for (const PreferencePair& p : ds.pairs) CHECK(p.kind == PairKind::intra_task);
}

TEST_CASE("dataset files round-trip and are byte-deterministic") {
  BuildDatasetOptions options;
  options.num_tasks = 2;
  options.episodes_per_task = 6;
  options.pairs_per_task = 12;
  options.seed = 123;

  const std::string p1 = temp_path("camp_ds_a.campds");
  const std::string p2 = temp_path("camp_ds_b.campds");
  save_dataset(build_dataset(options), p1);
  save_dataset(build_dataset(options), p2);
  CHECK(read_bytes(p1) == read_bytes(p2));
  CHECK(file_digest(p1) == file_digest(p2));

  const OfflineDataset loaded = load_dataset(p1);
  const OfflineDataset original = build_dataset(options);
  REQUIRE(loaded.segments.size() == original.segments.size());
  REQUIRE(loaded.pairs.size() == original.pairs.size());
  CHECK(loaded.meta.num_tasks == 2);
  CHECK(loaded.meta.horizon == original.meta.horizon);
  // float32 storage: values match to single precision
  for (size_t i = 0; i < loaded.segments.size(); ++i) {
    CHECK(loaded.segments[i].task_id == original.segments[i].task_id);
    for (size_t j = 0; j < loaded.segments[i].states.size(); ++j) {
      CHECK(loaded.segments[i].states[j] ==
            doctest::Approx(original.segments[i].states[j]).epsilon(1e-6));
    }
  }
  for (size_t i = 0; i < loaded.pairs.size(); ++i) {
    CHECK(loaded.pairs[i].first == original.pairs[i].first);
    CHECK(loaded.pairs[i].second == original.pairs[i].second);
    CHECK(loaded.pairs[i].label == original.pairs[i].label);
  }
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("extend_dataset_with_task adds pairs targeting the new task") {
  BuildDatasetOptions options;
  options.num_tasks = 2;
  options.episodes_per_task = 6;
  options.pairs_per_task = 10;
  const OfflineDataset base = build_dataset(options);
  const PointMassTask new_task = PointMassTask::with_goal_angle(2, 1.0, options.episode_steps);
  const OfflineDataset extended = extend_dataset_with_task(
      base, new_task, 6, 20, options.quality_levels, options.env, 77);
  CHECK(extended.meta.num_tasks == 3);
  int32_t new_pairs = 0;
  for (const PreferencePair& p : extended.pairs) {
    if (p.target_task == 2) ++new_pairs;
  }
  CHECK(new_pairs == 20);
  CHECK(extended.pairs.size() == base.pairs.size() + 20);
}

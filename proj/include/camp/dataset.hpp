#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camp/env.hpp"

namespace camp {

enum class PairKind : uint32_t { intra_task = 0, inter_task = 1 };

/// Two segments and a preference label. y = 1 prefers `first`, y = 0 prefers
/// `second`, y = 0.5 marks a tie. Inter-task pairs always prefer the segment
/// belonging to target_task.
struct PreferencePair {
  uint32_t first = 0;   // segment indices into OfflineDataset::segments
  uint32_t second = 0;
  PairKind kind = PairKind::intra_task;
  int32_t target_task = 0;
  double label = 0.5;
};

struct DatasetMeta {
  int32_t num_tasks = 0;
  int32_t horizon = 0;
  int32_t state_dim = 2;
  int32_t action_dim = 2;
  uint64_t seed = 0;
  std::vector<double> quality_levels;  // behavior-policy mixture
};

struct OfflineDataset {
  DatasetMeta meta;
  std::vector<TrajectorySegment> segments;
  std::vector<PreferencePair> pairs;

  void validate() const;  // index bounds, per-task coverage, pair contracts
};

/// Scripted multi-task preference over (a, b) with respect to target_task:
/// same-task pairs order by return (ties within 1e-9 give y = 0.5);
/// cross-task pairs prefer the target-task segment regardless of return.
/// Segment indices are carried through so the pair can be stored.
PreferencePair scripted_preference(const TrajectorySegment& a, const TrajectorySegment& b,
                                   uint32_t index_a, uint32_t index_b, int32_t target_task);

/// Tie tolerance for intra-task return comparison.
inline constexpr double kReturnTieTolerance = 1e-9;

struct BuildDatasetOptions {
  int32_t num_tasks = 3;
  int32_t episodes_per_task = 200;
  int32_t episode_steps = 32;
  int32_t segment_horizon = 16;
  int32_t pairs_per_task = 300;  // split evenly intra/inter, odd count favors intra
  bool intra_only = false;       // required when num_tasks == 1
  std::vector<double> quality_levels{0.2, 0.4, 0.6, 0.8, 1.0};
  EnvParams env;
  uint64_t seed = 0;
};

/// Roll behavior episodes for every task and label preference pairs for each
/// target task. Deterministic in (options, seed).
OfflineDataset build_dataset(const BuildDatasetOptions& options);

/// Appends rollouts of `task` (its id must equal base.meta.num_tasks) and
/// preference pairs targeting the new task, with segments of the existing
/// tasks serving as inter-task negatives. Used when relearning w* for an
/// unseen task.
OfflineDataset extend_dataset_with_task(const OfflineDataset& base, const PointMassTask& task,
                                        int32_t episodes, int32_t pairs,
                                        const std::vector<double>& quality_levels,
                                        const EnvParams& env, uint64_t seed);

// --------------------------------------------------------------------------
// CAMPDS1 container: magic "CAMPDS1\n", u32-le header length, UTF-8 JSON
// header, then f32-le segment payloads in index order (states, actions,
// rewards per segment) followed by one record per pair:
// u32 first, u32 second, u32 kind, u32 target_task, f32 label.
// --------------------------------------------------------------------------

void save_dataset(const OfflineDataset& ds, const std::string& path);
OfflineDataset load_dataset(const std::string& path);

/// Header JSON text of a CAMPDS1 file, without loading payloads.
std::string dataset_header_json(const std::string& path);

/// FNV-1a 64-bit digest of a file's bytes, hex-encoded. Run directories
/// record this for the dataset they trained from.
std::string file_digest(const std::string& path);

}  // namespace camp

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "camp/checkpoint.hpp"
#include "camp/config.hpp"
#include "camp/dataset.hpp"
#include "camp/diffusion.hpp"
#include "camp/encoder.hpp"
#include "camp/env.hpp"
#include "camp/invdyn.hpp"
#include "camp/metrics.hpp"
#include "camp/schedule.hpp"
#include "camp/stats.hpp"

namespace camp {

/// Deterministic index split: every `fold`-th segment/pair is held out.
struct DataSplit {
  std::vector<uint32_t> train_segments, held_segments;
  std::vector<uint32_t> train_pairs, held_pairs;
};
DataSplit split_dataset(const OfflineDataset& data, int32_t fold = 10);

/// The full model stack of one run plus its frozen inference artifacts.
struct Pipeline {
  RunConfig config;
  EnvParams env;
  TrajectoryEncoder encoder;
  OptimalReprSet wstar;
  NoisePredictor noise_model;
  CondPredictor cond_model;
  InverseDynamics inverse_dynamics;
  DiffusionSchedule schedule;
  NormStats norm;

  static Pipeline create(const RunConfig& config, const OfflineDataset& data);

  Checkpoint to_checkpoint(int64_t step) const;
  static Pipeline from_checkpoint(const Checkpoint& ckpt);

  /// Condition vector for task i: [mu*_i || log_var*_i]. When sampling mode
  /// is on and an rng is supplied, the mean block is replaced by one draw
  /// w ~ N(mu*, Sigma*).
  std::vector<double> condition_for_task(int32_t task, Rng* sampler = nullptr) const;
};

/// Pre-draws one diffusion training batch from the given segments.
DiffusionBatch prepare_diffusion_batch(const std::vector<const TrajectorySegment*>& segments,
                                       const TrajectoryEncoder& encoder,
                                       const DiffusionSchedule& schedule, const NormStats& norm,
                                       double dropout_prob, int32_t batch_size, Rng& rng);

struct TrainHooks {
  std::function<void(int64_t step, const Pipeline&)> on_checkpoint;
};

/// Algorithm order per batch: encoder phase, optimal-representation phase,
/// MI-regularized diffusion update, inverse-dynamics update.
RunMetrics train_pipeline(Pipeline& pipeline, const OfflineDataset& data,
                          MetricsWriter* writer = nullptr, const TrainHooks& hooks = {});

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct ControlEval {
  double success_rate = 0.0;
  double mean_return = 0.0;
  int32_t episodes = 0;
};

/// Receding-horizon control: per env step, sample a trajectory conditioned on
/// w* of `condition_task` (defaults to the executed task), decode the first
/// action through inverse dynamics, execute, repeat. Episodes run on seeds
/// derived from `seed` and are independent of batching.
ControlEval evaluate_control(const Pipeline& pipeline, int32_t task_id, int32_t episodes,
                             uint64_t seed, int32_t condition_task = -1);

enum class ReferencePolicy { expert, random };
ControlEval evaluate_reference(const RunConfig& config, int32_t task_id, int32_t episodes,
                               uint64_t seed, ReferencePolicy kind);

struct AlignmentPoint {
  double coefficient = 0.0;
  double mean_return = 0.0;
};
struct AlignmentResult {
  std::vector<AlignmentPoint> points;
  double spearman = 0.0;
};

/// Interpolates the condition between a low-return held-out segment's
/// embedding (coefficient 0) and w* of the task (coefficient 1) and reports
/// the realized mean return per grid point.
AlignmentResult alignment_sweep(const Pipeline& pipeline, const OfflineDataset& data,
                                int32_t task_id, const std::vector<double>& coefficients,
                                int32_t episodes, uint64_t seed);

void write_alignment_csv(const std::string& path, const AlignmentResult& result);
void write_alignment_svg(const std::string& path, const AlignmentResult& result);

// ---------------------------------------------------------------------------
// Representation diagnostics
// ---------------------------------------------------------------------------

/// Held-out accuracy of a nearest-centroid task classifier on embedding means.
double nearest_centroid_probe(const TrajectoryEncoder& encoder, const OfflineDataset& data,
                              const std::vector<uint32_t>& train_segments,
                              const std::vector<uint32_t>& held_segments, int32_t num_tasks);

/// Fraction of non-tie pairs with d(mu+, mu*) < d(mu-, mu*).
double triplet_satisfaction(const TrajectoryEncoder& encoder, const OptimalReprSet& wstar,
                            const OfflineDataset& data, const std::vector<uint32_t>& pairs);

/// Mean return of the `count` segments whose embedding means sit closest to
/// mu*_task, against the task's overall mean return.
struct WstarAlignment {
  double nearest_mean_return = 0.0;
  double task_mean_return = 0.0;
};
WstarAlignment wstar_return_alignment(const TrajectoryEncoder& encoder,
                                      const OptimalReprSet& wstar, const OfflineDataset& data,
                                      int32_t task, int32_t count = 10);

struct EmbeddingReportPaths {
  std::string csv_path;
  std::string svg_path;
};

/// PCA scatter of all segment embeddings (colored by task, shaded by return)
/// with w* means overplotted, plus a CSV of projected coordinates.
EmbeddingReportPaths embedding_report(const TrajectoryEncoder& encoder,
                                      const OptimalReprSet& wstar, const OfflineDataset& data,
                                      const std::string& out_dir, uint64_t seed);

// ---------------------------------------------------------------------------
// MI / information diagnostics
// ---------------------------------------------------------------------------

/// Fits the pipeline's condition predictor against the frozen noise model
/// (only phi is updated).
void fit_cond_predictor(Pipeline& pipeline, const OfflineDataset& data, const DataSplit& split,
                        int32_t steps, uint64_t seed);

/// Mean held-out KL(f_psi(tau0) || q_phi(eps_theta(tau_k))) with conditions
/// always supplied (no dropout); `draws` noise draws per segment.
double heldout_condition_kl(const Pipeline& pipeline, const OfflineDataset& data,
                            const DataSplit& split, int32_t draws, uint64_t seed);

/// Trains a fresh predictor q_phi(w | tau_k) at one fixed noise level k and
/// returns its held-out prediction KL. Probes the data-processing trend.
double noise_level_prediction_kl(const TrajectoryEncoder& encoder, const OfflineDataset& data,
                                 const DataSplit& split, const DiffusionSchedule& schedule,
                                 const NormStats& norm, int32_t k, int32_t steps,
                                 int32_t batch_size, double lr, uint64_t seed);

// ---------------------------------------------------------------------------
// Ablations
// ---------------------------------------------------------------------------

enum class AblationSweep { repr_dim, zeta };

struct AblationCell {
  std::string cell;
  std::string param;
  double value = 0.0;
  std::string dataset_digest;
  double probe_accuracy = 0.0;
  double triplet_satisfaction = 0.0;
  double heldout_mi_kl = 0.0;
  double alignment_spearman = 0.0;  // NaN for sweeps that skip the rollout diagnostic
};

/// Trains one full pipeline per sweep value on the shared dataset and seed.
/// Zeta sweeps additionally record the alignment correlation per cell; the
/// zeta = 0 value is reported, not thresholded.
std::vector<AblationCell> ablation_runner(const RunConfig& base, AblationSweep sweep,
                                          const std::vector<double>& values,
                                          const OfflineDataset& data,
                                          const std::string& dataset_digest);

void write_ablation_csv(const std::string& path, const std::vector<AblationCell>& cells);

// ---------------------------------------------------------------------------
// Run directories
// ---------------------------------------------------------------------------

/// Exclusive lockfile guarding a run directory; released on destruction.
class RunLock {
 public:
  explicit RunLock(const std::string& run_dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::string lock_path_;
};

struct TrainRunResult {
  std::string run_dir;
  std::string final_checkpoint;
  std::string metrics_csv;
  std::string dataset_digest;
};

/// End-to-end `train` command: validates inputs, snapshots the effective
/// config and dataset digest into the run directory, trains, and writes
/// checkpoints plus an incremental metrics CSV.
TrainRunResult run_training(const RunConfig& config, const std::string& dataset_path,
                            const std::string& run_dir);

}  // namespace camp

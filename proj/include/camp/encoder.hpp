#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camp/adam.hpp"
#include "camp/dataset.hpp"
#include "camp/env.hpp"
#include "camp/gaussian.hpp"
#include "camp/nets.hpp"
#include "camp/rng.hpp"
#include "camp/tape.hpp"

namespace camp {

struct EncoderSpec {
  int32_t state_dim = 2;
  int32_t action_dim = 2;
  int32_t horizon = 16;
  int32_t d_model = 64;
  int32_t repr_dim = 16;
};

/// Trajectory encoder f_psi: per-step embedding of (state || action) rows,
/// learned positional encodings, one single-head scaled dot-product
/// self-attention stage with a residual, mean pooling, and a linear head
/// producing (mean, log_var) of the embedding Gaussian.
class TrajectoryEncoder {
 public:
  TrajectoryEncoder(EncoderSpec spec, uint64_t init_seed);

  const EncoderSpec& spec() const { return spec_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// Differentiable encode; parameters are mounted trainable on the tape.
  GaussNodes encode_node(Tape& tape, const TrajectorySegment& segment);

  /// Gradient-free encode for evaluation and for stop-gradient conditions.
  GaussianEmbedding encode(const TrajectorySegment& segment) const;

 private:
  Tensor step_matrix(const TrajectorySegment& segment) const;  // [h, sd+ad]

  EncoderSpec spec_;
  ParamStore store_;
  ParamId embed_w_, embed_b_, positions_;
  ParamId wq_, wk_, wv_;
  ParamId head_w_, head_b_;
};

/// Per-task optimal representations w*_i: trainable (mean, log_var) pairs.
/// Log-variances are clamped to the embedding bounds wherever they are read.
class OptimalReprSet {
 public:
  OptimalReprSet(int32_t num_tasks, int32_t repr_dim, uint64_t init_seed);

  int32_t count() const { return num_tasks_; }
  int32_t repr_dim() const { return repr_dim_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// Appends w*_k for a new task; returns its id.
  int32_t add_task(uint64_t init_seed);

  GaussNodes node(Tape& tape, int32_t task);          // trainable, clamped
  GaussNodes frozen_node(Tape& tape, int32_t task) const;  // stop-gradient
  GaussianEmbedding get(int32_t task) const;

 private:
  void check_task(int32_t task) const;

  int32_t num_tasks_ = 0;
  int32_t repr_dim_ = 0;
  ParamStore store_;
  std::vector<ParamId> means_;
  std::vector<ParamId> log_vars_;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Default guard added to the reciprocal KL term.
inline constexpr double kDefaultReciprocalGuard = 1e-4;

/// KL(pos || opt) + 1 / (KL(neg || opt) + guard).
double repr_kl_loss(const GaussianEmbedding& pos, const GaussianEmbedding& neg,
                    const GaussianEmbedding& opt, double guard = kDefaultReciprocalGuard);
Var repr_kl_loss_node(Tape& tape, const GaussNodes& pos, const GaussNodes& neg,
                      const GaussNodes& opt, double guard = kDefaultReciprocalGuard);

/// max(d(pos, opt) - d(neg, opt) + margin, 0) with Euclidean d over means.
double triplet_loss(const std::vector<double>& pos_mean, const std::vector<double>& neg_mean,
                    const std::vector<double>& opt_mean, double margin);
Var triplet_loss_node(Tape& tape, Var pos_mean, Var neg_mean, Var opt_mean, double margin);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// One oriented triple: positive and negative segment for a target task.
struct ReprBatchItem {
  const TrajectorySegment* positive = nullptr;
  const TrajectorySegment* negative = nullptr;
  int32_t target_task = 0;
};

enum class ReprPhase { encoder, optimal };

struct ReprStepStats {
  double kl_loss = 0.0;
  double triplet_loss = 0.0;
};

struct ReprLossOptions {
  double margin = 1.0;
  double reciprocal_guard = kDefaultReciprocalGuard;
};

/// One stop-gradient alternation step. The encoder phase updates psi only
/// (w* bit-identical); the optimal phase updates w* only (psi bit-identical).
ReprStepStats train_repr_step(TrajectoryEncoder& encoder, OptimalReprSet& wstar,
                              const std::vector<ReprBatchItem>& batch, ReprPhase phase,
                              Adam& encoder_adam, Adam& wstar_adam,
                              const ReprLossOptions& options);

/// Draws an oriented batch from the dataset's preference pairs. Tie-labeled
/// pairs give no (positive, negative) ordering and are skipped.
std::vector<ReprBatchItem> sample_repr_batch(const OfflineDataset& data,
                                             const std::vector<uint32_t>& pair_indices,
                                             int32_t batch_size, Rng& rng);

struct NewTaskReprOptions {
  int32_t steps = 600;
  int32_t batch_size = 32;
  bool freeze_encoder = true;
  ReprLossOptions loss;
  AdamConfig wstar_adam;
  AdamConfig encoder_adam;
  uint64_t seed = 0;
};

/// Learns w*_k for a task not yet present in `wstar` from preference pairs
/// targeting `new_task` (negatives come from existing tasks). With
/// freeze_encoder the existing representations and psi stay bit-identical.
int32_t train_new_task_repr(TrajectoryEncoder& encoder, OptimalReprSet& wstar,
                            const OfflineDataset& data, int32_t new_task,
                            const NewTaskReprOptions& options);

}  // namespace camp

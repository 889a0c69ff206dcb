#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "camp/env.hpp"
#include "camp/gaussian.hpp"
#include "camp/nets.hpp"
#include "camp/rng.hpp"
#include "camp/schedule.hpp"
#include "camp/tape.hpp"

namespace camp {

/// Per-dimension statistics used to bring state sequences to zero mean and
/// unit variance before diffusion. Stored in checkpoints alongside the
/// schedule.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;

  void validate() const;
  int32_t dim() const { return static_cast<int32_t>(mean.size()); }

  /// Flattened state sequences are normalized per state dimension.
  std::vector<double> normalize(const std::vector<double>& flat) const;
  std::vector<double> denormalize(const std::vector<double>& flat) const;
};

NormStats compute_state_norm(const std::vector<TrajectorySegment>& segments);

/// Identity stats for data that is already unit scale.
NormStats identity_norm(int32_t dim);

// ---------------------------------------------------------------------------
// Models
// ---------------------------------------------------------------------------

struct NoisePredictorSpec {
  int32_t data_dim = 34;   // flattened (h+1) * state_dim
  int32_t cond_dim = 32;   // [mean || log_var] of the representation
  int32_t time_embed_dim = 64;
  int32_t cond_embed_dim = 64;
  std::vector<int32_t> hidden{256, 256};
};

/// epsilon_theta(x_k, c, k): MLP over [x_k || time embedding || condition
/// embedding]. The condition pathway is a linear map of the condition vector;
/// a learned null embedding stands in when the condition is dropped.
class NoisePredictor {
 public:
  NoisePredictor(NoisePredictorSpec spec, uint64_t init_seed);

  const NoisePredictorSpec& spec() const { return spec_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  /// Training forward. x_k and cond are per-sample rows; drop[i] != 0 routes
  /// sample i through the null embedding.
  Var forward_node(Tape& tape, const Tensor& x_k, const std::vector<int32_t>& k,
                   const Tensor& cond, const std::vector<uint8_t>& drop,
                   const DiffusionSchedule& schedule);

  /// Gradient-free forward for one shared step k. cond == nullptr uses the
  /// null embedding for every row.
  Tensor infer(const Tensor& x_k, int32_t k, const Tensor* cond,
               const DiffusionSchedule& schedule) const;

 private:
  Tensor time_rows(const std::vector<int32_t>& k) const;

  NoisePredictorSpec spec_;
  ParamStore store_;
  Mlp mlp_;
  ParamId cond_w_, cond_b_, null_embed_;
};

/// q_phi(w | tau_k): predicts the representation Gaussian from the predicted
/// noise. Log-variances are clamped to the embedding bounds.
class CondPredictor {
 public:
  CondPredictor(int32_t in_dim, int32_t repr_dim, uint64_t init_seed,
                std::vector<int32_t> hidden = {128, 128});

  int32_t repr_dim() const { return repr_dim_; }
  int32_t in_dim() const { return mlp_.in_dim(); }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  GaussNodes forward_node(Tape& tape, Var eps_pred);
  std::pair<Tensor, Tensor> infer(const Tensor& eps_pred) const;  // (mean, log_var) rows

 private:
  ParamStore store_;
  Mlp mlp_;
  int32_t repr_dim_ = 0;
};

// ---------------------------------------------------------------------------
// Forward process and losses
// ---------------------------------------------------------------------------

/// x_k = sqrt(alpha_bar_k) x0 + sqrt(1 - alpha_bar_k) eps, k in [1, K].
std::vector<double> q_sample(const std::vector<double>& x0, int32_t k,
                             const std::vector<double>& eps, const DiffusionSchedule& schedule);

/// One pre-drawn training sample; losses are deterministic given the batch.
struct DiffusionSample {
  std::vector<double> x0;  // normalized data vector
  int32_t k = 1;
  std::vector<double> eps;
  bool drop = false;
  GaussianEmbedding w;     // encoder posterior (stop-gradient through psi)
};
using DiffusionBatch = std::vector<DiffusionSample>;

struct DiffusionLossOptions {
  double zeta = 0.1;
  bool weighted_score = false;   // per-step ELBO coefficient instead of the simple loss
  bool batch_prior_mi = false;   // moment-matched batch prior instead of per-sample posterior
  // Leading dims of x_k replaced by the clean x0 values during training, so
  // the sampler's first-state inpainting stays on-distribution. The replaced
  // dims drop out of the score loss.
  int32_t inpaint_dims = 0;
};

struct DiffusionLossNodes {
  Var score;
  Var mi;        // invalid when no condition predictor was given
  Var combined;  // score + zeta * mi
  Var eps_pred;
};

/// Builds the training graph once so the score and MI terms share the same
/// epsilon_theta forward. `cond_model` may be null (pure score matching).
DiffusionLossNodes diffusion_loss_nodes(Tape& tape, NoisePredictor& model,
                                        CondPredictor* cond_model, const DiffusionBatch& batch,
                                        const DiffusionSchedule& schedule,
                                        const DiffusionLossOptions& options);

double score_matching_loss(NoisePredictor& model, const DiffusionBatch& batch,
                           const DiffusionSchedule& schedule, bool weighted = false);
double mi_kl_term(NoisePredictor& model, CondPredictor& cond_model, const DiffusionBatch& batch,
                  const DiffusionSchedule& schedule, bool batch_prior = false);
double combined_loss(NoisePredictor& model, CondPredictor& cond_model,
                     const DiffusionBatch& batch, const DiffusionSchedule& schedule,
                     const DiffusionLossOptions& options);

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Predicted-x0 magnitude bound used during sampling. The last cosine steps
/// have alpha near its floor, where the posterior mean amplifies prediction
/// error by 1/sqrt(alpha); bounding the implied x0 keeps chains on
/// distribution (data is normalized, so 5 sigma is far outside it).
inline constexpr double kSampleX0Clip = 5.0;

/// One reverse step x_k -> x_{k-1} with classifier-free guidance
/// eps_hat = eps_uncond + s * (eps_cond - eps_uncond); the endpoints s = 0
/// and s = 1 take the respective branch directly. The posterior mean is
/// computed from the implied x0 (clamped to +-x0_clip); posterior noise for
/// row i comes from row_rngs[i], and none is added at k = 1.
Tensor guided_denoise_step(const NoisePredictor& model, const Tensor& x_k, int32_t k,
                           const Tensor* cond, double guidance,
                           const DiffusionSchedule& schedule, std::vector<Rng>& row_rngs,
                           double x0_clip = kSampleX0Clip);

/// Full reverse chain from x_K ~ N(0, I). `constrain` (when set) runs on the
/// initial noise and after every denoise step; rows evolve on independent rng
/// streams.
Tensor ddpm_sample(const NoisePredictor& model, const DiffusionSchedule& schedule, int64_t count,
                   const Tensor* cond, double guidance, std::vector<Rng>& row_rngs,
                   const std::function<void(Tensor&)>& constrain = {});

/// Trajectory sampling with first-state inpainting: the slot holding the
/// current state is overwritten (in normalized space) after every denoise
/// step, and the returned sequence starts at exactly `start_state`.
std::vector<double> sample_trajectory(const NoisePredictor& model,
                                      const DiffusionSchedule& schedule, const NormStats& norm,
                                      const std::vector<double>& cond,
                                      const std::vector<double>& start_state, double guidance,
                                      uint64_t seed);

/// Lockstep batch of independent chains (one rng per row/episode).
Tensor sample_trajectories(const NoisePredictor& model, const DiffusionSchedule& schedule,
                           const NormStats& norm, const Tensor& cond_rows,
                           const Tensor& start_rows, double guidance,
                           std::vector<Rng>& episode_rngs);

// ---------------------------------------------------------------------------
// ELBO bookkeeping
// ---------------------------------------------------------------------------

/// Monte-Carlo estimates of the four ELBO terms on one data vector. The
/// reconstruction decoder uses variance beta_1 (the k = 1 posterior variance
/// is zero); prior_x is parameter-free.
struct ElboTerms {
  double reconstruction = 0.0;
  double prior_x = 0.0;
  double prior_c = 0.0;
  double denoise_matching = 0.0;
};

ElboTerms elbo_terms(const NoisePredictor& model, const GaussianEmbedding& cond_posterior,
                     const std::vector<double>& x0, const DiffusionSchedule& schedule, Rng& rng);

}  // namespace camp

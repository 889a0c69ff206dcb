#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace camp {

/// Every knob of the pipeline. Defaults reproduce the reference setup:
/// 200 denoising steps, 16-dimensional representations, zeta 0.1, guidance
/// 1.2, diffusion learning rate 2e-4.
struct RunConfig {
  // Environment / dataset
  int32_t tasks = 3;
  int32_t episode_steps = 32;
  int32_t horizon = 16;  // segment length h
  double action_max = 0.25;
  double dt = 1.0;
  double controller_gain = 0.5;
  int32_t episodes_per_task = 200;
  int32_t pairs_per_task = 300;
  // Quality 0 episodes are pure noise and carry no task signal, so the
  // behavior mixture keeps a nonzero floor.
  std::vector<double> quality_levels{0.2, 0.4, 0.6, 0.8, 1.0};

  // Representation learning
  int32_t repr_dim = 16;  // |w|
  int32_t d_model = 64;
  double margin = 1.0;       // triplet delta
  double eps_recip = 1e-4;   // reciprocal KL guard
  double lr_encoder = 1e-3;
  double lr_wstar = 3e-3;

  // Diffusion
  int32_t denoise_steps = 200;  // K
  std::string schedule = "cosine";
  double zeta = 0.1;
  double dropout_prob = 0.25;
  double guidance = 1.2;
  double lr_diffusion = 2e-4;
  bool weighted_score_loss = false;
  bool batch_prior_mi = false;
  bool condition_sampling = false;  // sample w ~ N(mu*, Sigma*) instead of moments

  // Inverse dynamics
  double lr_invdyn = 1e-3;

  // Training loop
  int32_t batch_size = 32;
  int32_t train_steps = 3000;
  int32_t checkpoint_interval = 1000;
  int32_t log_interval = 25;

  // Evaluation
  int32_t eval_episodes = 50;
  double success_threshold = 0.1;

  uint64_t seed = 0;
};

/// Parses `key = value` lines ('#' starts a comment). Unknown keys,
/// duplicates, and type mismatches raise errors naming the key and line.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical serialization; parse(serialize(c)) == c.
std::string serialize_config(const RunConfig& config);

/// Applies one `key=value` override (CLI flags route through this).
void apply_config_override(RunConfig& config, const std::string& key, const std::string& value);

/// Documented key list, in canonical order.
std::vector<std::string> config_keys();

/// Range checks; throws on the first violated bound.
void validate_config(const RunConfig& config);

bool config_equal(const RunConfig& a, const RunConfig& b);

}  // namespace camp

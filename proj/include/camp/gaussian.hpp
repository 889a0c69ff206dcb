#pragma once

#include <cstdint>
#include <vector>

#include "camp/rng.hpp"
#include "camp/tape.hpp"
#include "camp/tensor.hpp"

namespace camp {

/// Bounds applied to every log-variance this codebase produces; variances
/// stay inside [e^-10, e^4].
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 4.0;

/// Diagonal Gaussian over the representation space: N(mean, diag(exp(log_var))).
struct GaussianEmbedding {
  std::vector<double> mean;
  std::vector<double> log_var;

  int32_t dim() const { return static_cast<int32_t>(mean.size()); }
  void validate() const;  // equal sizes, finite, log_var inside the clamp bounds

  std::vector<double> sample(Rng& rng) const;

  /// Condition vector handed to the diffusion model: [mean || log_var].
  std::vector<double> condition_vector() const;
};

/// Closed-form KL(p || q) between diagonal Gaussians of equal dimension:
///   1/2 * sum_d [ lv_q - lv_p + exp(lv_p - lv_q)
///                 + (mu_p - mu_q)^2 * exp(-lv_q) - 1 ].
double kl_diag_gauss(const GaussianEmbedding& p, const GaussianEmbedding& q);

/// Pair of tape nodes carrying the two moment rows of one or more Gaussians.
/// Shapes are either [d] for a single embedding or [B, d] for a batch.
struct GaussNodes {
  Var mean;
  Var log_var;
};

/// Differentiable KL(p || q) applied row-wise; returns shape [] for [d]
/// inputs and [B] for [B, d] inputs.
Var kl_diag_gauss_node(Tape& tape, const GaussNodes& p, const GaussNodes& q);

GaussianEmbedding embedding_from_rows(const Tensor& mean, const Tensor& log_var, int64_t row);

}  // namespace camp

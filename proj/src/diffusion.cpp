#include "camp/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace camp {

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

void NormStats::validate() const {
  if (mean.size() != std.size() || mean.empty()) {
    throw std::invalid_argument("NormStats: mean/std sizes invalid");
  }
  for (double s : std) {
    if (!(s > 0.0)) throw std::invalid_argument("NormStats: std must be positive");
  }
}

std::vector<double> NormStats::normalize(const std::vector<double>& flat) const {
  const size_t d = mean.size();
  if (flat.size() % d != 0) throw std::invalid_argument("normalize: length not a multiple of dim");
  std::vector<double> out(flat.size());
  for (size_t i = 0; i < flat.size(); ++i) out[i] = (flat[i] - mean[i % d]) / std[i % d];
  return out;
}

std::vector<double> NormStats::denormalize(const std::vector<double>& flat) const {
  const size_t d = mean.size();
  if (flat.size() % d != 0) {
    throw std::invalid_argument("denormalize: length not a multiple of dim");
  }
  std::vector<double> out(flat.size());
  for (size_t i = 0; i < flat.size(); ++i) out[i] = flat[i] * std[i % d] + mean[i % d];
  return out;
}

NormStats compute_state_norm(const std::vector<TrajectorySegment>& segments) {
  if (segments.empty()) throw std::invalid_argument("compute_state_norm: no segments");
  const int32_t d = segments[0].state_dim;
  NormStats stats;
  stats.mean.assign(d, 0.0);
  stats.std.assign(d, 0.0);
  int64_t count = 0;
  for (const TrajectorySegment& s : segments) {
    for (size_t i = 0; i < s.states.size(); ++i) stats.mean[i % d] += s.states[i];
    count += static_cast<int64_t>(s.states.size()) / d;
  }
  for (double& m : stats.mean) m /= static_cast<double>(count);
  for (const TrajectorySegment& s : segments) {
    for (size_t i = 0; i < s.states.size(); ++i) {
      const double c = s.states[i] - stats.mean[i % d];
      stats.std[i % d] += c * c;
    }
  }
  for (double& v : stats.std) v = std::max(std::sqrt(v / static_cast<double>(count)), 1e-8);
  stats.validate();
  return stats;
}

NormStats identity_norm(int32_t dim) {
  NormStats stats;
  stats.mean.assign(dim, 0.0);
  stats.std.assign(dim, 1.0);
  return stats;
}

// ---------------------------------------------------------------------------
// NoisePredictor
// ---------------------------------------------------------------------------

NoisePredictor::NoisePredictor(NoisePredictorSpec spec, uint64_t init_seed) : spec_(spec) {
  if (spec.data_dim < 1 || spec.cond_dim < 1) {
    throw std::invalid_argument("NoisePredictor: dimensions must be positive");
  }
  Rng init(init_seed);
  const int32_t in_dim = spec.data_dim + spec.time_embed_dim + spec.cond_embed_dim;
  mlp_ = Mlp(store_, "theta.mlp", in_dim, spec.hidden, spec.data_dim, init);
  cond_w_ = store_.add("theta.cond.weight", init_weight(spec.cond_dim, spec.cond_embed_dim, init));
  cond_b_ = store_.add("theta.cond.bias", Tensor({spec.cond_embed_dim}));
  Tensor null_embed({spec.cond_embed_dim});
  for (double& v : null_embed.data) v = 0.02 * init.normal();
  null_embed_ = store_.add("theta.null_embed", std::move(null_embed));
}

Tensor NoisePredictor::time_rows(const std::vector<int32_t>& k) const {
  Tensor rows({static_cast<int64_t>(k.size()), spec_.time_embed_dim});
  for (size_t i = 0; i < k.size(); ++i) {
    const auto emb = sinusoidal_embedding(k[i], spec_.time_embed_dim);
    std::copy(emb.begin(), emb.end(), rows.data.begin() + static_cast<int64_t>(i) * spec_.time_embed_dim);
  }
  return rows;
}

Var NoisePredictor::forward_node(Tape& t, const Tensor& x_k, const std::vector<int32_t>& k,
                                 const Tensor& cond, const std::vector<uint8_t>& drop,
                                 const DiffusionSchedule& schedule) {
  const int64_t batch = x_k.rows();
  if (x_k.rank() != 2 || x_k.shape[1] != spec_.data_dim) {
    throw std::invalid_argument("NoisePredictor: x_k shape " + shape_str(x_k.shape) +
                                " does not match data_dim " + std::to_string(spec_.data_dim));
  }
  if (cond.rank() != 2 || cond.shape[0] != batch || cond.shape[1] != spec_.cond_dim) {
    throw std::invalid_argument("NoisePredictor: cond shape " + shape_str(cond.shape) +
                                " does not match [batch, cond_dim]");
  }
  if (static_cast<int64_t>(k.size()) != batch || static_cast<int64_t>(drop.size()) != batch) {
    throw std::invalid_argument("NoisePredictor: k/drop sizes do not match batch");
  }
  for (int32_t step : k) schedule.index(step);  // bounds check

  Var x_node = t.constant(x_k);
  Var time_node = t.constant(time_rows(k));
  Var cond_embed = t.linear(t.constant(cond), t.param(store_, cond_w_), t.param(store_, cond_b_));
  Tensor mask({batch, 1});
  for (int64_t i = 0; i < batch; ++i) mask.data[i] = drop[i] ? 1.0 : 0.0;
  Tensor keep({batch, 1});
  for (int64_t i = 0; i < batch; ++i) keep.data[i] = drop[i] ? 0.0 : 1.0;
  Var null_row = t.reshape(t.param(store_, null_embed_), {1, spec_.cond_embed_dim});
  Var mixed = t.add(t.mul(cond_embed, t.constant(keep)), t.mul(null_row, t.constant(mask)));
  Var input = t.concat_last({x_node, time_node, mixed});
  return mlp_.forward_node(t, store_, input);
}

Tensor NoisePredictor::infer(const Tensor& x_k, int32_t k, const Tensor* cond,
                             const DiffusionSchedule& schedule) const {
  schedule.index(k);
  const int64_t batch = x_k.rows();
  if (x_k.rank() != 2 || x_k.shape[1] != spec_.data_dim) {
    throw std::invalid_argument("NoisePredictor: x_k shape " + shape_str(x_k.shape) +
                                " does not match data_dim " + std::to_string(spec_.data_dim));
  }
  const auto temb = sinusoidal_embedding(k, spec_.time_embed_dim);
  Tensor cond_rows({batch, spec_.cond_embed_dim});
  if (cond != nullptr) {
    if (cond->rank() != 2 || cond->shape[0] != batch || cond->shape[1] != spec_.cond_dim) {
      throw std::invalid_argument("NoisePredictor: cond shape " + shape_str(cond->shape) +
                                  " does not match [batch, cond_dim]");
    }
    cond_rows = t_add(t_matmul(*cond, store_.value(cond_w_)),
                      t_reshape(store_.value(cond_b_), {1, spec_.cond_embed_dim}));
  } else {
    const Tensor& null_embed = store_.value(null_embed_);
    for (int64_t i = 0; i < batch; ++i) {
      std::copy(null_embed.data.begin(), null_embed.data.end(),
                cond_rows.data.begin() + i * spec_.cond_embed_dim);
    }
  }
  Tensor input({batch, spec_.data_dim + spec_.time_embed_dim + spec_.cond_embed_dim});
  const int64_t in_dim = input.shape[1];
  for (int64_t i = 0; i < batch; ++i) {
    double* row = input.data.data() + i * in_dim;
    std::copy_n(x_k.data.data() + i * spec_.data_dim, spec_.data_dim, row);
    std::copy(temb.begin(), temb.end(), row + spec_.data_dim);
    std::copy_n(cond_rows.data.data() + i * spec_.cond_embed_dim, spec_.cond_embed_dim,
                row + spec_.data_dim + spec_.time_embed_dim);
  }
  return mlp_.infer(store_, input);
}

// ---------------------------------------------------------------------------
// CondPredictor
// ---------------------------------------------------------------------------

CondPredictor::CondPredictor(int32_t in_dim, int32_t repr_dim, uint64_t init_seed,
                             std::vector<int32_t> hidden)
    : repr_dim_(repr_dim) {
  if (in_dim < 1 || repr_dim < 1) {
    throw std::invalid_argument("CondPredictor: dimensions must be positive");
  }
  Rng init(init_seed);
  mlp_ = Mlp(store_, "phi.mlp", in_dim, hidden, 2 * repr_dim, init);
}

GaussNodes CondPredictor::forward_node(Tape& t, Var eps_pred) {
  Var out = mlp_.forward_node(t, store_, eps_pred);
  GaussNodes g;
  g.mean = t.slice_last(out, 0, repr_dim_);
  g.log_var = t.clamp(t.slice_last(out, repr_dim_, repr_dim_), kLogVarMin, kLogVarMax);
  return g;
}

std::pair<Tensor, Tensor> CondPredictor::infer(const Tensor& eps_pred) const {
  Tensor out = mlp_.infer(store_, eps_pred);
  Tensor mean = t_slice_last(out, 0, repr_dim_);
  Tensor log_var = t_clamp(t_slice_last(out, repr_dim_, repr_dim_), kLogVarMin, kLogVarMax);
  return {std::move(mean), std::move(log_var)};
}

// ---------------------------------------------------------------------------
// Forward process and losses
// ---------------------------------------------------------------------------

std::vector<double> q_sample(const std::vector<double>& x0, int32_t k,
                             const std::vector<double>& eps, const DiffusionSchedule& schedule) {
  if (x0.size() != eps.size()) throw std::invalid_argument("q_sample: x0/eps size mismatch");
  const double ab = schedule.alpha_bar(k);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  std::vector<double> out(x0.size());
  for (size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

namespace {

// Eq.-13-style per-step coefficient; the k = 1 posterior variance is zero, so
// the reconstruction decoder variance beta_1 stands in there.
double step_weight(const DiffusionSchedule& s, int32_t k) {
  const double beta = s.beta(k);
  const double var = k == 1 ? s.beta(1) : s.posterior_var(k);
  return beta * beta / (2.0 * var * (1.0 - s.alpha_bar(k)) * s.alpha(k));
}

struct BatchTensors {
  Tensor x_k;     // [B, D]
  Tensor eps;     // [B, D]
  Tensor cond;    // [B, C]
  Tensor w_mean;  // [B, w]
  Tensor w_lv;    // [B, w]
  std::vector<int32_t> k;
  std::vector<uint8_t> drop;
};

BatchTensors assemble(const DiffusionBatch& batch, const NoisePredictorSpec& spec,
                      const DiffusionSchedule& schedule) {
  if (batch.empty()) throw std::invalid_argument("diffusion loss: empty batch");
  const int64_t b = static_cast<int64_t>(batch.size());
  const int32_t repr = batch[0].w.dim();
  BatchTensors out{Tensor({b, spec.data_dim}), Tensor({b, spec.data_dim}),
                   Tensor({b, spec.cond_dim}), Tensor({b, repr}), Tensor({b, repr}),
                   {}, {}};
  out.k.resize(b);
  out.drop.resize(b);
  for (int64_t i = 0; i < b; ++i) {
    const DiffusionSample& s = batch[i];
    if (static_cast<int32_t>(s.x0.size()) != spec.data_dim ||
        static_cast<int32_t>(s.eps.size()) != spec.data_dim) {
      throw std::invalid_argument("diffusion loss: sample dim does not match data_dim");
    }
    if (s.w.dim() != repr || 2 * repr != spec.cond_dim) {
      throw std::invalid_argument("diffusion loss: representation dim mismatch");
    }
    auto xk = q_sample(s.x0, s.k, s.eps, schedule);
    for (int32_t d = 0; d < inpaint_dims; ++d) xk[d] = s.x0[d];
    std::copy(xk.begin(), xk.end(), out.x_k.data.begin() + i * spec.data_dim);
    std::copy(s.eps.begin(), s.eps.end(), out.eps.data.begin() + i * spec.data_dim);
    const auto cv = s.w.condition_vector();
    std::copy(cv.begin(), cv.end(), out.cond.data.begin() + i * spec.cond_dim);
    std::copy(s.w.mean.begin(), s.w.mean.end(), out.w_mean.data.begin() + i * repr);
    std::copy(s.w.log_var.begin(), s.w.log_var.end(), out.w_lv.data.begin() + i * repr);
    out.k[i] = s.k;
    out.drop[i] = s.drop ? 1 : 0;
  }
  return out;
}

}  // namespace

DiffusionLossNodes diffusion_loss_nodes(Tape& t, NoisePredictor& model,
                                        CondPredictor* cond_model, const DiffusionBatch& batch,
                                        const DiffusionSchedule& schedule,
                                        const DiffusionLossOptions& options) {
  if (options.zeta < 0.0) throw std::invalid_argument("combined loss: zeta must be >= 0");
  BatchTensors bt = assemble(batch, model.spec(), schedule);
  const int64_t b = static_cast<int64_t>(batch.size());

  DiffusionLossNodes nodes;
  nodes.eps_pred = model.forward_node(t, bt.x_k, bt.k, bt.cond, bt.drop, schedule);

  Var per_sample = t.sum_last(t.square(t.sub(t.constant(bt.eps), nodes.eps_pred)));
  if (options.weighted_score) {
    Tensor weights({b});
    for (int64_t i = 0; i < b; ++i) weights.data[i] = step_weight(schedule, bt.k[i]);
    per_sample = t.mul(per_sample, t.constant(weights));
  }
  nodes.score = t.mean(per_sample);

  if (cond_model != nullptr) {
    GaussNodes predicted = cond_model->forward_node(t, nodes.eps_pred);
    GaussNodes target;
    if (options.batch_prior_mi) {
      // Moment-matched Gaussian of the batch's posterior mixture.
      const int64_t w = bt.w_mean.shape[1];
      Tensor pm({w}), pv({w});
      for (int64_t d = 0; d < w; ++d) {
        double mu = 0.0;
        for (int64_t i = 0; i < b; ++i) mu += bt.w_mean.data[i * w + d];
        mu /= static_cast<double>(b);
        double var = 0.0;
        for (int64_t i = 0; i < b; ++i) {
          const double m = bt.w_mean.data[i * w + d];
          var += std::exp(bt.w_lv.data[i * w + d]) + m * m;
        }
        var = var / static_cast<double>(b) - mu * mu;
        pm.data[d] = mu;
        pv.data[d] = std::min(std::max(std::log(std::max(var, 1e-12)), kLogVarMin), kLogVarMax);
      }
      target.mean = t.reshape(t.constant(pm), {1, w});
      target.log_var = t.reshape(t.constant(pv), {1, w});
      // Broadcast the single prior row against every predicted row.
      Tensor ones({b, 1}, 1.0);
      target.mean = t.mul(t.constant(ones), target.mean);
      target.log_var = t.mul(t.constant(ones), target.log_var);
    } else {
      target.mean = t.constant(bt.w_mean);
      target.log_var = t.constant(bt.w_lv);
    }
    nodes.mi = t.mean(kl_diag_gauss_node(t, target, predicted));
    nodes.combined = t.add(nodes.score, t.scale(nodes.mi, options.zeta));
  } else {
    nodes.combined = nodes.score;
  }
  return nodes;
}

double score_matching_loss(NoisePredictor& model, const DiffusionBatch& batch,
                           const DiffusionSchedule& schedule, bool weighted) {
  Tape t;
  DiffusionLossOptions options;
  options.weighted_score = weighted;
  return t.val(diffusion_loss_nodes(t, model, nullptr, batch, schedule, options).score).item();
}

double mi_kl_term(NoisePredictor& model, CondPredictor& cond_model, const DiffusionBatch& batch,
                  const DiffusionSchedule& schedule, bool batch_prior) {
  Tape t;
  DiffusionLossOptions options;
  options.batch_prior_mi = batch_prior;
  return t.val(diffusion_loss_nodes(t, model, &cond_model, batch, schedule, options).mi).item();
}

double combined_loss(NoisePredictor& model, CondPredictor& cond_model,
                     const DiffusionBatch& batch, const DiffusionSchedule& schedule,
                     const DiffusionLossOptions& options) {
  Tape t;
  return t.val(diffusion_loss_nodes(t, model, &cond_model, batch, schedule, options).combined)
      .item();
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

Tensor guided_denoise_step(const NoisePredictor& model, const Tensor& x_k, int32_t k,
                           const Tensor* cond, double guidance,
                           const DiffusionSchedule& schedule, std::vector<Rng>& row_rngs,
                           double x0_clip) {
  const int64_t b = x_k.rows();
  if (static_cast<int64_t>(row_rngs.size()) != b) {
    throw std::invalid_argument("guided_denoise_step: one rng per row required");
  }
  if (!(x0_clip > 0.0)) throw std::invalid_argument("guided_denoise_step: x0_clip must be > 0");
  Tensor eps_hat;
  if (cond == nullptr || guidance == 0.0) {
    eps_hat = model.infer(x_k, k, nullptr, schedule);
  } else if (guidance == 1.0) {
    eps_hat = model.infer(x_k, k, cond, schedule);
  } else {
    Tensor eps_c = model.infer(x_k, k, cond, schedule);
    Tensor eps_u = model.infer(x_k, k, nullptr, schedule);
    eps_hat = t_add(eps_u, t_scale(t_sub(eps_c, eps_u), guidance));
  }

  const double a = schedule.alpha(k);
  const double ab = schedule.alpha_bar(k);
  const double ab_prev = k == 1 ? 1.0 : schedule.alpha_bar(k - 1);
  const double sigma = std::sqrt(schedule.posterior_var(k));
  // Posterior mean through the implied x0: x0 = (x_k - sqrt(1-ab) eps) / sqrt(ab),
  // mu = (sqrt(ab_prev) beta x0 + sqrt(a) (1 - ab_prev) x_k) / (1 - ab).
  const double inv_sqrt_ab = 1.0 / std::sqrt(ab);
  const double noise_scale = std::sqrt(1.0 - ab);
  const double c0 = std::sqrt(ab_prev) * schedule.beta(k) / (1.0 - ab);
  const double ck = std::sqrt(a) * (1.0 - ab_prev) / (1.0 - ab);

  Tensor out(x_k.shape);
  const int64_t d = x_k.shape[1];
  for (int64_t i = 0; i < b; ++i) {
    for (int64_t j = 0; j < d; ++j) {
      const int64_t idx = i * d + j;
      double x0 = inv_sqrt_ab * (x_k.data[idx] - noise_scale * eps_hat.data[idx]);
      x0 = std::min(std::max(x0, -x0_clip), x0_clip);
      out.data[idx] = c0 * x0 + ck * x_k.data[idx];
    }
    if (k > 1) {
      for (int64_t j = 0; j < d; ++j) out.data[i * d + j] += sigma * row_rngs[i].normal();
    }
  }
  return out;
}

Tensor ddpm_sample(const NoisePredictor& model, const DiffusionSchedule& schedule, int64_t count,
                   const Tensor* cond, double guidance, std::vector<Rng>& row_rngs,
                   const std::function<void(Tensor&, int32_t)>& constrain) {
  if (count < 1) throw std::invalid_argument("ddpm_sample: count must be >= 1");
  if (static_cast<int64_t>(row_rngs.size()) != count) {
    throw std::invalid_argument("ddpm_sample: one rng per sample required");
  }
  const int32_t d = model.spec().data_dim;
  Tensor x({count, d});
  for (int64_t i = 0; i < count; ++i) {
    for (int32_t j = 0; j < d; ++j) x.data[i * d + j] = row_rngs[i].normal();
  }
  for (int32_t k = schedule.steps(); k >= 1; --k) {
    x = guided_denoise_step(model, x, k, cond, guidance, schedule, row_rngs);
    if (!x.all_finite()) {
      throw std::runtime_error("ddpm_sample: non-finite values after denoise step " +
                               std::to_string(k));
    }
    if (constrain) constrain(x, k);
  }
  return x;
}

Tensor sample_trajectories(const NoisePredictor& model, const DiffusionSchedule& schedule,
                           const NormStats& norm, const Tensor& cond_rows,
                           const Tensor& start_rows, double guidance,
                           std::vector<Rng>& episode_rngs) {
  const int64_t b = start_rows.rows();
  const int32_t sd = static_cast<int32_t>(start_rows.shape[1]);
  if (sd != norm.dim()) {
    throw std::invalid_argument("sample_trajectories: start dim does not match norm stats");
  }
  Tensor start_norm(start_rows.shape);
  for (int64_t i = 0; i < b; ++i) {
    for (int32_t j = 0; j < sd; ++j) {
      start_norm.data[i * sd + j] =
          (start_rows.data[i * sd + j] - norm.mean[j]) / norm.std[j];
    }
  }
  auto inpaint = [&](Tensor& x, int32_t) {
    for (int64_t i = 0; i < b; ++i) {
      for (int32_t j = 0; j < sd; ++j) x.data[i * x.shape[1] + j] = start_norm.data[i * sd + j];
    }
  };
  Tensor x = ddpm_sample(model, schedule, b, cond_rows.size() > 0 ? &cond_rows : nullptr,
                         guidance, episode_rngs, inpaint);
  // De-normalize, then pin the first state bit-exactly.
  const int64_t dd = x.shape[1];
  for (int64_t i = 0; i < b; ++i) {
    for (int64_t j = 0; j < dd; ++j) {
      const int32_t sdim = static_cast<int32_t>(j % sd);
      x.data[i * dd + j] = x.data[i * dd + j] * norm.std[sdim] + norm.mean[sdim];
    }
    for (int32_t j = 0; j < sd; ++j) x.data[i * dd + j] = start_rows.data[i * sd + j];
  }
  return x;
}

std::vector<double> sample_trajectory(const NoisePredictor& model,
                                      const DiffusionSchedule& schedule, const NormStats& norm,
                                      const std::vector<double>& cond,
                                      const std::vector<double>& start_state, double guidance,
                                      uint64_t seed) {
  Tensor cond_rows;
  if (!cond.empty()) {
    cond_rows = Tensor({1, static_cast<int64_t>(cond.size())}, cond);
  }
  Tensor start({1, static_cast<int64_t>(start_state.size())}, start_state);
  std::vector<Rng> rngs{Rng(seed)};
  Tensor out = sample_trajectories(model, schedule, norm, cond_rows, start, guidance, rngs);
  return out.data;
}

// ---------------------------------------------------------------------------
// ELBO bookkeeping
// ---------------------------------------------------------------------------

namespace {
// DDPM posterior mean q(x_{k-1} | x_k, x_0).
std::vector<double> posterior_mean(const DiffusionSchedule& s, int32_t k,
                                   const std::vector<double>& x0,
                                   const std::vector<double>& xk) {
  const double a = s.alpha(k);
  const double ab = s.alpha_bar(k);
  const double ab_prev = k == 1 ? 1.0 : s.alpha_bar(k - 1);
  const double c0 = std::sqrt(ab_prev) * s.beta(k) / (1.0 - ab);
  const double ck = std::sqrt(a) * (1.0 - ab_prev) / (1.0 - ab);
  std::vector<double> mu(x0.size());
  for (size_t i = 0; i < x0.size(); ++i) mu[i] = c0 * x0[i] + ck * xk[i];
  return mu;
}

// Model posterior mean from the predicted noise.
std::vector<double> model_mean(const NoisePredictor& model, const DiffusionSchedule& s, int32_t k,
                               const std::vector<double>& xk, const Tensor& cond_rows) {
  Tensor x({1, static_cast<int64_t>(xk.size())}, xk);
  Tensor eps = model.infer(x, k, cond_rows.size() > 0 ? &cond_rows : nullptr, s);
  const double coeff = s.beta(k) / std::sqrt(1.0 - s.alpha_bar(k));
  const double inv_sqrt_a = 1.0 / std::sqrt(s.alpha(k));
  std::vector<double> mu(xk.size());
  for (size_t i = 0; i < xk.size(); ++i) mu[i] = inv_sqrt_a * (xk[i] - coeff * eps.data[i]);
  return mu;
}
}  // namespace

ElboTerms elbo_terms(const NoisePredictor& model, const GaussianEmbedding& cond_posterior,
                     const std::vector<double>& x0, const DiffusionSchedule& schedule, Rng& rng) {
  if (static_cast<int32_t>(x0.size()) != model.spec().data_dim) {
    throw std::invalid_argument("elbo_terms: x0 dim does not match model");
  }
  const int32_t K = schedule.steps();
  const size_t d = x0.size();
  const auto cv = cond_posterior.condition_vector();
  Tensor cond_rows({1, static_cast<int64_t>(cv.size())}, cv);

  ElboTerms terms;

  // Prior matching for x_K: KL(q(x_K | x_0) || N(0, I)), closed form,
  // parameter-free.
  const double ab_K = schedule.alpha_bar(K);
  for (double v : x0) {
    terms.prior_x += 0.5 * ((1.0 - ab_K) + ab_K * v * v - 1.0 - std::log(1.0 - ab_K));
  }

  // Prior matching for c: KL(q_psi(c | x_0) || N(0, I)).
  GaussianEmbedding standard;
  standard.mean.assign(cond_posterior.mean.size(), 0.0);
  standard.log_var.assign(cond_posterior.mean.size(), 0.0);
  terms.prior_c = kl_diag_gauss(cond_posterior, standard);

  // Reconstruction: E_{q(x_1|x_0)} log N(x_0; mu_theta(x_1, 1, c), beta_1 I),
  // one Monte-Carlo draw.
  {
    std::vector<double> eps(d);
    for (double& v : eps) v = rng.normal();
    const auto x1 = q_sample(x0, 1, eps, schedule);
    const auto mu = model_mean(model, schedule, 1, x1, cond_rows);
    const double var = schedule.beta(1);
    double log_prob = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * var);
    for (size_t i = 0; i < d; ++i) {
      log_prob -= 0.5 * (x0[i] - mu[i]) * (x0[i] - mu[i]) / var;
    }
    terms.reconstruction = log_prob;
  }

  // Denoising matching: sum over k of KL between the two equal-variance
  // posteriors, one draw of x_k per step.
  for (int32_t k = 2; k <= K; ++k) {
    std::vector<double> eps(d);
    for (double& v : eps) v = rng.normal();
    const auto xk = q_sample(x0, k, eps, schedule);
    const auto mu_q = posterior_mean(schedule, k, x0, xk);
    const auto mu_p = model_mean(model, schedule, k, xk, cond_rows);
    double sq = 0.0;
    for (size_t i = 0; i < d; ++i) sq += (mu_q[i] - mu_p[i]) * (mu_q[i] - mu_p[i]);
    terms.denoise_matching += sq / (2.0 * schedule.posterior_var(k));
  }
  return terms;
}

}  // namespace camp

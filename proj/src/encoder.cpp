#include "camp/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace camp {

// ---------------------------------------------------------------------------
// TrajectoryEncoder
// ---------------------------------------------------------------------------

TrajectoryEncoder::TrajectoryEncoder(EncoderSpec spec, uint64_t init_seed) : spec_(spec) {
  if (spec.repr_dim < 1 || spec.d_model < 1 || spec.horizon < 1) {
    throw std::invalid_argument("TrajectoryEncoder: dimensions must be positive");
  }
  Rng init(init_seed);
  const int32_t step_dim = spec.state_dim + spec.action_dim;
  embed_w_ = store_.add("psi.embed.weight", init_weight(step_dim, spec.d_model, init));
  embed_b_ = store_.add("psi.embed.bias", Tensor({spec.d_model}));
  Tensor pos({spec.horizon, spec.d_model});
  for (double& v : pos.data) v = 0.02 * init.normal();
  positions_ = store_.add("psi.positions", std::move(pos));
  wq_ = store_.add("psi.attn.wq", init_weight(spec.d_model, spec.d_model, init));
  wk_ = store_.add("psi.attn.wk", init_weight(spec.d_model, spec.d_model, init));
  wv_ = store_.add("psi.attn.wv", init_weight(spec.d_model, spec.d_model, init));
  head_w_ = store_.add("psi.head.weight", init_weight(spec.d_model, 2 * spec.repr_dim, init));
  head_b_ = store_.add("psi.head.bias", Tensor({2 * spec.repr_dim}));
}

Tensor TrajectoryEncoder::step_matrix(const TrajectorySegment& segment) const {
  segment.validate();
  if (segment.state_dim != spec_.state_dim || segment.action_dim != spec_.action_dim ||
      segment.horizon() != spec_.horizon) {
    throw std::invalid_argument(
        "encode: segment dims (h=" + std::to_string(segment.horizon()) + ", sd=" +
        std::to_string(segment.state_dim) + ", ad=" + std::to_string(segment.action_dim) +
        ") do not match encoder spec (h=" + std::to_string(spec_.horizon) + ", sd=" +
        std::to_string(spec_.state_dim) + ", ad=" + std::to_string(spec_.action_dim) + ")");
  }
  const int32_t step_dim = spec_.state_dim + spec_.action_dim;
  Tensor x({spec_.horizon, step_dim});
  for (int32_t t = 0; t < spec_.horizon; ++t) {
    for (int32_t d = 0; d < spec_.state_dim; ++d) {
      x.data[t * step_dim + d] = segment.state(t)[d];
    }
    for (int32_t d = 0; d < spec_.action_dim; ++d) {
      x.data[t * step_dim + spec_.state_dim + d] = segment.action(t)[d];
    }
  }
  return x;
}

GaussNodes TrajectoryEncoder::encode_node(Tape& t, const TrajectorySegment& segment) {
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(spec_.d_model));
  Var x = t.constant(step_matrix(segment));
  Var h = t.add(t.tanh(t.linear(x, t.param(store_, embed_w_), t.param(store_, embed_b_))),
                t.param(store_, positions_));
  Var q = t.matmul(h, t.param(store_, wq_));
  Var k = t.matmul(h, t.param(store_, wk_));
  Var v = t.matmul(h, t.param(store_, wv_));
  Var scores = t.scale(t.matmul(q, t.transpose(k)), attn_scale);
  Var mixed = t.matmul(t.softmax_last(scores), v);
  Var pooled = t.mean_rows(t.add(h, mixed));
  Var out = t.add(t.reshape(t.matmul(t.reshape(pooled, {1, spec_.d_model}),
                                     t.param(store_, head_w_)),
                            {2 * spec_.repr_dim}),
                  t.param(store_, head_b_));
  GaussNodes g;
  g.mean = t.slice_last(out, 0, spec_.repr_dim);
  g.log_var = t.clamp(t.slice_last(out, spec_.repr_dim, spec_.repr_dim), kLogVarMin, kLogVarMax);
  return g;
}

GaussianEmbedding TrajectoryEncoder::encode(const TrajectorySegment& segment) const {
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(spec_.d_model));
  Tensor x = step_matrix(segment);
  Tensor h = t_add(t_tanh(t_add(t_matmul(x, store_.value(embed_w_)), store_.value(embed_b_))),
                   store_.value(positions_));
  Tensor q = t_matmul(h, store_.value(wq_));
  Tensor k = t_matmul(h, store_.value(wk_));
  Tensor v = t_matmul(h, store_.value(wv_));
  Tensor scores = t_scale(t_matmul(q, t_transpose(k)), attn_scale);
  Tensor mixed = t_matmul(t_softmax_last(scores), v);
  Tensor pooled = t_mean_rows(t_add(h, mixed));
  Tensor out = t_add(t_matmul(t_reshape(pooled, {1, spec_.d_model}), store_.value(head_w_)),
                     t_reshape(store_.value(head_b_), {1, 2 * spec_.repr_dim}));
  GaussianEmbedding e;
  e.mean.assign(out.data.begin(), out.data.begin() + spec_.repr_dim);
  e.log_var.resize(spec_.repr_dim);
  for (int32_t d = 0; d < spec_.repr_dim; ++d) {
    e.log_var[d] = std::min(std::max(out.data[spec_.repr_dim + d], kLogVarMin), kLogVarMax);
  }
  return e;
}

// ---------------------------------------------------------------------------
// OptimalReprSet
// ---------------------------------------------------------------------------

OptimalReprSet::OptimalReprSet(int32_t num_tasks, int32_t repr_dim, uint64_t init_seed)
    : repr_dim_(repr_dim) {
  if (num_tasks < 0 || repr_dim < 1) {
    throw std::invalid_argument("OptimalReprSet: invalid sizes");
  }
  for (int32_t i = 0; i < num_tasks; ++i) {
    add_task(Rng(init_seed).child(static_cast<uint64_t>(i)).next_u64());
  }
}

int32_t OptimalReprSet::add_task(uint64_t init_seed) {
  Rng init(init_seed);
  Tensor mean({repr_dim_});
  for (double& v : mean.data) v = 0.1 * init.normal();
  const int32_t id = num_tasks_++;
  means_.push_back(store_.add("wstar.mean." + std::to_string(id), std::move(mean)));
  log_vars_.push_back(store_.add("wstar.logvar." + std::to_string(id), Tensor({repr_dim_})));
  return id;
}

void OptimalReprSet::check_task(int32_t task) const {
  if (task < 0 || task >= num_tasks_) {
    throw std::invalid_argument("OptimalReprSet: unknown task id " + std::to_string(task));
  }
}

GaussNodes OptimalReprSet::node(Tape& t, int32_t task) {
  check_task(task);
  GaussNodes g;
  g.mean = t.param(store_, means_[task]);
  g.log_var = t.clamp(t.param(store_, log_vars_[task]), kLogVarMin, kLogVarMax);
  return g;
}

GaussNodes OptimalReprSet::frozen_node(Tape& t, int32_t task) const {
  check_task(task);
  GaussNodes g;
  g.mean = t.frozen(store_, means_[task]);
  g.log_var = t.clamp(t.frozen(store_, log_vars_[task]), kLogVarMin, kLogVarMax);
  return g;
}

GaussianEmbedding OptimalReprSet::get(int32_t task) const {
  check_task(task);
  GaussianEmbedding e;
  e.mean = store_.value(means_[task]).data;
  e.log_var = store_.value(log_vars_[task]).data;
  for (double& v : e.log_var) v = std::min(std::max(v, kLogVarMin), kLogVarMax);
  return e;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

double repr_kl_loss(const GaussianEmbedding& pos, const GaussianEmbedding& neg,
                    const GaussianEmbedding& opt, double guard) {
  return kl_diag_gauss(pos, opt) + 1.0 / (kl_diag_gauss(neg, opt) + guard);
}

Var repr_kl_loss_node(Tape& t, const GaussNodes& pos, const GaussNodes& neg,
                      const GaussNodes& opt, double guard) {
  Var kl_pos = kl_diag_gauss_node(t, pos, opt);
  Var kl_neg = kl_diag_gauss_node(t, neg, opt);
  return t.add(kl_pos, t.reciprocal(t.add_scalar(kl_neg, guard)));
}

namespace {
double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// sqrt(|a - b|^2 + eps); the epsilon keeps the gradient finite at zero.
Var distance_node(Tape& t, Var a, Var b) {
  return t.sqrt(t.add_scalar(t.sum_last(t.square(t.sub(a, b))), 1e-12));
}
}  // namespace

double triplet_loss(const std::vector<double>& pos_mean, const std::vector<double>& neg_mean,
                    const std::vector<double>& opt_mean, double margin) {
  if (pos_mean.size() != opt_mean.size() || neg_mean.size() != opt_mean.size()) {
    throw std::invalid_argument("triplet_loss: dimension mismatch");
  }
  if (!(margin > 0.0)) throw std::invalid_argument("triplet_loss: margin must be positive");
  return std::max(euclid(pos_mean, opt_mean) - euclid(neg_mean, opt_mean) + margin, 0.0);
}

Var triplet_loss_node(Tape& t, Var pos_mean, Var neg_mean, Var opt_mean, double margin) {
  if (!(margin > 0.0)) throw std::invalid_argument("triplet_loss: margin must be positive");
  Var gap = t.sub(distance_node(t, pos_mean, opt_mean), distance_node(t, neg_mean, opt_mean));
  return t.relu(t.add_scalar(gap, margin));
}

// ---------------------------------------------------------------------------
// Training steps
// ---------------------------------------------------------------------------

ReprStepStats train_repr_step(TrajectoryEncoder& encoder, OptimalReprSet& wstar,
                              const std::vector<ReprBatchItem>& batch, ReprPhase phase,
                              Adam& encoder_adam, Adam& wstar_adam,
                              const ReprLossOptions& options) {
  if (batch.empty()) throw std::invalid_argument("train_repr_step: empty batch");
  for (const ReprBatchItem& item : batch) {
    if (item.target_task < 0 || item.target_task >= wstar.count()) {
      throw std::invalid_argument("train_repr_step: unknown task id " +
                                  std::to_string(item.target_task));
    }
  }

  Tape tape;
  std::vector<Var> kl_terms, triplet_terms;
  kl_terms.reserve(batch.size());
  triplet_terms.reserve(batch.size());
  for (const ReprBatchItem& item : batch) {
    GaussNodes pos, neg, opt;
    if (phase == ReprPhase::encoder) {
      pos = encoder.encode_node(tape, *item.positive);
      neg = encoder.encode_node(tape, *item.negative);
      opt = wstar.frozen_node(tape, item.target_task);
    } else {
      const GaussianEmbedding ep = encoder.encode(*item.positive);
      const GaussianEmbedding en = encoder.encode(*item.negative);
      pos.mean = tape.constant(Tensor({encoder.spec().repr_dim}, ep.mean));
      pos.log_var = tape.constant(Tensor({encoder.spec().repr_dim}, ep.log_var));
      neg.mean = tape.constant(Tensor({encoder.spec().repr_dim}, en.mean));
      neg.log_var = tape.constant(Tensor({encoder.spec().repr_dim}, en.log_var));
      opt = wstar.node(tape, item.target_task);
    }
    kl_terms.push_back(repr_kl_loss_node(tape, pos, neg, opt, options.reciprocal_guard));
    triplet_terms.push_back(triplet_loss_node(tape, pos.mean, neg.mean, opt.mean, options.margin));
  }

  Var kl_mean = tape.mean(tape.stack_scalars(kl_terms));
  Var triplet_mean = tape.mean(tape.stack_scalars(triplet_terms));
  Var loss = tape.add(kl_mean, triplet_mean);
  tape.backward(loss);

  if (phase == ReprPhase::encoder) {
    encoder_adam.apply(tape.grads_for(encoder.params()));
  } else {
    wstar_adam.apply(tape.grads_for(wstar.params()));
  }

  ReprStepStats stats;
  stats.kl_loss = tape.val(kl_mean).item();
  stats.triplet_loss = tape.val(triplet_mean).item();
  return stats;
}

std::vector<ReprBatchItem> sample_repr_batch(const OfflineDataset& data,
                                             const std::vector<uint32_t>& pair_indices,
                                             int32_t batch_size, Rng& rng) {
  if (pair_indices.empty()) throw std::invalid_argument("sample_repr_batch: no pairs");
  std::vector<ReprBatchItem> batch;
  batch.reserve(batch_size);
  int32_t guard = 0;
  while (static_cast<int32_t>(batch.size()) < batch_size) {
    if (++guard > batch_size * 1000) {
      throw std::runtime_error("sample_repr_batch: only tie-labeled pairs available");
    }
    const uint32_t pi =
        pair_indices[rng.uniform_index(static_cast<int64_t>(pair_indices.size()))];
    const PreferencePair& pair = data.pairs[pi];
    if (pair.label == 0.5) continue;  // ties carry no ordering
    ReprBatchItem item;
    const bool first_preferred = pair.label == 1.0;
    item.positive = &data.segments[first_preferred ? pair.first : pair.second];
    item.negative = &data.segments[first_preferred ? pair.second : pair.first];
    item.target_task = pair.target_task;
    batch.push_back(item);
  }
  return batch;
}

int32_t train_new_task_repr(TrajectoryEncoder& encoder, OptimalReprSet& wstar,
                            const OfflineDataset& data, int32_t new_task,
                            const NewTaskReprOptions& options) {
  if (new_task != wstar.count()) {
    throw std::invalid_argument("train_new_task_repr: new task id must equal current count " +
                                std::to_string(wstar.count()));
  }
  std::vector<uint32_t> pair_indices;
  for (uint32_t i = 0; i < data.pairs.size(); ++i) {
    if (data.pairs[i].target_task == new_task) pair_indices.push_back(i);
  }
  if (pair_indices.empty()) {
    throw std::invalid_argument("train_new_task_repr: no pairs target the new task");
  }

  const int32_t id = wstar.add_task(Rng(options.seed).child(0xA11CE).next_u64());
  Adam wstar_adam(wstar.params(), options.wstar_adam);
  Adam encoder_adam(encoder.params(), options.encoder_adam);
  Rng rng = Rng(options.seed).child(0xBA7C4);

  for (int32_t step = 0; step < options.steps; ++step) {
    // Same decay-to-10% settling as the main training loop.
    const double decay = 1.0 - 0.9 * static_cast<double>(step) / options.steps;
    wstar_adam.set_learning_rate(options.wstar_adam.learning_rate * decay);
    encoder_adam.set_learning_rate(options.encoder_adam.learning_rate * decay);
    auto batch = sample_repr_batch(data, pair_indices, options.batch_size, rng);
    if (!options.freeze_encoder) {
      train_repr_step(encoder, wstar, batch, ReprPhase::encoder, encoder_adam, wstar_adam,
                      options.loss);
    }
    train_repr_step(encoder, wstar, batch, ReprPhase::optimal, encoder_adam, wstar_adam,
                    options.loss);
  }
  return id;
}

}  // namespace camp

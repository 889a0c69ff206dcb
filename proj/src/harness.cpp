#include "camp/harness.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "camp/adam.hpp"

namespace camp {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

DataSplit split_dataset(const OfflineDataset& data, int32_t fold) {
  if (fold < 2) throw std::invalid_argument("split_dataset: fold must be >= 2");
  DataSplit split;
  for (uint32_t i = 0; i < data.segments.size(); ++i) {
    (i % fold == static_cast<uint32_t>(fold - 1) ? split.held_segments : split.train_segments)
        .push_back(i);
  }
  for (uint32_t i = 0; i < data.pairs.size(); ++i) {
    (i % fold == static_cast<uint32_t>(fold - 1) ? split.held_pairs : split.train_pairs)
        .push_back(i);
  }
  return split;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

namespace {

EnvParams env_from_config(const RunConfig& c) {
  EnvParams env;
  env.action_max = c.action_max;
  env.controller_gain = c.controller_gain;
  return env;
}

NoisePredictorSpec noise_spec_from_config(const RunConfig& c) {
  NoisePredictorSpec spec;
  spec.data_dim = (c.horizon + 1) * 2;
  spec.cond_dim = 2 * c.repr_dim;
  return spec;
}

EncoderSpec encoder_spec_from_config(const RunConfig& c) {
  EncoderSpec spec;
  spec.horizon = c.horizon;
  spec.d_model = c.d_model;
  spec.repr_dim = c.repr_dim;
  return spec;
}

}  // namespace

Pipeline Pipeline::create(const RunConfig& config, const OfflineDataset& data) {
  validate_config(config);
  data.validate();
  if (data.meta.num_tasks != config.tasks || data.meta.horizon != config.horizon) {
    throw std::invalid_argument(
        "pipeline: dataset (m=" + std::to_string(data.meta.num_tasks) + ", h=" +
        std::to_string(data.meta.horizon) + ") does not match config (m=" +
        std::to_string(config.tasks) + ", h=" + std::to_string(config.horizon) + ")");
  }
  Rng root(config.seed);
  std::vector<TrajectorySegment> all(data.segments.begin(), data.segments.end());
  return Pipeline{
      config,
      env_from_config(config),
      TrajectoryEncoder(encoder_spec_from_config(config), root.child(1).next_u64()),
      OptimalReprSet(config.tasks, config.repr_dim, root.child(2).next_u64()),
      NoisePredictor(noise_spec_from_config(config), root.child(3).next_u64()),
      CondPredictor(noise_spec_from_config(config).data_dim, config.repr_dim,
                    root.child(4).next_u64()),
      InverseDynamics(2, 2, config.action_max, root.child(5).next_u64()),
      DiffusionSchedule::make(config.denoise_steps, schedule_kind_from_string(config.schedule)),
      compute_state_norm(all)};
}

Checkpoint Pipeline::to_checkpoint(int64_t step) const {
  Checkpoint ckpt;
  ckpt.meta["step"] = step;
  ckpt.meta["config"] = serialize_config(config);
  ckpt.meta["schedule"] = {{"kind", to_string(schedule.kind())},
                           {"K", schedule.steps()},
                           {"alpha", schedule.alpha_vec()},
                           {"alpha_bar", schedule.alpha_bar_vec()},
                           {"posterior_var", schedule.posterior_var_vec()}};
  ckpt.meta["norm"] = {{"mean", norm.mean}, {"std", norm.std}};
  ckpt.add_store("", encoder.params());
  ckpt.add_store("", wstar.params());
  ckpt.add_store("", noise_model.params());
  ckpt.add_store("", cond_model.params());
  ckpt.add_store("", inverse_dynamics.params());
  return ckpt;
}

Pipeline Pipeline::from_checkpoint(const Checkpoint& ckpt) {
  const RunConfig config = parse_config_text(ckpt.meta.at("config").get<std::string>());
  const auto& sj = ckpt.meta.at("schedule");
  DiffusionSchedule schedule = DiffusionSchedule::from_vectors(
      sj.at("alpha").get<std::vector<double>>(), sj.at("alpha_bar").get<std::vector<double>>(),
      sj.at("posterior_var").get<std::vector<double>>(),
      schedule_kind_from_string(sj.at("kind").get<std::string>()));
  NormStats norm;
  norm.mean = ckpt.meta.at("norm").at("mean").get<std::vector<double>>();
  norm.std = ckpt.meta.at("norm").at("std").get<std::vector<double>>();
  norm.validate();

  Rng root(config.seed);
  Pipeline p{config,
             env_from_config(config),
             TrajectoryEncoder(encoder_spec_from_config(config), root.child(1).next_u64()),
             OptimalReprSet(config.tasks, config.repr_dim, root.child(2).next_u64()),
             NoisePredictor(noise_spec_from_config(config), root.child(3).next_u64()),
             CondPredictor(noise_spec_from_config(config).data_dim, config.repr_dim,
                           root.child(4).next_u64()),
             InverseDynamics(2, 2, config.action_max, root.child(5).next_u64()),
             std::move(schedule),
             std::move(norm)};
  ckpt.load_store("", p.encoder.params());
  ckpt.load_store("", p.wstar.params());
  ckpt.load_store("", p.noise_model.params());
  ckpt.load_store("", p.cond_model.params());
  ckpt.load_store("", p.inverse_dynamics.params());
  return p;
}

std::vector<double> Pipeline::condition_for_task(int32_t task, Rng* sampler) const {
  GaussianEmbedding e = wstar.get(task);
  if (config.condition_sampling && sampler != nullptr) {
    e.mean = e.sample(*sampler);  // one draw stands in for the mean block
  }
  return e.condition_vector();
}

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

DiffusionBatch prepare_diffusion_batch(const std::vector<const TrajectorySegment*>& segments,
                                       const TrajectoryEncoder& encoder,
                                       const DiffusionSchedule& schedule, const NormStats& norm,
                                       double dropout_prob, int32_t batch_size, Rng& rng) {
  if (segments.empty()) throw std::invalid_argument("prepare_diffusion_batch: no segments");
  if (batch_size < 1) throw std::invalid_argument("prepare_diffusion_batch: empty batch");
  DiffusionBatch batch;
  batch.reserve(batch_size);
  for (int32_t i = 0; i < batch_size; ++i) {
    const TrajectorySegment* seg =
        segments[rng.uniform_index(static_cast<int64_t>(segments.size()))];
    DiffusionSample s;
    s.x0 = norm.normalize(seg->states);
    s.k = 1 + static_cast<int32_t>(rng.uniform_index(schedule.steps()));
    s.eps.resize(s.x0.size());
    for (double& v : s.eps) v = rng.normal();
    s.drop = rng.uniform() < dropout_prob;
    s.w = encoder.encode(*seg);
    batch.push_back(std::move(s));
  }
  return batch;
}

namespace {

std::pair<Tensor, Tensor> sample_transition_batch(
    const std::vector<const TrajectorySegment*>& segments, int32_t batch_size, Rng& rng) {
  const int32_t sd = segments[0]->state_dim;
  const int32_t ad = segments[0]->action_dim;
  Tensor inputs({batch_size, 2 * sd});
  Tensor targets({batch_size, ad});
  for (int32_t i = 0; i < batch_size; ++i) {
    const TrajectorySegment* seg =
        segments[rng.uniform_index(static_cast<int64_t>(segments.size()))];
    const int32_t t = static_cast<int32_t>(rng.uniform_index(seg->horizon()));
    for (int32_t d = 0; d < sd; ++d) {
      inputs.data[i * 2 * sd + d] = seg->state(t)[d];
      inputs.data[i * 2 * sd + sd + d] = seg->state(t + 1)[d];
    }
    for (int32_t d = 0; d < ad; ++d) targets.data[i * ad + d] = seg->action(t)[d];
  }
  return {std::move(inputs), std::move(targets)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Training loop (Algorithm order: psi, w*, diffusion, inverse dynamics)
// ---------------------------------------------------------------------------

RunMetrics train_pipeline(Pipeline& p, const OfflineDataset& data, MetricsWriter* writer,
                          const TrainHooks& hooks) {
  data.validate();
  const RunConfig& c = p.config;
  DataSplit split = split_dataset(data);
  std::vector<const TrajectorySegment*> train_segs;
  train_segs.reserve(split.train_segments.size());
  for (uint32_t idx : split.train_segments) train_segs.push_back(&data.segments[idx]);

  Adam encoder_adam(p.encoder.params(), {c.lr_encoder});
  Adam wstar_adam(p.wstar.params(), {c.lr_wstar});
  Adam theta_adam(p.noise_model.params(), {c.lr_diffusion});
  Adam phi_adam(p.cond_model.params(), {c.lr_diffusion});
  Adam omega_adam(p.inverse_dynamics.params(), {c.lr_invdyn});

  Rng root(c.seed);
  Rng repr_rng = root.child(0x11);
  Rng diff_rng = root.child(0x22);
  Rng inv_rng = root.child(0x33);

  ReprLossOptions repr_options{c.margin, c.eps_recip};
  DiffusionLossOptions diff_options;
  diff_options.zeta = c.zeta;
  diff_options.weighted_score = c.weighted_score_loss;
  diff_options.batch_prior_mi = c.batch_prior_mi;

  RunMetrics metrics;
  auto log = [&](int64_t step, const std::string& name, double value) {
    metrics.log(step, name, value);
    if (writer) writer->log(step, name, value);
  };

  for (int64_t step = 0; step < c.train_steps; ++step) {
    // Linear decay to 10% over the run settles the representation losses,
    // whose hinge and reciprocal terms never stop emitting gradients.
    const double decay =
        1.0 - 0.9 * static_cast<double>(step) / static_cast<double>(c.train_steps);
    encoder_adam.set_learning_rate(c.lr_encoder * decay);
    wstar_adam.set_learning_rate(c.lr_wstar * decay);

    auto repr_batch = sample_repr_batch(data, split.train_pairs, c.batch_size, repr_rng);
    const ReprStepStats enc_stats = train_repr_step(p.encoder, p.wstar, repr_batch,
                                                    ReprPhase::encoder, encoder_adam, wstar_adam,
                                                    repr_options);
    train_repr_step(p.encoder, p.wstar, repr_batch, ReprPhase::optimal, encoder_adam, wstar_adam,
                    repr_options);

    auto diff_batch = prepare_diffusion_batch(train_segs, p.encoder, p.schedule, p.norm,
                                              c.dropout_prob, c.batch_size, diff_rng);
    Tape diff_tape;
    auto nodes = diffusion_loss_nodes(diff_tape, p.noise_model, &p.cond_model, diff_batch,
                                      p.schedule, diff_options);
    diff_tape.backward(nodes.combined);
    theta_adam.apply(diff_tape.grads_for(p.noise_model.params()));
    phi_adam.apply(diff_tape.grads_for(p.cond_model.params()));

    auto [inv_inputs, inv_targets] = sample_transition_batch(train_segs, c.batch_size, inv_rng);
    Tape inv_tape;
    Var inv_loss = p.inverse_dynamics.loss_node(inv_tape, inv_inputs, inv_targets);
    inv_tape.backward(inv_loss);
    omega_adam.apply(inv_tape.grads_for(p.inverse_dynamics.params()));

    if (step % c.log_interval == 0 || step + 1 == c.train_steps) {
      log(step, "loss/repr_kl", enc_stats.kl_loss);
      log(step, "loss/repr_triplet", enc_stats.triplet_loss);
      log(step, "loss/score_matching", diff_tape.val(nodes.score).item());
      log(step, "loss/mi_kl", diff_tape.val(nodes.mi).item());
      log(step, "loss/invdyn_mse", inv_tape.val(inv_loss).item());
    }
    if ((step + 1) % c.checkpoint_interval == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(step + 1, p);
    }
  }
  return metrics;
}

// ---------------------------------------------------------------------------
// Control evaluation
// ---------------------------------------------------------------------------

namespace {

struct EpisodeOutcome {
  double total_return = 0.0;
  double final_distance = 0.0;
};

// Runs `episodes` receding-horizon rollouts in lockstep. Each episode owns an
// rng stream derived from the base seed, so outcomes are independent of the
// batching.
std::vector<EpisodeOutcome> run_control_episodes(
    const Pipeline& p, const PointMassTask& task, int32_t episodes, uint64_t seed,
    const std::function<std::vector<double>(Rng&)>& cond_fn) {
  if (episodes < 1) throw std::invalid_argument("evaluate_control: episodes must be >= 1");
  const int32_t sd = 2;
  Rng root(seed);
  std::vector<Rng> ep_rngs;
  ep_rngs.reserve(episodes);
  std::vector<std::array<double, 2>> pos(episodes);
  std::vector<std::vector<double>> conds(episodes);
  for (int32_t i = 0; i < episodes; ++i) {
    ep_rngs.push_back(root.child(static_cast<uint64_t>(i)));
    conds[i] = cond_fn(ep_rngs.back());
    pos[i] = {ep_rngs.back().uniform(-1.0, 1.0), ep_rngs.back().uniform(-1.0, 1.0)};
  }
  const int64_t cond_dim = static_cast<int64_t>(conds[0].size());
  std::vector<EpisodeOutcome> out(episodes);

  for (int32_t t = 0; t < task.episode_steps; ++t) {
    Tensor starts({episodes, sd});
    Tensor cond_rows({episodes, cond_dim});
    for (int32_t i = 0; i < episodes; ++i) {
      starts.data[i * sd] = pos[i][0];
      starts.data[i * sd + 1] = pos[i][1];
      std::copy(conds[i].begin(), conds[i].end(), cond_rows.data.begin() + i * cond_dim);
    }
    Tensor plans = sample_trajectories(p.noise_model, p.schedule, p.norm, cond_rows, starts,
                                       p.config.guidance, ep_rngs);
    const int64_t dd = plans.shape[1];
    for (int32_t i = 0; i < episodes; ++i) {
      std::vector<double> current{pos[i][0], pos[i][1]};
      std::vector<double> next{plans.data[i * dd + sd], plans.data[i * dd + sd + 1]};
      const std::vector<double> a = p.inverse_dynamics.predict(current, next);
      out[i].total_return += env_step(task, p.env, pos[i], {a[0], a[1]});
    }
  }
  for (int32_t i = 0; i < episodes; ++i) {
    const double dx = pos[i][0] - task.goal[0];
    const double dy = pos[i][1] - task.goal[1];
    out[i].final_distance = std::sqrt(dx * dx + dy * dy);
  }
  return out;
}

ControlEval summarize(const std::vector<EpisodeOutcome>& outcomes, double success_threshold) {
  ControlEval eval;
  eval.episodes = static_cast<int32_t>(outcomes.size());
  for (const EpisodeOutcome& o : outcomes) {
    eval.mean_return += o.total_return;
    if (o.final_distance < success_threshold) eval.success_rate += 1.0;
  }
  eval.mean_return /= outcomes.size();
  eval.success_rate /= outcomes.size();
  return eval;
}

}  // namespace

ControlEval evaluate_control(const Pipeline& p, int32_t task_id, int32_t episodes, uint64_t seed,
                             int32_t condition_task) {
  if (condition_task < 0) condition_task = task_id;
  if (task_id < 0 || task_id >= p.config.tasks) {
    throw std::invalid_argument("evaluate_control: unknown task id " + std::to_string(task_id));
  }
  const PointMassTask task =
      PointMassTask::make(task_id, p.config.tasks, p.config.episode_steps, p.config.dt);
  const int32_t ct = condition_task;
  auto cond_fn = [&p, ct](Rng& rng) { return p.condition_for_task(ct, &rng); };
  return summarize(run_control_episodes(p, task, episodes, seed, cond_fn),
                   p.config.success_threshold);
}

ControlEval evaluate_reference(const RunConfig& config, int32_t task_id, int32_t episodes,
                               uint64_t seed, ReferencePolicy kind) {
  if (task_id < 0 || task_id >= config.tasks) {
    throw std::invalid_argument("evaluate_reference: unknown task id " + std::to_string(task_id));
  }
  const PointMassTask task =
      PointMassTask::make(task_id, config.tasks, config.episode_steps, config.dt);
  const EnvParams env = env_from_config(config);
  Rng root(seed);
  std::vector<EpisodeOutcome> outcomes(episodes);
  for (int32_t i = 0; i < episodes; ++i) {
    Rng rng = root.child(static_cast<uint64_t>(i));
    std::array<double, 2> pos{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    for (int32_t t = 0; t < task.episode_steps; ++t) {
      std::array<double, 2> a;
      if (kind == ReferencePolicy::expert) {
        a = expert_action(task, env, pos);
      } else {
        a = {rng.uniform(-env.action_max, env.action_max),
             rng.uniform(-env.action_max, env.action_max)};
      }
      outcomes[i].total_return += env_step(task, env, pos, a);
    }
    const double dx = pos[0] - task.goal[0];
    const double dy = pos[1] - task.goal[1];
    outcomes[i].final_distance = std::sqrt(dx * dx + dy * dy);
  }
  return summarize(outcomes, config.success_threshold);
}

// ---------------------------------------------------------------------------
// Alignment sweep
// ---------------------------------------------------------------------------

AlignmentResult alignment_sweep(const Pipeline& p, const OfflineDataset& data, int32_t task_id,
                                const std::vector<double>& coefficients, int32_t episodes,
                                uint64_t seed) {
  std::vector<double> distinct = coefficients;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) {
    throw std::invalid_argument("alignment_sweep: degenerate grid (need >= 2 distinct points)");
  }
  if (task_id < 0 || task_id >= p.config.tasks) {
    throw std::invalid_argument("alignment_sweep: unknown task id " + std::to_string(task_id));
  }

  // Low-return anchor: the weakest held-out segment of the task.
  DataSplit split = split_dataset(data);
  const TrajectorySegment* low = nullptr;
  double low_return = 0.0;
  for (uint32_t idx : split.held_segments) {
    const TrajectorySegment& seg = data.segments[idx];
    if (seg.task_id != task_id) continue;
    const double r = segment_return(seg);
    if (low == nullptr || r < low_return) {
      low = &seg;
      low_return = r;
    }
  }
  if (low == nullptr) {
    throw std::invalid_argument("alignment_sweep: no held-out segments for task " +
                                std::to_string(task_id));
  }
  const std::vector<double> cond_low = p.encoder.encode(*low).condition_vector();
  const std::vector<double> cond_high = p.wstar.get(task_id).condition_vector();
  const PointMassTask task =
      PointMassTask::make(task_id, p.config.tasks, p.config.episode_steps, p.config.dt);

  AlignmentResult result;
  for (size_t c = 0; c < coefficients.size(); ++c) {
    const double lambda = coefficients[c];
    std::vector<double> cond(cond_low.size());
    for (size_t i = 0; i < cond.size(); ++i) {
      cond[i] = (1.0 - lambda) * cond_low[i] + lambda * cond_high[i];
    }
    auto cond_fn = [&cond](Rng&) { return cond; };
    auto outcomes = run_control_episodes(p, task, episodes,
                                         Rng(seed).child(c).next_u64(), cond_fn);
    AlignmentPoint point;
    point.coefficient = lambda;
    point.mean_return = summarize(outcomes, p.config.success_threshold).mean_return;
    result.points.push_back(point);
  }
  std::vector<double> xs, ys;
  for (const AlignmentPoint& pt : result.points) {
    xs.push_back(pt.coefficient);
    ys.push_back(pt.mean_return);
  }
  result.spearman = spearman_correlation(xs, ys);
  return result;
}

void write_alignment_csv(const std::string& path, const AlignmentResult& result) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "coefficient,mean_return\n";
  for (const AlignmentPoint& pt : result.points) {
    out << format_metric_value(pt.coefficient) << ',' << format_metric_value(pt.mean_return)
        << '\n';
  }
  out << "# spearman," << format_metric_value(result.spearman) << '\n';
}

void write_alignment_svg(const std::string& path, const AlignmentResult& result) {
  std::vector<ScatterPoint> points;
  for (const AlignmentPoint& pt : result.points) {
    points.push_back({pt.coefficient, pt.mean_return, 0, 1.0, false});
  }
  write_scatter_svg(path, points,
                    "condition coefficient vs realized return (spearman " +
                        format_metric_value(result.spearman) + ")");
}

// ---------------------------------------------------------------------------
// Representation diagnostics
// ---------------------------------------------------------------------------

double nearest_centroid_probe(const TrajectoryEncoder& encoder, const OfflineDataset& data,
                              const std::vector<uint32_t>& train_segments,
                              const std::vector<uint32_t>& held_segments, int32_t num_tasks) {
  if (train_segments.empty() || held_segments.empty()) {
    throw std::invalid_argument("nearest_centroid_probe: empty split");
  }
  const int32_t dim = encoder.spec().repr_dim;
  std::vector<std::vector<double>> centroids(num_tasks, std::vector<double>(dim, 0.0));
  std::vector<int32_t> counts(num_tasks, 0);
  for (uint32_t idx : train_segments) {
    const TrajectorySegment& seg = data.segments[idx];
    const GaussianEmbedding e = encoder.encode(seg);
    for (int32_t d = 0; d < dim; ++d) centroids[seg.task_id][d] += e.mean[d];
    ++counts[seg.task_id];
  }
  for (int32_t t = 0; t < num_tasks; ++t) {
    if (counts[t] == 0) {
      throw std::invalid_argument("nearest_centroid_probe: task " + std::to_string(t) +
                                  " missing from training split");
    }
    for (double& v : centroids[t]) v /= counts[t];
  }
  int32_t correct = 0;
  for (uint32_t idx : held_segments) {
    const TrajectorySegment& seg = data.segments[idx];
    const GaussianEmbedding e = encoder.encode(seg);
    int32_t best = 0;
    double best_d = 0.0;
    for (int32_t t = 0; t < num_tasks; ++t) {
      double d2 = 0.0;
      for (int32_t d = 0; d < dim; ++d) {
        d2 += (e.mean[d] - centroids[t][d]) * (e.mean[d] - centroids[t][d]);
      }
      if (t == 0 || d2 < best_d) {
        best = t;
        best_d = d2;
      }
    }
    if (best == seg.task_id) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(held_segments.size());
}

namespace {
double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}
}  // namespace

double triplet_satisfaction(const TrajectoryEncoder& encoder, const OptimalReprSet& wstar,
                            const OfflineDataset& data, const std::vector<uint32_t>& pairs) {
  int32_t satisfied = 0, counted = 0;
  for (uint32_t idx : pairs) {
    const PreferencePair& pair = data.pairs[idx];
    if (pair.label == 0.5) continue;
    const bool first_preferred = pair.label == 1.0;
    const TrajectorySegment& pos = data.segments[first_preferred ? pair.first : pair.second];
    const TrajectorySegment& neg = data.segments[first_preferred ? pair.second : pair.first];
    const GaussianEmbedding opt = wstar.get(pair.target_task);
    const double dp = euclid(encoder.encode(pos).mean, opt.mean);
    const double dn = euclid(encoder.encode(neg).mean, opt.mean);
    ++counted;
    if (dp < dn) ++satisfied;
  }
  if (counted == 0) throw std::invalid_argument("triplet_satisfaction: no ordered pairs");
  return static_cast<double>(satisfied) / static_cast<double>(counted);
}

WstarAlignment wstar_return_alignment(const TrajectoryEncoder& encoder,
                                      const OptimalReprSet& wstar, const OfflineDataset& data,
                                      int32_t task, int32_t count) {
  const GaussianEmbedding opt = wstar.get(task);
  std::vector<std::pair<double, double>> by_distance;  // (distance, return)
  double task_total = 0.0;
  int32_t task_count = 0;
  for (const TrajectorySegment& seg : data.segments) {
    if (seg.task_id != task) continue;
    const double r = segment_return(seg);
    by_distance.emplace_back(euclid(encoder.encode(seg).mean, opt.mean), r);
    task_total += r;
    ++task_count;
  }
  if (task_count == 0) {
    throw std::invalid_argument("wstar_return_alignment: no segments for task " +
                                std::to_string(task));
  }
  std::sort(by_distance.begin(), by_distance.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const int32_t n = std::min<int32_t>(count, static_cast<int32_t>(by_distance.size()));
  WstarAlignment result;
  for (int32_t i = 0; i < n; ++i) result.nearest_mean_return += by_distance[i].second;
  result.nearest_mean_return /= n;
  result.task_mean_return = task_total / task_count;
  return result;
}

EmbeddingReportPaths embedding_report(const TrajectoryEncoder& encoder,
                                      const OptimalReprSet& wstar, const OfflineDataset& data,
                                      const std::string& out_dir, uint64_t seed) {
  if (data.segments.size() < 3) {
    throw std::invalid_argument("embedding_report: need at least 3 embeddings");
  }
  fs::create_directories(out_dir);

  std::vector<std::vector<double>> means;
  means.reserve(data.segments.size());
  double min_r = 0.0, max_r = 0.0;
  std::vector<double> returns;
  for (size_t i = 0; i < data.segments.size(); ++i) {
    means.push_back(encoder.encode(data.segments[i]).mean);
    const double r = segment_return(data.segments[i]);
    returns.push_back(r);
    if (i == 0 || r < min_r) min_r = r;
    if (i == 0 || r > max_r) max_r = r;
  }
  const double span = std::max(max_r - min_r, 1e-12);
  const Pca2 pca = pca_top2(means, seed);

  EmbeddingReportPaths paths;
  paths.csv_path = out_dir + "/embedding.csv";
  paths.svg_path = out_dir + "/embedding.svg";

  std::ofstream csv(paths.csv_path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + paths.csv_path);
  csv << "kind,index,task,return,x,y\n";
  std::vector<ScatterPoint> points;
  for (size_t i = 0; i < means.size(); ++i) {
    const auto xy = pca_project(pca, means[i]);
    const int32_t task = data.segments[i].task_id;
    const double shade = (returns[i] - min_r) / span;
    csv << "segment," << i << ',' << task << ',' << format_metric_value(returns[i]) << ','
        << format_metric_value(xy[0]) << ',' << format_metric_value(xy[1]) << '\n';
    points.push_back({xy[0], xy[1], task, shade, false});
  }
  for (int32_t t = 0; t < wstar.count(); ++t) {
    const auto xy = pca_project(pca, wstar.get(t).mean);
    csv << "wstar," << t << ',' << t << ",0," << format_metric_value(xy[0]) << ','
        << format_metric_value(xy[1]) << '\n';
    points.push_back({xy[0], xy[1], t, 1.0, true});
  }
  write_scatter_svg(paths.svg_path, points, "embedding means (PCA projection)");
  return paths;
}

// ---------------------------------------------------------------------------
// MI / information diagnostics
// ---------------------------------------------------------------------------

void fit_cond_predictor(Pipeline& p, const OfflineDataset& data, const DataSplit& split,
                        int32_t steps, uint64_t seed) {
  std::vector<const TrajectorySegment*> train_segs;
  for (uint32_t idx : split.train_segments) train_segs.push_back(&data.segments[idx]);
  Adam phi_adam(p.cond_model.params(), {p.config.lr_diffusion});
  Rng rng = Rng(seed).child(0xF17);
  DiffusionLossOptions options;
  options.zeta = 1.0;
  options.batch_prior_mi = p.config.batch_prior_mi;
  for (int32_t step = 0; step < steps; ++step) {
    auto batch = prepare_diffusion_batch(train_segs, p.encoder, p.schedule, p.norm,
                                         /*dropout_prob=*/0.0, p.config.batch_size, rng);
    Tape tape;
    auto nodes = diffusion_loss_nodes(tape, p.noise_model, &p.cond_model, batch, p.schedule,
                                      options);
    tape.backward(nodes.mi);
    phi_adam.apply(tape.grads_for(p.cond_model.params()));
  }
}

double heldout_condition_kl(const Pipeline& p, const OfflineDataset& data,
                            const DataSplit& split, int32_t draws, uint64_t seed) {
  if (split.held_segments.empty()) {
    throw std::invalid_argument("heldout_condition_kl: empty held-out split");
  }
  Rng rng = Rng(seed).child(0xE7A1);
  const int32_t data_dim = p.noise_model.spec().data_dim;
  double total = 0.0;
  int64_t n = 0;
  for (uint32_t idx : split.held_segments) {
    const TrajectorySegment& seg = data.segments[idx];
    const GaussianEmbedding w = p.encoder.encode(seg);
    const std::vector<double> x0 = p.norm.normalize(seg.states);
    const std::vector<double> cv = w.condition_vector();
    Tensor cond({1, static_cast<int64_t>(cv.size())}, cv);
    for (int32_t d = 0; d < draws; ++d) {
      const int32_t k = 1 + static_cast<int32_t>(rng.uniform_index(p.schedule.steps()));
      std::vector<double> eps(x0.size());
      for (double& v : eps) v = rng.normal();
      const auto xk = q_sample(x0, k, eps, p.schedule);
      Tensor x({1, data_dim}, xk);
      Tensor eps_pred = p.noise_model.infer(x, k, &cond, p.schedule);
      auto [mean, log_var] = p.cond_model.infer(eps_pred);
      GaussianEmbedding predicted;
      predicted.mean = mean.data;
      predicted.log_var = log_var.data;
      total += kl_diag_gauss(w, predicted);
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

double noise_level_prediction_kl(const TrajectoryEncoder& encoder, const OfflineDataset& data,
                                 const DataSplit& split, const DiffusionSchedule& schedule,
                                 const NormStats& norm, int32_t k, int32_t steps,
                                 int32_t batch_size, double lr, uint64_t seed) {
  schedule.index(k);
  const int32_t data_dim = (encoder.spec().horizon + 1) * encoder.spec().state_dim;
  CondPredictor probe(data_dim, encoder.spec().repr_dim, Rng(seed).child(1).next_u64());
  Adam adam(probe.params(), {lr});
  Rng rng = Rng(seed).child(2);

  std::vector<const TrajectorySegment*> train_segs;
  for (uint32_t idx : split.train_segments) train_segs.push_back(&data.segments[idx]);
  if (train_segs.empty() || split.held_segments.empty()) {
    throw std::invalid_argument("noise_level_prediction_kl: empty split");
  }

  for (int32_t step = 0; step < steps; ++step) {
    Tensor xk_rows({batch_size, data_dim});
    Tensor w_mean({batch_size, encoder.spec().repr_dim});
    Tensor w_lv({batch_size, encoder.spec().repr_dim});
    for (int32_t i = 0; i < batch_size; ++i) {
      const TrajectorySegment* seg =
          train_segs[rng.uniform_index(static_cast<int64_t>(train_segs.size()))];
      const auto x0 = norm.normalize(seg->states);
      std::vector<double> eps(x0.size());
      for (double& v : eps) v = rng.normal();
      const auto xk = q_sample(x0, k, eps, schedule);
      std::copy(xk.begin(), xk.end(), xk_rows.data.begin() + static_cast<int64_t>(i) * data_dim);
      const GaussianEmbedding w = encoder.encode(*seg);
      std::copy(w.mean.begin(), w.mean.end(),
                w_mean.data.begin() + static_cast<int64_t>(i) * encoder.spec().repr_dim);
      std::copy(w.log_var.begin(), w.log_var.end(),
                w_lv.data.begin() + static_cast<int64_t>(i) * encoder.spec().repr_dim);
    }
    Tape tape;
    GaussNodes predicted = probe.forward_node(tape, tape.constant(xk_rows));
    GaussNodes target{tape.constant(w_mean), tape.constant(w_lv)};
    Var loss = tape.mean(kl_diag_gauss_node(tape, target, predicted));
    tape.backward(loss);
    adam.apply(tape.grads_for(probe.params()));
  }

  Rng eval_rng = Rng(seed).child(3);
  double total = 0.0;
  int64_t n = 0;
  for (uint32_t idx : split.held_segments) {
    const TrajectorySegment& seg = data.segments[idx];
    const GaussianEmbedding w = encoder.encode(seg);
    const auto x0 = norm.normalize(seg.states);
    for (int32_t d = 0; d < 4; ++d) {
      std::vector<double> eps(x0.size());
      for (double& v : eps) v = eval_rng.normal();
      const auto xk = q_sample(x0, k, eps, schedule);
      auto [mean, log_var] = probe.infer(Tensor({1, data_dim}, xk));
      GaussianEmbedding predicted;
      predicted.mean = mean.data;
      predicted.log_var = log_var.data;
      total += kl_diag_gauss(w, predicted);
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Ablations
// ---------------------------------------------------------------------------

std::vector<AblationCell> ablation_runner(const RunConfig& base, AblationSweep sweep,
                                          const std::vector<double>& values,
                                          const OfflineDataset& data,
                                          const std::string& dataset_digest) {
  if (values.empty()) throw std::invalid_argument("ablation_runner: empty sweep");
  std::vector<AblationCell> cells;
  for (double value : values) {
    RunConfig config = base;
    if (sweep == AblationSweep::repr_dim) {
      config.repr_dim = static_cast<int32_t>(value);
    } else {
      config.zeta = value;
    }
    validate_config(config);
    Pipeline pipeline = Pipeline::create(config, data);
    train_pipeline(pipeline, data);
    const DataSplit split = split_dataset(data);

    AblationCell cell;
    cell.param = sweep == AblationSweep::repr_dim ? "repr_dim" : "zeta";
    cell.value = value;
    cell.cell = cell.param + "=" + format_metric_value(value);
    cell.dataset_digest = dataset_digest;
    cell.probe_accuracy = nearest_centroid_probe(pipeline.encoder, data, split.train_segments,
                                                 split.held_segments, config.tasks);
    cell.triplet_satisfaction =
        triplet_satisfaction(pipeline.encoder, pipeline.wstar, data, split.held_pairs);
    cell.heldout_mi_kl =
        heldout_condition_kl(pipeline, data, split, 2, Rng(config.seed).child(0xAB1A).next_u64());
    if (sweep == AblationSweep::zeta) {
      cell.alignment_spearman = alignment_sweep(pipeline, data, 0, {0.0, 0.25, 0.5, 0.75, 1.0},
                                                config.eval_episodes,
                                                Rng(config.seed).child(0xA716).next_u64())
                                    .spearman;
    } else {
      cell.alignment_spearman = std::nan("");
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

void write_ablation_csv(const std::string& path, const std::vector<AblationCell>& cells) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "cell,param,value,dataset_digest,probe_accuracy,triplet_satisfaction,heldout_mi_kl,"
         "alignment_spearman\n";
  for (const AblationCell& c : cells) {
    out << c.cell << ',' << c.param << ',' << format_metric_value(c.value) << ','
        << c.dataset_digest << ',' << format_metric_value(c.probe_accuracy) << ','
        << format_metric_value(c.triplet_satisfaction) << ','
        << format_metric_value(c.heldout_mi_kl) << ','
        << format_metric_value(c.alignment_spearman) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Run directories
// ---------------------------------------------------------------------------

RunLock::RunLock(const std::string& run_dir) {
  fs::create_directories(run_dir);
  lock_path_ = run_dir + "/.camp.lock";
  const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw std::runtime_error("run directory " + run_dir +
                             " is locked by another command (remove .camp.lock if stale)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  ssize_t written = ::write(fd, pid.data(), pid.size());
  (void)written;
  ::close(fd);
}

RunLock::~RunLock() { ::unlink(lock_path_.c_str()); }

TrainRunResult run_training(const RunConfig& config, const std::string& dataset_path,
                            const std::string& run_dir) {
  validate_config(config);
  if (!fs::exists(dataset_path)) {
    throw std::runtime_error("dataset file not found: " + dataset_path);
  }
  OfflineDataset data = load_dataset(dataset_path);
  Pipeline pipeline = Pipeline::create(config, data);  // fails before any training

  RunLock lock(run_dir);
  fs::create_directories(run_dir + "/checkpoints");
  fs::create_directories(run_dir + "/plots");

  {
    std::ofstream snapshot(run_dir + "/config.snapshot.cfg", std::ios::trunc);
    snapshot << serialize_config(config);
  }
  TrainRunResult result;
  result.run_dir = run_dir;
  result.dataset_digest = file_digest(dataset_path);
  {
    std::ofstream digest(run_dir + "/dataset.digest", std::ios::trunc);
    digest << result.dataset_digest << "\n";
  }

  MetricsWriter writer(run_dir + "/metrics.csv");
  TrainHooks hooks;
  hooks.on_checkpoint = [&run_dir](int64_t step, const Pipeline& p) {
    char name[64];
    std::snprintf(name, sizeof name, "step_%06lld.campckpt", static_cast<long long>(step));
    save_checkpoint(p.to_checkpoint(step), run_dir + "/checkpoints/" + name);
  };
  train_pipeline(pipeline, data, &writer, hooks);

  result.final_checkpoint = run_dir + "/checkpoints/final.campckpt";
  save_checkpoint(pipeline.to_checkpoint(config.train_steps), result.final_checkpoint);
  result.metrics_csv = run_dir + "/metrics.csv";
  return result;
}

}  // namespace camp

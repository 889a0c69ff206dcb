// Acceptance suite: runs every release criterion end to end and prints one
// PASS/FAIL line per criterion. Exits nonzero if any criterion fails.
//
// Heavier criteria share one trained pipeline (criteria 5, 7, 8) and one
// trained encoder (criteria 6, 9). Use --only N[,M...] to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "camp/adam.hpp"
#include "camp/cli.hpp"
#include "camp/harness.hpp"

using namespace camp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

struct Criterion {
  int id;
  std::string name;
  std::function<std::string()> run;  // returns "" on pass, reason on fail
};

// ---------------------------------------------------------------------------
// Shared artifacts
// ---------------------------------------------------------------------------

struct SharedState {
  std::string work_dir;
  std::optional<OfflineDataset> dataset;
  std::optional<Pipeline> pipeline;  // trained on the default-scale config
  double pipeline_train_seconds = 0.0;

  RunConfig base_config() {
    RunConfig config;        // defaults: m=3, h=16, K=200, |w|=16, zeta=0.1 ...
    config.train_steps = 2600;
    config.seed = 7;
    return config;
  }

  const OfflineDataset& get_dataset() {
    if (!dataset) {
      const RunConfig config = base_config();
      BuildDatasetOptions options;
      options.num_tasks = config.tasks;
      options.episodes_per_task = config.episodes_per_task;
      options.episode_steps = config.episode_steps;
      options.segment_horizon = config.horizon;
      options.pairs_per_task = config.pairs_per_task;
      options.quality_levels = config.quality_levels;
      options.seed = config.seed;
      dataset = build_dataset(options);
    }
    return *dataset;
  }

  Pipeline& get_pipeline() {
    if (!pipeline) {
      const RunConfig config = base_config();
      const auto start = Clock::now();
      pipeline = Pipeline::create(config, get_dataset());
      train_pipeline(*pipeline, get_dataset());
      pipeline_train_seconds = seconds_since(start);
      std::cout << "  [shared] pipeline trained in " << pipeline_train_seconds << " s\n";
    }
    return *pipeline;
  }
};

SharedState shared;

// ---------------------------------------------------------------------------
// 1. Gradient correctness
// ---------------------------------------------------------------------------

double fd_max_rel_error(ParamStore& store, const std::function<Var(Tape&)>& build,
                        double step = 1e-5) {
  Tape tape;
  Var loss = build(tape);
  tape.backward(loss);
  const auto grads = tape.grads_for(store);
  double max_rel = 0.0;
  for (const auto& [pid, grad] : grads) {
    Tensor& p = store.value(pid);
    for (int64_t i = 0; i < p.size(); ++i) {
      const double original = p.data[i];
      p.data[i] = original + step;
      Tape tp;
      const double f_plus = tp.val(build(tp)).item();
      p.data[i] = original - step;
      Tape tm;
      const double f_minus = tm.val(build(tm)).item();
      p.data[i] = original;
      const double fd = (f_plus - f_minus) / (2.0 * step);
      const double rel = std::abs(fd - grad.data[i]) /
                         std::max({1.0, std::abs(fd), std::abs(grad.data[i])});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

std::string criterion_gradients() {
  const auto start = Clock::now();
  std::ostringstream fail;
  Rng rng(3);

  {  // ndgrad: random two-layer perceptron
    ParamStore store;
    auto rnd = [&rng](std::vector<int64_t> shape, double scale) {
      Tensor t(std::move(shape));
      for (double& v : t.data) v = scale * rng.uniform(-1.0, 1.0);
      return t;
    };
    ParamId w1 = store.add("w1", rnd({5, 7}, 0.8));
    ParamId b1 = store.add("b1", rnd({7}, 0.4));
    ParamId w2 = store.add("w2", rnd({7, 2}, 0.8));
    ParamId b2 = store.add("b2", rnd({2}, 0.4));
    const Tensor x = rnd({6, 5}, 1.5);
    const Tensor y = rnd({6, 2}, 1.0);
    auto build = [&](Tape& t) {
      Var h = t.tanh(t.linear(t.constant(x), t.param(store, w1), t.param(store, b1)));
      return t.mse(t.linear(h, t.param(store, w2), t.param(store, b2)), t.constant(y));
    };
    const double err = fd_max_rel_error(store, build);
    if (err >= 1e-5) fail << "perceptron rel err " << err << "; ";
  }

  {  // representation losses through the encoder
    EncoderSpec spec;
    spec.horizon = 4;
    spec.d_model = 8;
    spec.repr_dim = 3;
    TrajectoryEncoder encoder(spec, 7);
    OptimalReprSet wstar(2, 3, 8);
    Rng roll(5);
    const PointMassTask task = PointMassTask::make(0, 2, 8);
    const TrajectorySegment pos = rollout(task, EnvParams{}, 0.9, 4, roll)[0];
    const TrajectorySegment neg = rollout(task, EnvParams{}, 0.1, 4, roll)[0];
    auto build_psi = [&](Tape& t) {
      GaussNodes p = encoder.encode_node(t, pos);
      GaussNodes n = encoder.encode_node(t, neg);
      GaussNodes o = wstar.frozen_node(t, 0);
      return t.add(repr_kl_loss_node(t, p, n, o),
                   triplet_loss_node(t, p.mean, n.mean, o.mean, 1.0));
    };
    const double err_psi = fd_max_rel_error(encoder.params(), build_psi);
    if (err_psi >= 1e-5) fail << "repr(psi) rel err " << err_psi << "; ";

    auto build_wstar = [&](Tape& t) {
      const GaussianEmbedding ep = encoder.encode(pos);
      const GaussianEmbedding en = encoder.encode(neg);
      GaussNodes p{t.constant(Tensor({3}, ep.mean)), t.constant(Tensor({3}, ep.log_var))};
      GaussNodes n{t.constant(Tensor({3}, en.mean)), t.constant(Tensor({3}, en.log_var))};
      GaussNodes o = wstar.node(t, 0);
      return t.add(repr_kl_loss_node(t, p, n, o),
                   triplet_loss_node(t, p.mean, n.mean, o.mean, 1.0));
    };
    const double err_w = fd_max_rel_error(wstar.params(), build_wstar);
    if (err_w >= 1e-5) fail << "repr(w*) rel err " << err_w << "; ";
  }

  {  // inverse dynamics
    InverseDynamics model(2, 2, 0.25, 11, {6, 6});
    Tensor inputs({4, 4});
    for (double& v : inputs.data) v = rng.uniform(-1.0, 1.0);
    Tensor targets({4, 2});
    for (double& v : targets.data) v = rng.uniform(-0.25, 0.25);
    auto build = [&](Tape& t) { return model.loss_node(t, inputs, targets); };
    const double err = fd_max_rel_error(model.params(), build);
    if (err >= 1e-5) fail << "invdyn rel err " << err << "; ";
  }

  {  // combined diffusion loss (theta and phi)
    NoisePredictorSpec spec;
    spec.data_dim = 5;
    spec.cond_dim = 4;
    spec.time_embed_dim = 8;
    spec.cond_embed_dim = 8;
    spec.hidden = {10};
    NoisePredictor model(spec, 31);
    CondPredictor cond(spec.data_dim, 2, 32, {8});
    const DiffusionSchedule schedule = DiffusionSchedule::make(6, ScheduleKind::cosine);
    DiffusionBatch batch;
    for (int i = 0; i < 4; ++i) {
      DiffusionSample s;
      s.x0.resize(spec.data_dim);
      for (double& v : s.x0) v = rng.uniform(-1.5, 1.5);
      s.k = 1 + static_cast<int32_t>(rng.uniform_index(schedule.steps()));
      s.eps.resize(spec.data_dim);
      for (double& v : s.eps) v = rng.normal();
      s.drop = i % 3 == 0;
      s.w.mean = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      s.w.log_var = {rng.uniform(-1, 0), rng.uniform(-1, 0)};
      batch.push_back(std::move(s));
    }
    DiffusionLossOptions options;
    options.zeta = 0.1;
    auto build = [&](Tape& t) {
      return diffusion_loss_nodes(t, model, &cond, batch, schedule, options).combined;
    };
    const double err_theta = fd_max_rel_error(model.params(), build);
    if (err_theta >= 1e-4) fail << "diffusion(theta) rel err " << err_theta << "; ";
    const double err_phi = fd_max_rel_error(cond.params(), build);
    if (err_phi >= 1e-4) fail << "diffusion(phi) rel err " << err_phi << "; ";
  }

  const double elapsed = seconds_since(start);
  if (elapsed >= 120.0) fail << "gradient suite took " << elapsed << " s (limit 120); ";
  return fail.str();
}

// ---------------------------------------------------------------------------
// 2. KL oracle
// ---------------------------------------------------------------------------

std::string criterion_kl_oracle() {
  std::ostringstream fail;
  {  // 1-D unit-variance mean-shift case
    GaussianEmbedding p{{0.0}, {0.0}};
    GaussianEmbedding q{{1.0}, {0.0}};
    if (std::abs(kl_diag_gauss(p, q) - 0.5) > 1e-9) {
      fail << "1-d case " << kl_diag_gauss(p, q) << " != 0.5; ";
    }
  }
  auto log_pdf = [](const GaussianEmbedding& g, const std::vector<double>& x) {
    double lp = 0.0;
    for (size_t d = 0; d < x.size(); ++d) {
      const double diff = x[d] - g.mean[d];
      lp += -0.5 * (g.log_var[d] + diff * diff * std::exp(-g.log_var[d]));
    }
    return lp;
  };
  // q perturbs p with sigma-scaled offsets so that a 1e6-sample estimate has
  // standard error well under the 0.01 tolerance.
  Rng rng(5);
  for (int pair = 0; pair < 20; ++pair) {
    GaussianEmbedding p, q;
    for (int d = 0; d < 16; ++d) {
      p.mean.push_back(rng.uniform(-2.0, 2.0));
      p.log_var.push_back(rng.uniform(-2.0, 1.0));
      const double lvq = std::clamp(p.log_var[d] + rng.uniform(-0.4, 0.4), -2.0, 1.0);
      q.log_var.push_back(lvq);
      q.mean.push_back(p.mean[d] + 0.4 * std::exp(0.5 * lvq) * rng.uniform(-1.0, 1.0));
    }
    Rng sampler(100 + pair);
    double total = 0.0;
    const int64_t n = 1'000'000;
    for (int64_t s = 0; s < n; ++s) {
      const auto x = p.sample(sampler);
      total += log_pdf(p, x) - log_pdf(q, x);
    }
    const double mc = total / static_cast<double>(n);
    const double exact = kl_diag_gauss(p, q);
    if (std::abs(mc - exact) > 0.01) {
      fail << "pair " << pair << ": exact " << exact << " vs MC " << mc << "; ";
    }
  }
  return fail.str();
}

// ---------------------------------------------------------------------------
// 3. Preference-label oracle
// ---------------------------------------------------------------------------

std::string criterion_preference_oracle() {
  const OfflineDataset& data = shared.get_dataset();
  std::ostringstream fail;
  int64_t checked = 0;
  for (const PreferencePair& pair : data.pairs) {
    const TrajectorySegment& a = data.segments[pair.first];
    const TrajectorySegment& b = data.segments[pair.second];
    // Independent re-derivation from the two rules.
    double expected;
    if (a.task_id == b.task_id) {
      const double ra = segment_return(a), rb = segment_return(b);
      expected = std::abs(ra - rb) <= 1e-9 ? 0.5 : (ra > rb ? 1.0 : 0.0);
    } else {
      expected = a.task_id == pair.target_task ? 1.0 : 0.0;
    }
    if (pair.label != expected) {
      fail << "pair " << checked << " label " << pair.label << " != " << expected << "; ";
      break;
    }
    // Inter-task antisymmetry under target swap.
    if (pair.kind == PairKind::inter_task) {
      const int32_t other = a.task_id == pair.target_task ? b.task_id : a.task_id;
      const PreferencePair swapped =
          scripted_preference(a, b, pair.first, pair.second, other);
      if (swapped.label != 1.0 - pair.label) {
        fail << "antisymmetry violated at pair " << checked << "; ";
        break;
      }
    }
    ++checked;
  }
  if (checked != static_cast<int64_t>(data.pairs.size())) {
    fail << "(stopped after " << checked << "/" << data.pairs.size() << ")";
  }
  return fail.str();
}

// ---------------------------------------------------------------------------
// 4. Unconditional diffusion on a 4-mode Gaussian mixture
// ---------------------------------------------------------------------------

std::string criterion_gmm() {
  const auto start = Clock::now();
  const std::array<std::array<double, 2>, 4> modes{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
  const double mode_std = 0.1;

  NoisePredictorSpec spec;
  spec.data_dim = 2;
  spec.cond_dim = 2;  // unused: every sample is dropped to the null token
  NoisePredictor model(spec, 17);
  const DiffusionSchedule schedule = DiffusionSchedule::make(200, ScheduleKind::cosine);
  Adam adam(model.params(), {1e-3});
  Rng rng(19);

  GaussianEmbedding dummy;
  dummy.mean = {0.0};
  dummy.log_var = {0.0};

  const int32_t steps = 10000, batch_size = 64;
  for (int32_t step = 0; step < steps; ++step) {
    DiffusionBatch batch;
    batch.reserve(batch_size);
    for (int32_t i = 0; i < batch_size; ++i) {
      DiffusionSample s;
      const auto& mode = modes[rng.uniform_index(4)];
      s.x0 = {mode[0] + mode_std * rng.normal(), mode[1] + mode_std * rng.normal()};
      s.k = 1 + static_cast<int32_t>(rng.uniform_index(schedule.steps()));
      s.eps = {rng.normal(), rng.normal()};
      s.drop = true;
      s.w = dummy;
      batch.push_back(std::move(s));
    }
    Tape tape;
    auto nodes = diffusion_loss_nodes(tape, model, nullptr, batch, schedule, {});
    tape.backward(nodes.score);
    adam.apply(tape.grads_for(model.params()));
  }

  const int64_t count = 2000;
  std::vector<Rng> rngs;
  Rng sample_root(23);
  for (int64_t i = 0; i < count; ++i) rngs.push_back(sample_root.child(i));
  const Tensor samples = ddpm_sample(model, schedule, count, nullptr, 0.0, rngs);

  // Nearest-mode assignment oracle.
  std::array<int64_t, 4> mode_count{0, 0, 0, 0};
  std::array<std::array<double, 2>, 4> mode_sum{{{0, 0}, {0, 0}, {0, 0}, {0, 0}}};
  for (int64_t i = 0; i < count; ++i) {
    const double x = samples.data[i * 2], y = samples.data[i * 2 + 1];
    int best = 0;
    double best_d = 0.0;
    for (int m = 0; m < 4; ++m) {
      const double d = std::hypot(x - modes[m][0], y - modes[m][1]);
      if (m == 0 || d < best_d) {
        best = m;
        best_d = d;
      }
    }
    ++mode_count[best];
    mode_sum[best][0] += x;
    mode_sum[best][1] += y;
  }

  std::ostringstream fail;
  for (int m = 0; m < 4; ++m) {
    const double share = static_cast<double>(mode_count[m]) / count;
    if (share < 0.15 || share > 0.35) fail << "mode " << m << " share " << share << "; ";
    const double mx = mode_sum[m][0] / mode_count[m];
    const double my = mode_sum[m][1] / mode_count[m];
    const double err = std::hypot(mx - modes[m][0], my - modes[m][1]);
    if (err > 0.15) fail << "mode " << m << " mean off by " << err << "; ";
  }
  const double elapsed = seconds_since(start);
  if (elapsed >= 600.0) fail << "took " << elapsed << " s (limit 600); ";
  return fail.str();
}

// ---------------------------------------------------------------------------
// 5. Representation quality
// ---------------------------------------------------------------------------

std::string criterion_representation() {
  Pipeline& p = shared.get_pipeline();
  const OfflineDataset& data = shared.get_dataset();
  const DataSplit split = split_dataset(data);
  std::ostringstream fail;

  const double acc = nearest_centroid_probe(p.encoder, data, split.train_segments,
                                            split.held_segments, p.config.tasks);
  std::cout << "  [5] probe accuracy " << acc << "\n";
  if (acc < 0.9) fail << "probe accuracy " << acc << " < 0.9; ";

  const double sat = triplet_satisfaction(p.encoder, p.wstar, data, split.held_pairs);
  std::cout << "  [5] triplet satisfaction " << sat << "\n";
  if (sat < 0.9) fail << "triplet satisfaction " << sat << " < 0.9; ";

  for (int32_t task = 0; task < p.config.tasks; ++task) {
    const WstarAlignment align = wstar_return_alignment(p.encoder, p.wstar, data, task, 10);
    std::cout << "  [5] task " << task << " nearest-10 return " << align.nearest_mean_return
              << " vs task mean " << align.task_mean_return << "\n";
    if (align.nearest_mean_return <= align.task_mean_return) {
      fail << "task " << task << " w* neighbors return " << align.nearest_mean_return
           << " <= mean " << align.task_mean_return << "; ";
    }
  }

  // Per task: mean d(mu+, mu*) over held-out positives below mean d(mu-, mu*)
  // over held-out negatives.
  std::vector<double> pos_sum(p.config.tasks, 0.0), neg_sum(p.config.tasks, 0.0);
  std::vector<int32_t> counts(p.config.tasks, 0);
  auto euclid = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  };
  for (uint32_t idx : split.held_pairs) {
    const PreferencePair& pair = data.pairs[idx];
    if (pair.label == 0.5) continue;
    const bool first_preferred = pair.label == 1.0;
    const auto& pos = data.segments[first_preferred ? pair.first : pair.second];
    const auto& neg = data.segments[first_preferred ? pair.second : pair.first];
    const GaussianEmbedding opt = p.wstar.get(pair.target_task);
    pos_sum[pair.target_task] += euclid(p.encoder.encode(pos).mean, opt.mean);
    neg_sum[pair.target_task] += euclid(p.encoder.encode(neg).mean, opt.mean);
    ++counts[pair.target_task];
  }
  for (int32_t task = 0; task < p.config.tasks; ++task) {
    if (counts[task] == 0) {
      fail << "no held-out pairs for task " << task << "; ";
      continue;
    }
    if (!(pos_sum[task] < neg_sum[task])) {
      fail << "task " << task << " mean positive distance not below negative; ";
    }
  }
  return fail.str();
}

// ---------------------------------------------------------------------------
// 6. MI-regularization trend
// ---------------------------------------------------------------------------

std::string criterion_mi_trend() {
  Pipeline& base = shared.get_pipeline();  // provides the trained encoder
  const OfflineDataset& data = shared.get_dataset();
  const DataSplit split = split_dataset(data);
  std::vector<const TrajectorySegment*> train_segs;
  for (uint32_t idx : split.train_segments) train_segs.push_back(&data.segments[idx]);

  const int32_t diffusion_steps = 1200;
  const int32_t batch_size = 32;

  auto train_arm = [&](double zeta, uint64_t seed) {
    RunConfig config = base.config;
    config.zeta = zeta;
    config.seed = seed;
    Pipeline arm = Pipeline::create(config, data);
    // Reuse the shared trained encoder and w*; only theta/phi train here.
    Checkpoint enc_ckpt;
    enc_ckpt.add_store("", base.encoder.params());
    enc_ckpt.add_store("", base.wstar.params());
    enc_ckpt.load_store("", arm.encoder.params());
    enc_ckpt.load_store("", arm.wstar.params());

    Adam theta_adam(arm.noise_model.params(), {config.lr_diffusion});
    Adam phi_adam(arm.cond_model.params(), {config.lr_diffusion});
    Rng rng = Rng(seed).child(0x6D1);
    DiffusionLossOptions options;
    options.zeta = zeta;
    for (int32_t step = 0; step < diffusion_steps; ++step) {
      auto batch = prepare_diffusion_batch(train_segs, arm.encoder, arm.schedule, arm.norm,
                                           config.dropout_prob, batch_size, rng);
      Tape tape;
      auto nodes = diffusion_loss_nodes(tape, arm.noise_model, &arm.cond_model, batch,
                                        arm.schedule, options);
      if (zeta > 0.0) {
        tape.backward(nodes.combined);
        theta_adam.apply(tape.grads_for(arm.noise_model.params()));
        phi_adam.apply(tape.grads_for(arm.cond_model.params()));
      } else {
        tape.backward(nodes.score);
        theta_adam.apply(tape.grads_for(arm.noise_model.params()));
      }
    }
    if (zeta == 0.0) {
      fit_cond_predictor(arm, data, split, diffusion_steps, seed + 1);
    }
    return heldout_condition_kl(arm, data, split, 2, 0xEE);
  };

  std::ostringstream fail;
  double mean_with = 0.0, mean_without = 0.0;
  const std::vector<uint64_t> seeds{101, 202, 303};
  for (uint64_t seed : seeds) {
    const double kl_with = train_arm(0.1, seed);
    const double kl_without = train_arm(0.0, seed);
    std::cout << "  [6] seed " << seed << ": zeta=0.1 KL " << kl_with << ", zeta=0 KL "
              << kl_without << "\n";
    mean_with += kl_with;
    mean_without += kl_without;
  }
  mean_with /= seeds.size();
  mean_without /= seeds.size();
  if (!(mean_with < mean_without)) {
    fail << "mean held-out KL with MI " << mean_with << " not below control " << mean_without;
  }
  return fail.str();
}

// ---------------------------------------------------------------------------
// 7. Conditional control
// ---------------------------------------------------------------------------

std::string criterion_control() {
  const auto start = Clock::now();
  Pipeline& p = shared.get_pipeline();
  std::ostringstream fail;

  // Sanity envelope first.
  const ControlEval expert = evaluate_reference(p.config, 0, 50, 11, ReferencePolicy::expert);
  const ControlEval random = evaluate_reference(p.config, 0, 50, 12, ReferencePolicy::random);
  std::cout << "  [7] expert success " << expert.success_rate << ", random success "
            << random.success_rate << "\n";
  if (expert.success_rate < 0.95) fail << "expert ceiling " << expert.success_rate << "; ";
  if (random.success_rate > 0.1) fail << "random floor " << random.success_rate << "; ";

  for (int32_t task = 0; task < p.config.tasks; ++task) {
    const ControlEval own = evaluate_control(p, task, 50, 1000 + task);
    const int32_t other = (task + 1) % p.config.tasks;
    const ControlEval cross = evaluate_control(p, task, 50, 2000 + task, other);
    std::cout << "  [7] task " << task << ": success(w*_i) " << own.success_rate
              << ", success(w*_j) " << cross.success_rate << " (mean returns "
              << own.mean_return << " / " << cross.mean_return << ")\n";
    if (own.success_rate < 0.8) {
      fail << "task " << task << " success " << own.success_rate << " < 0.8; ";
    }
    if (cross.success_rate > 0.4) {
      fail << "task " << task << " cross-condition success " << cross.success_rate
           << " > 0.4; ";
    }
    if (own.mean_return > expert.mean_return + 1e-9) {
      fail << "task " << task << " return above the expert ceiling; ";
    }
    if (own.mean_return < random.mean_return - std::abs(random.mean_return)) {
      fail << "task " << task << " return far below the random floor; ";
    }
  }

  const double total = shared.pipeline_train_seconds + seconds_since(start);
  std::cout << "  [7] pipeline train + eval " << total << " s\n";
  if (total >= 1800.0) fail << "pipeline took " << total << " s (limit 1800); ";
  return fail.str();
}

// ---------------------------------------------------------------------------
// 8. Alignment diagnostic
// ---------------------------------------------------------------------------

std::string criterion_alignment() {
  Pipeline& p = shared.get_pipeline();
  const OfflineDataset& data = shared.get_dataset();
  const AlignmentResult result =
      alignment_sweep(p, data, 0, {0.0, 0.25, 0.5, 0.75, 1.0}, 50, 31);
  std::ostringstream fail;
  for (const AlignmentPoint& pt : result.points) {
    std::cout << "  [8] coefficient " << pt.coefficient << " -> mean return " << pt.mean_return
              << "\n";
  }
  std::cout << "  [8] spearman " << result.spearman << "\n";
  if (result.spearman < 0.5) fail << "spearman " << result.spearman << " < 0.5; ";

  // Endpoint consistency: coefficient 1.0 should match conditioned control
  // within a generous Monte-Carlo band.
  const ControlEval own = evaluate_control(p, 0, 50, 1000);
  const double endpoint = result.points.back().mean_return;
  if (std::abs(endpoint - own.mean_return) > 8.0) {
    fail << "endpoint return " << endpoint << " far from eval " << own.mean_return << "; ";
  }
  return fail.str();
}

// ---------------------------------------------------------------------------
// 9. Data-processing-inequality trend
// ---------------------------------------------------------------------------

std::string criterion_dpi() {
  Pipeline& p = shared.get_pipeline();
  const OfflineDataset& data = shared.get_dataset();
  const DataSplit split = split_dataset(data);
  const int32_t K = p.schedule.steps();
  const std::vector<int32_t> ks{1, K / 4, K / 2, K};

  std::map<int32_t, double> mean_kl;
  for (int32_t k : ks) mean_kl[k] = 0.0;
  const std::vector<uint64_t> seeds{11, 22, 33, 44, 55};
  for (uint64_t seed : seeds) {
    for (int32_t k : ks) {
      mean_kl[k] += noise_level_prediction_kl(p.encoder, data, split, p.schedule, p.norm, k,
                                              400, 32, 1e-3, seed);
    }
  }
  std::ostringstream fail;
  int32_t inversions = 0;
  double prev = -1.0;
  for (int32_t k : ks) {
    mean_kl[k] /= seeds.size();
    std::cout << "  [9] k=" << k << " mean held-out KL " << mean_kl[k] << "\n";
    if (prev >= 0.0 && mean_kl[k] < prev) ++inversions;
    prev = mean_kl[k];
  }
  if (inversions > 1) fail << inversions << " inversions in the KL-vs-k trend; ";
  return fail.str();
}

// ---------------------------------------------------------------------------
// 10. Determinism and formats
// ---------------------------------------------------------------------------

std::string criterion_determinism() {
  std::ostringstream fail;
  const std::string dir = shared.work_dir + "/determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);

  RunConfig config;
  config.tasks = 2;
  config.episodes_per_task = 10;
  config.pairs_per_task = 30;
  config.train_steps = 25;
  config.batch_size = 8;
  config.denoise_steps = 16;
  config.checkpoint_interval = 10;
  config.seed = 77;

  // Dataset bytes.
  BuildDatasetOptions d;
  d.num_tasks = config.tasks;
  d.episodes_per_task = config.episodes_per_task;
  d.pairs_per_task = config.pairs_per_task;
  d.seed = config.seed;
  const std::string ds1 = dir + "/a.campds", ds2 = dir + "/b.campds";
  save_dataset(build_dataset(d), ds1);
  save_dataset(build_dataset(d), ds2);
  if (read_bytes(ds1) != read_bytes(ds2)) fail << "dataset bytes differ; ";

  // Training artifacts.
  const TrainRunResult r1 = run_training(config, ds1, dir + "/run1");
  const TrainRunResult r2 = run_training(config, ds1, dir + "/run2");
  if (read_bytes(r1.final_checkpoint) != read_bytes(r2.final_checkpoint)) {
    fail << "checkpoint bytes differ; ";
  }
  if (read_bytes(r1.metrics_csv) != read_bytes(r2.metrics_csv)) {
    fail << "metrics bytes differ; ";
  }

  // Every written file round-trips through inspect (header JSON silenced).
  for (const std::string& path :
       {ds1, r1.final_checkpoint, dir + "/run1/checkpoints/step_000010.campckpt"}) {
    std::ostringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    const int code = run_cli({"inspect", path});
    std::cout.rdbuf(old);
    if (code != 0) fail << "inspect failed on " << path << "; ";
  }
  // And the loaders accept them.
  (void)load_dataset(ds1);
  (void)load_checkpoint(r1.final_checkpoint);
  return fail.str();
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    }
  }

  shared.work_dir = (fs::temp_directory_path() / "camp_acceptance").string();
  fs::remove_all(shared.work_dir);
  fs::create_directories(shared.work_dir);

  const std::vector<Criterion> criteria{
      {1, "gradient correctness vs central finite differences", criterion_gradients},
      {2, "closed-form KL matches Monte Carlo", criterion_kl_oracle},
      {3, "preference labels match the brute-force oracle", criterion_preference_oracle},
      {4, "unconditional DDPM captures a 4-mode mixture", criterion_gmm},
      {5, "representation quality (probe, triplets, w* alignment)", criterion_representation},
      {6, "MI regularization lowers held-out condition KL", criterion_mi_trend},
      {7, "conditional control succeeds on-task and fails off-task", criterion_control},
      {8, "alignment sweep correlates condition with return", criterion_alignment},
      {9, "condition prediction degrades with noise level", criterion_dpi},
      {10, "bit-exact determinism and format round-trips", criterion_determinism},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && only.count(c.id) == 0) continue;
    const auto start = Clock::now();
    std::string reason;
    try {
      reason = c.run();
    } catch (const std::exception& e) {
      reason = std::string("exception: ") + e.what();
    }
    const double elapsed = seconds_since(start);
    if (reason.empty()) {
      std::cout << "PASS [" << c.id << "] " << c.name << " (" << elapsed << " s)\n";
    } else {
      std::cout << "FAIL [" << c.id << "] " << c.name << " (" << elapsed << " s): " << reason
                << "\n";
      ++failures;
    }
    std::cout.flush();
  }
  if (failures > 0) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "camp/diffusion.hpp"
#include "camp/invdyn.hpp"
#include "camp/rng.hpp"
#include "camp/schedule.hpp"
#include "test_helpers.hpp"

using namespace camp;

namespace {
GaussianEmbedding random_embedding(int32_t dim, Rng& rng) {
  GaussianEmbedding e;
  e.mean.resize(dim);
  e.log_var.resize(dim);
  for (double& v : e.mean) v = rng.uniform(-1.0, 1.0);
  for (double& v : e.log_var) v = rng.uniform(-1.5, 0.5);
  return e;
}

DiffusionBatch random_batch(int32_t count, const NoisePredictorSpec& spec,
                            const DiffusionSchedule& schedule, Rng& rng, double dropout = 0.25) {
  DiffusionBatch batch;
  for (int32_t i = 0; i < count; ++i) {
    DiffusionSample s;
    s.x0.resize(spec.data_dim);
    for (double& v : s.x0) v = rng.uniform(-1.5, 1.5);
    s.k = 1 + static_cast<int32_t>(rng.uniform_index(schedule.steps()));
    s.eps.resize(spec.data_dim);
    for (double& v : s.eps) v = rng.normal();
    s.drop = rng.uniform() < dropout;
    s.w = random_embedding(spec.cond_dim / 2, rng);
    batch.push_back(std::move(s));
  }
  return batch;
}
}  // namespace

TEST_CASE("cosine schedule invariants at K = 200") {
  const DiffusionSchedule s = DiffusionSchedule::make(200, ScheduleKind::cosine);
  CHECK(s.steps() == 200);
  CHECK(s.alpha_bar(200) < 1e-3);
  CHECK(s.alpha_bar(1) > 0.99 * s.alpha(1));
  double running = 1.0;
  for (int k = 1; k <= 200; ++k) {
    running *= s.alpha(k);
    CHECK(std::abs(s.alpha_bar(k) - running) <= 1e-12);
    if (k > 1) CHECK(s.alpha_bar(k) < s.alpha_bar(k - 1));
  }
  CHECK(s.posterior_var(1) == 0.0);
}

TEST_CASE("schedule constructor rejects corrupted vectors and small K") {
  CHECK_THROWS_AS(DiffusionSchedule::make(1, ScheduleKind::cosine), std::invalid_argument);
  const DiffusionSchedule s = DiffusionSchedule::make(16, ScheduleKind::cosine);
  auto alpha = s.alpha_vec();
  auto bar = s.alpha_bar_vec();
  auto var = s.posterior_var_vec();
  std::swap(bar[4], bar[10]);  // breaks monotonicity and the product identity
  CHECK_THROWS_AS(DiffusionSchedule::from_vectors(alpha, bar, var, ScheduleKind::cosine),
                  std::invalid_argument);
  CHECK_NOTHROW(DiffusionSchedule::from_vectors(s.alpha_vec(), s.alpha_bar_vec(),
                                                s.posterior_var_vec(), ScheduleKind::cosine));
}

TEST_CASE("q_sample is the exact affine mix and respects step bounds") {
  const DiffusionSchedule s = DiffusionSchedule::make(50, ScheduleKind::cosine);
  std::vector<double> x0{0.4, -1.2};
  std::vector<double> eps{1.0, -0.5};
  const auto xk = q_sample(x0, 7, eps, s);
  const double a = std::sqrt(s.alpha_bar(7)), b = std::sqrt(1.0 - s.alpha_bar(7));
  CHECK(xk[0] == doctest::Approx(a * x0[0] + b * eps[0]).epsilon(1e-15));
  CHECK(xk[1] == doctest::Approx(a * x0[1] + b * eps[1]).epsilon(1e-15));
  CHECK_THROWS_AS(q_sample(x0, 0, eps, s), std::out_of_range);
  CHECK_THROWS_AS(q_sample(x0, 51, eps, s), std::out_of_range);
}

TEST_CASE("q_sample limit behavior at the schedule ends") {
  const DiffusionSchedule s = DiffusionSchedule::make(200, ScheduleKind::cosine);
  const std::vector<double> x0{1.3, -0.8};
  const std::vector<double> eps{0.5, 2.0};
  // k = 1: alpha_bar near 1, x_k stays within O(sqrt(1 - alpha_bar)) of x0.
  const auto x1 = q_sample(x0, 1, eps, s);
  const double tail1 = std::sqrt(1.0 - s.alpha_bar(1));
  for (size_t i = 0; i < x0.size(); ++i) {
    CHECK(std::abs(x1[i] - x0[i]) <= tail1 * std::abs(eps[i]) + (1.0 - std::sqrt(s.alpha_bar(1))) * std::abs(x0[i]) + 1e-12);
  }
  // k = K: alpha_bar near 0, x_k collapses onto eps.
  const auto xK = q_sample(x0, 200, eps, s);
  const double headK = std::sqrt(s.alpha_bar(200));
  for (size_t i = 0; i < x0.size(); ++i) {
    CHECK(std::abs(xK[i] - eps[i]) <=
          headK * std::abs(x0[i]) + (1.0 - std::sqrt(1.0 - s.alpha_bar(200))) * std::abs(eps[i]) + 1e-12);
  }
  CHECK(std::abs(xK[0] - eps[0]) < 1e-2);
}

TEST_CASE("q_sample preserves unit variance") {
  const DiffusionSchedule s = DiffusionSchedule::make(100, ScheduleKind::cosine);
  Rng rng(13);
  for (int32_t k : {3, 50, 97}) {
    double sum = 0.0, sum_sq = 0.0;
    const int64_t n = 100000;
    for (int64_t i = 0; i < n; ++i) {
      const double x0 = rng.normal();  // unit-variance data
      const double eps = rng.normal();
      const auto xk = q_sample({x0}, k, {eps}, s);
      sum += xk[0];
      sum_sq += xk[0] * xk[0];
    }
    const double var = sum_sq / n - (sum / n) * (sum / n);
    CHECK(std::abs(var - 1.0) < 0.02);
  }
}

TEST_CASE("q_sample marginal mean matches sqrt(alpha_bar) x0") {
  const DiffusionSchedule s = DiffusionSchedule::make(60, ScheduleKind::cosine);
  Rng rng(17);
  const double x0 = 1.3;
  const int32_t k = 20;
  const int64_t n = 100000;
  double sum = 0.0;
  for (int64_t i = 0; i < n; ++i) sum += q_sample({x0}, k, {rng.normal()}, s)[0];
  const double se = std::sqrt(1.0 - s.alpha_bar(k)) / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(sum / n - std::sqrt(s.alpha_bar(k)) * x0) < 3.0 * se);
}

TEST_CASE("score matching loss on an all-dropped batch ignores conditions bitwise") {
  NoisePredictorSpec spec;
  spec.data_dim = 6;
  spec.cond_dim = 4;
  spec.hidden = {16, 16};
  const DiffusionSchedule schedule = DiffusionSchedule::make(10, ScheduleKind::cosine);
  Rng rng(5);
  DiffusionBatch batch = random_batch(8, spec, schedule, rng, /*dropout=*/2.0);  // all dropped

  NoisePredictor model_a(spec, 42);
  const double with_conds = score_matching_loss(model_a, batch, schedule);
  DiffusionBatch zeroed = batch;
  for (DiffusionSample& s : zeroed) {
    std::fill(s.w.mean.begin(), s.w.mean.end(), 0.0);
    std::fill(s.w.log_var.begin(), s.w.log_var.end(), 0.0);
  }
  NoisePredictor model_b(spec, 42);
  const double without_conds = score_matching_loss(model_b, zeroed, schedule);
  CHECK(with_conds == without_conds);  // bit-identical

  // gradients are bit-identical too
  auto grads_of = [&](NoisePredictor& m, const DiffusionBatch& b) {
    Tape t;
    auto nodes = diffusion_loss_nodes(t, m, nullptr, b, schedule, {});
    t.backward(nodes.score);
    return t.grads_for(m.params());
  };
  NoisePredictor m1(spec, 42), m2(spec, 42);
  const auto g1 = grads_of(m1, batch);
  const auto g2 = grads_of(m2, zeroed);
  REQUIRE(g1.size() == g2.size());
  for (size_t i = 0; i < g1.size(); ++i) CHECK(g1[i].second.data == g2[i].second.data);
}

TEST_CASE("zero predictor loss approximates the data dimension") {
  NoisePredictorSpec spec;
  spec.data_dim = 12;
  spec.cond_dim = 4;
  spec.hidden = {8};
  NoisePredictor model(spec, 3);
  // Zero the network head so epsilon_theta == 0.
  ParamStore& store = model.params();
  for (ParamId id = 0; id < store.count(); ++id) {
    const std::string& name = store.name(id);
    if (name.find("layer1") != std::string::npos) {
      std::fill(store.value(id).data.begin(), store.value(id).data.end(), 0.0);
    }
  }
  const DiffusionSchedule schedule = DiffusionSchedule::make(10, ScheduleKind::cosine);
  Rng rng(7);
  DiffusionBatch batch = random_batch(4000, spec, schedule, rng);
  const double loss = score_matching_loss(model, batch, schedule);
  CHECK(loss == doctest::Approx(spec.data_dim).epsilon(0.02));
}

TEST_CASE("perfect noise prediction gives exactly zero loss") {
  // A zeroed network predicts 0 for every input; a batch whose true noise is
  // the zero vector is therefore predicted perfectly.
  NoisePredictorSpec spec;
  spec.data_dim = 6;
  spec.cond_dim = 4;
  spec.hidden = {8};
  NoisePredictor model(spec, 3);
  ParamStore& store = model.params();
  for (ParamId id = 0; id < store.count(); ++id) {
    if (store.name(id).find("layer1") != std::string::npos) {
      std::fill(store.value(id).data.begin(), store.value(id).data.end(), 0.0);
    }
  }
  const DiffusionSchedule schedule = DiffusionSchedule::make(10, ScheduleKind::cosine);
  Rng rng(7);
  DiffusionBatch batch = random_batch(4, spec, schedule, rng);
  for (DiffusionSample& s : batch) std::fill(s.eps.begin(), s.eps.end(), 0.0);
  CHECK(score_matching_loss(model, batch, schedule) == 0.0);
}

TEST_CASE("mi term is non-negative on random batches") {
  NoisePredictorSpec spec;
  spec.data_dim = 6;
  spec.cond_dim = 4;
  spec.hidden = {12};
  NoisePredictor model(spec, 21);
  CondPredictor cond(spec.data_dim, 2, 22, {8});
  const DiffusionSchedule schedule = DiffusionSchedule::make(12, ScheduleKind::cosine);
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    const DiffusionBatch batch = random_batch(5, spec, schedule, rng);
    CHECK(mi_kl_term(model, cond, batch, schedule) >= 0.0);
  }
}

TEST_CASE("empty diffusion batch raises") {
  NoisePredictorSpec spec;
  spec.data_dim = 4;
  spec.cond_dim = 2;
  spec.hidden = {8};
  NoisePredictor model(spec, 1);
  const DiffusionSchedule schedule = DiffusionSchedule::make(8, ScheduleKind::cosine);
  CHECK_THROWS_AS(score_matching_loss(model, {}, schedule), std::invalid_argument);
}

TEST_CASE("mi term is zero iff the predictor matches the encoder output") {
  // Build a predictor whose output we can steer via the batch's target.
  NoisePredictorSpec spec;
  spec.data_dim = 4;
  spec.cond_dim = 2;
  spec.hidden = {8};
  NoisePredictor model(spec, 11);
  CondPredictor cond(spec.data_dim, 1, 12, {8});
  // Zero phi's head: predictions become N(0, 1) rows exactly.
  ParamStore& store = cond.params();
  for (ParamId id = 0; id < store.count(); ++id) {
    if (store.name(id).find("layer1") != std::string::npos) {
      std::fill(store.value(id).data.begin(), store.value(id).data.end(), 0.0);
    }
  }
  const DiffusionSchedule schedule = DiffusionSchedule::make(8, ScheduleKind::cosine);
  Rng rng(13);
  DiffusionBatch batch = random_batch(6, spec, schedule, rng);
  for (DiffusionSample& s : batch) {
    std::fill(s.w.mean.begin(), s.w.mean.end(), 0.0);
    std::fill(s.w.log_var.begin(), s.w.log_var.end(), 0.0);
  }
  CHECK(mi_kl_term(model, cond, batch, schedule) == doctest::Approx(0.0).epsilon(1e-15));

  // any mismatch makes it strictly positive
  batch[0].w.mean[0] = 0.7;
  CHECK(mi_kl_term(model, cond, batch, schedule) > 0.0);
}

TEST_CASE("combined loss is the score loss at zeta 0 and rejects negative zeta") {
  NoisePredictorSpec spec;
  spec.data_dim = 6;
  spec.cond_dim = 4;
  spec.hidden = {12};
  NoisePredictor model(spec, 21);
  CondPredictor cond(spec.data_dim, 2, 22, {8});
  const DiffusionSchedule schedule = DiffusionSchedule::make(12, ScheduleKind::cosine);
  Rng rng(23);
  const DiffusionBatch batch = random_batch(5, spec, schedule, rng);

  DiffusionLossOptions options;
  options.zeta = 0.0;
  CHECK(combined_loss(model, cond, batch, schedule, options) ==
        score_matching_loss(model, batch, schedule));

  options.zeta = -0.1;
  CHECK_THROWS_AS(combined_loss(model, cond, batch, schedule, options), std::invalid_argument);
}

TEST_CASE("combined diffusion loss gradient matches finite differences") {
  NoisePredictorSpec spec;
  spec.data_dim = 5;
  spec.cond_dim = 4;
  spec.time_embed_dim = 8;
  spec.cond_embed_dim = 8;
  spec.hidden = {10};
  NoisePredictor model(spec, 31);
  CondPredictor cond(spec.data_dim, 2, 32, {8});
  const DiffusionSchedule schedule = DiffusionSchedule::make(6, ScheduleKind::cosine);
  Rng rng(33);
  const DiffusionBatch batch = random_batch(4, spec, schedule, rng);
  DiffusionLossOptions options;
  options.zeta = 0.1;

  auto build = [&](Tape& t) {
    return diffusion_loss_nodes(t, model, &cond, batch, schedule, options).combined;
  };
  CHECK(camp::testing::max_grad_rel_error(model.params(), build, 1e-5) < 1e-4);
  CHECK(camp::testing::max_grad_rel_error(cond.params(), build, 1e-5) < 1e-4);
}

TEST_CASE("guidance endpoints take the exact branch") {
  NoisePredictorSpec spec;
  spec.data_dim = 4;
  spec.cond_dim = 2;
  spec.hidden = {8};
  NoisePredictor model(spec, 41);
  const DiffusionSchedule schedule = DiffusionSchedule::make(10, ScheduleKind::cosine);
  Tensor x({3, 4});
  Rng rng(43);
  for (double& v : x.data) v = rng.normal();
  Tensor cond({3, 2});
  for (double& v : cond.data) v = rng.uniform(-1.0, 1.0);

  auto step_with = [&](double s, const Tensor* c, uint64_t seed) {
    std::vector<Rng> rngs{Rng(seed), Rng(seed + 1), Rng(seed + 2)};
    return guided_denoise_step(model, x, 5, c, s, schedule, rngs);
  };
  // s = 0 equals the unconditional step
  CHECK(step_with(0.0, &cond, 7).data == step_with(1.0, nullptr, 7).data);
  // s = 1 equals the plain conditional step: compare against the posterior
  // formula evaluated on the conditional branch's noise.
  const Tensor direct = step_with(1.0, &cond, 9);
  std::vector<Rng> rngs{Rng(9), Rng(10), Rng(11)};
  const Tensor eps_c = model.infer(x, 5, &cond, schedule);
  const double ab = schedule.alpha_bar(5);
  const double ab_prev = schedule.alpha_bar(4);
  const double c0 = std::sqrt(ab_prev) * schedule.beta(5) / (1.0 - ab);
  const double ck = std::sqrt(schedule.alpha(5)) * (1.0 - ab_prev) / (1.0 - ab);
  const double sigma = std::sqrt(schedule.posterior_var(5));
  for (int64_t i = 0; i < 3; ++i) {
    for (int64_t j = 0; j < 4; ++j) {
      const double z = rngs[i].normal();
      const int64_t idx = i * 4 + j;
      double x0 = (1.0 / std::sqrt(ab)) * (x.data[idx] - std::sqrt(1.0 - ab) * eps_c.data[idx]);
      x0 = std::min(std::max(x0, -kSampleX0Clip), kSampleX0Clip);
      const double expected = c0 * x0 + ck * x.data[idx] + sigma * z;
      CHECK(direct.data[idx] == expected);
    }
  }
  // step index outside [1, K]
  std::vector<Rng> r3{Rng(1), Rng(2), Rng(3)};
  CHECK_THROWS_AS(guided_denoise_step(model, x, 0, &cond, 1.2, schedule, r3), std::out_of_range);
  CHECK_THROWS_AS(guided_denoise_step(model, x, 11, &cond, 1.2, schedule, r3), std::out_of_range);
}

TEST_CASE("sampled trajectories start exactly at the requested state") {
  NoisePredictorSpec spec;
  spec.data_dim = 6;  // 3 states of dimension 2
  spec.cond_dim = 2;
  spec.hidden = {8};
  NoisePredictor model(spec, 51);
  const DiffusionSchedule schedule = DiffusionSchedule::make(12, ScheduleKind::cosine);
  NormStats norm;
  norm.mean = {0.25, -0.5};
  norm.std = {1.5, 0.75};
  const std::vector<double> cond{0.3, -0.3};
  const std::vector<double> start{0.123456789, -0.987654321};

  const auto traj = sample_trajectory(model, schedule, norm, cond, start, 1.2, 99);
  REQUIRE(traj.size() == 6);
  CHECK(traj[0] == start[0]);
  CHECK(traj[1] == start[1]);
  for (double v : traj) CHECK(std::isfinite(v));

  // determinism
  const auto again = sample_trajectory(model, schedule, norm, cond, start, 1.2, 99);
  CHECK(traj == again);
  const auto other_seed = sample_trajectory(model, schedule, norm, cond, start, 1.2, 100);
  CHECK(traj != other_seed);
}

TEST_CASE("batched sampling equals one-at-a-time sampling") {
  NoisePredictorSpec spec;
  spec.data_dim = 6;
  spec.cond_dim = 2;
  spec.hidden = {8};
  NoisePredictor model(spec, 53);
  const DiffusionSchedule schedule = DiffusionSchedule::make(10, ScheduleKind::cosine);
  const NormStats norm = identity_norm(2);

  Tensor conds({3, 2}, {0.1, 0.2, -0.4, 0.0, 0.9, -0.9});
  Tensor starts({3, 2}, {0.0, 0.1, -0.5, 0.5, 1.0, -1.0});
  std::vector<Rng> rngs{Rng(201).child(0), Rng(201).child(1), Rng(201).child(2)};
  const Tensor batch = sample_trajectories(model, schedule, norm, conds, starts, 1.2, rngs);

  for (int64_t i = 0; i < 3; ++i) {
    std::vector<Rng> single{Rng(201).child(i)};
    Tensor cond_row({1, 2}, {conds.data[i * 2], conds.data[i * 2 + 1]});
    Tensor start_row({1, 2}, {starts.data[i * 2], starts.data[i * 2 + 1]});
    const Tensor one =
        sample_trajectories(model, schedule, norm, cond_row, start_row, 1.2, single);
    for (int64_t j = 0; j < 6; ++j) CHECK(one.data[j] == batch.data[i * 6 + j]);
  }
}

TEST_CASE("elbo terms on a 2-step chain") {
  NoisePredictorSpec spec;
  spec.data_dim = 4;
  spec.cond_dim = 2;
  spec.hidden = {8};
  NoisePredictor model(spec, 61);
  const DiffusionSchedule schedule = DiffusionSchedule::make(2, ScheduleKind::cosine);
  GaussianEmbedding cond;
  cond.mean = {0.4};
  cond.log_var = {-0.2};
  const std::vector<double> x0{0.5, -0.5, 1.0, 0.0};

  Rng rng(63);
  const ElboTerms terms = elbo_terms(model, cond, x0, schedule, rng);
  CHECK(std::isfinite(terms.reconstruction));
  CHECK(terms.prior_x >= 0.0);
  CHECK(terms.prior_c >= 0.0);
  CHECK(terms.denoise_matching >= 0.0);

  // prior_c is the closed-form KL to the standard normal
  GaussianEmbedding standard;
  standard.mean = {0.0};
  standard.log_var = {0.0};
  CHECK(terms.prior_c == doctest::Approx(kl_diag_gauss(cond, standard)).epsilon(1e-12));

  // the x_K prior-matching term is parameter-free
  Rng rng2(63);
  NoisePredictor other(spec, 999);  // different parameters
  const ElboTerms other_terms = elbo_terms(other, cond, x0, schedule, rng2);
  CHECK(terms.prior_x == other_terms.prior_x);
  CHECK(terms.reconstruction != other_terms.reconstruction);
}

TEST_CASE("weighted score loss applies the per-step coefficient") {
  NoisePredictorSpec spec;
  spec.data_dim = 4;
  spec.cond_dim = 2;
  spec.hidden = {8};
  NoisePredictor model(spec, 71);
  const DiffusionSchedule schedule = DiffusionSchedule::make(8, ScheduleKind::cosine);
  Rng rng(73);
  DiffusionBatch batch = random_batch(1, spec, schedule, rng);
  batch[0].k = 4;
  const double simple = score_matching_loss(model, batch, schedule, false);
  const double weighted = score_matching_loss(model, batch, schedule, true);
  const double beta = schedule.beta(4);
  const double w = beta * beta /
                   (2.0 * schedule.posterior_var(4) * (1.0 - schedule.alpha_bar(4)) *
                    schedule.alpha(4));
  CHECK(weighted == doctest::Approx(simple * w).epsilon(1e-12));
}

TEST_CASE("norm stats round-trip and reject degenerate input") {
  NormStats n;
  n.mean = {1.0, -2.0};
  n.std = {2.0, 0.5};
  const std::vector<double> flat{0.0, 1.0, 2.0, 3.0};
  const auto z = n.normalize(flat);
  const auto back = n.denormalize(z);
  for (size_t i = 0; i < flat.size(); ++i) CHECK(back[i] == doctest::Approx(flat[i]).epsilon(1e-12));
  NormStats bad;
  bad.mean = {0.0};
  bad.std = {0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("invdyn loss oracle and clipping") {
  InverseDynamics model(2, 2, 0.25, 7);
  // zero the output head: g == 0
  ParamStore& store = model.params();
  for (ParamId id = 0; id < store.count(); ++id) {
    if (store.name(id).find("layer2") != std::string::npos) {
      std::fill(store.value(id).data.begin(), store.value(id).data.end(), 0.0);
    }
  }
  // three transitions with known actions
  Tensor inputs({3, 4});
  Tensor targets({3, 2}, {0.1, -0.2, 0.25, 0.0, -0.1, 0.05});
  double mean_sq_norm = 0.0;
  for (int i = 0; i < 3; ++i) {
    mean_sq_norm += targets.data[i * 2] * targets.data[i * 2] +
                    targets.data[i * 2 + 1] * targets.data[i * 2 + 1];
  }
  mean_sq_norm /= 3.0;
  CHECK(model.loss_value(inputs, targets) == doctest::Approx(mean_sq_norm).epsilon(1e-12));

  // clipping contract
  const auto a = model.predict({5.0, 5.0}, {-5.0, -5.0});
  for (double v : a) {
    CHECK(v <= 0.25);
    CHECK(v >= -0.25);
  }

  Tape tape;
  CHECK_THROWS_AS(model.loss_node(tape, Tensor({2, 3}), targets), std::invalid_argument);
}

TEST_CASE("invdyn gradient matches finite differences") {
  InverseDynamics model(2, 2, 0.25, 11, {6, 6});
  Rng rng(83);
  Tensor inputs({4, 4});
  for (double& v : inputs.data) v = rng.uniform(-1.0, 1.0);
  Tensor targets({4, 2});
  for (double& v : targets.data) v = rng.uniform(-0.25, 0.25);
  auto build = [&](Tape& t) { return model.loss_node(t, inputs, targets); };
  CHECK(camp::testing::max_grad_rel_error(model.params(), build) < 1e-5);
}

TEST_CASE("perfect predictor gives zero invdyn loss") {
  InverseDynamics model(2, 2, 0.25, 7);
  Tensor inputs({2, 4}, {0.1, 0.2, 0.3, 0.4, -0.1, -0.2, -0.3, -0.4});
  const Tensor pred = model.infer(inputs);
  Tensor targets({2, 2}, pred.data);
  CHECK(model.loss_value(inputs, targets) == doctest::Approx(0.0).epsilon(1e-15));
}

#include "camp/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace camp {

namespace {
// Squared-cosine profile with the usual 0.008 offset; alpha_bar_k = f(k)/f(0).
double cosine_profile(int32_t k, int32_t steps) {
  constexpr double s = 0.008;
  const double u = (static_cast<double>(k) / steps + s) / (1.0 + s);
  const double c = std::cos(u * std::numbers::pi / 2.0);
  return c * c;
}

// Per-step beta is capped to keep alpha strictly positive at the noisy end.
constexpr double kMaxBeta = 0.999;
}  // namespace

ScheduleKind schedule_kind_from_string(const std::string& name) {
  if (name == "cosine") return ScheduleKind::cosine;
  throw std::invalid_argument("unknown schedule kind '" + name + "' (supported: cosine)");
}

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::cosine: return "cosine";
  }
  throw std::logic_error("unreachable schedule kind");
}

int32_t DiffusionSchedule::index(int32_t k) const {
  if (k < 1 || k > steps()) {
    throw std::out_of_range("schedule: step " + std::to_string(k) + " outside [1, " +
                            std::to_string(steps()) + "]");
  }
  return k - 1;
}

DiffusionSchedule DiffusionSchedule::make(int32_t steps, ScheduleKind kind) {
  if (steps < 2) throw std::invalid_argument("make_schedule: need at least 2 steps");
  DiffusionSchedule s;
  s.kind_ = kind;
  s.alpha_.resize(steps);
  s.alpha_bar_.resize(steps);
  s.posterior_var_.resize(steps);
  const double f0 = cosine_profile(0, steps);
  double prev_profile = f0;
  double running = 1.0;
  for (int32_t k = 1; k <= steps; ++k) {
    const double fk = cosine_profile(k, steps);
    double a = fk / prev_profile;
    a = std::max(a, 1.0 - kMaxBeta);
    prev_profile = fk;
    running *= a;
    s.alpha_[k - 1] = a;
    s.alpha_bar_[k - 1] = running;
    const double prev_bar = k == 1 ? 1.0 : s.alpha_bar_[k - 2];
    s.posterior_var_[k - 1] = (1.0 - a) * (1.0 - prev_bar) / (1.0 - running);
  }
  s.validate();
  return s;
}

DiffusionSchedule DiffusionSchedule::from_vectors(std::vector<double> alpha,
                                                  std::vector<double> alpha_bar,
                                                  std::vector<double> posterior_var,
                                                  ScheduleKind kind) {
  DiffusionSchedule s;
  s.kind_ = kind;
  s.alpha_ = std::move(alpha);
  s.alpha_bar_ = std::move(alpha_bar);
  s.posterior_var_ = std::move(posterior_var);
  s.validate();
  return s;
}

void DiffusionSchedule::validate() const {
  const int32_t n = steps();
  if (n < 2) throw std::invalid_argument("schedule: need at least 2 steps");
  if (alpha_bar_.size() != alpha_.size() || posterior_var_.size() != alpha_.size()) {
    throw std::invalid_argument("schedule: vector lengths differ");
  }
  double running = 1.0;
  for (int32_t i = 0; i < n; ++i) {
    const double a = alpha_[i];
    if (!(a > 0.0 && a < 1.0)) {
      throw std::invalid_argument("schedule: alpha outside (0, 1) at step " + std::to_string(i + 1));
    }
    running *= a;
    if (std::abs(alpha_bar_[i] - running) > 1e-12) {
      throw std::invalid_argument("schedule: alpha_bar is not the running product at step " +
                                  std::to_string(i + 1));
    }
    if (i > 0 && !(alpha_bar_[i] < alpha_bar_[i - 1])) {
      throw std::invalid_argument("schedule: alpha_bar must be strictly decreasing");
    }
    const double prev_bar = i == 0 ? 1.0 : alpha_bar_[i - 1];
    const double expected_var = (1.0 - a) * (1.0 - prev_bar) / (1.0 - alpha_bar_[i]);
    if (std::abs(posterior_var_[i] - expected_var) > 1e-12) {
      throw std::invalid_argument("schedule: posterior variance mismatch at step " +
                                  std::to_string(i + 1));
    }
  }
  if (!(alpha_bar_[0] > 0.99 * alpha_[0])) {
    throw std::invalid_argument("schedule: alpha_bar_1 must stay close to alpha_1");
  }
  if (!(alpha_bar_[n - 1] < 1e-3)) {
    throw std::invalid_argument("schedule: alpha_bar_K must fall below 1e-3");
  }
}

}  // namespace camp

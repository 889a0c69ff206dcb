#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace camp {

enum class ScheduleKind { cosine };

ScheduleKind schedule_kind_from_string(const std::string& name);
std::string to_string(ScheduleKind kind);

/// Forward-process coefficients for K denoising steps, 1-based in k.
/// alpha_bar is the running product of alpha and is strictly decreasing;
/// posterior_var holds the DDPM posterior variances sigma_q^2(k), zero at
/// k = 1. Construction validates every invariant and rejects corrupted
/// vectors.
class DiffusionSchedule {
 public:
  static DiffusionSchedule make(int32_t steps, ScheduleKind kind);  // throws for steps < 2
  static DiffusionSchedule from_vectors(std::vector<double> alpha, std::vector<double> alpha_bar,
                                        std::vector<double> posterior_var, ScheduleKind kind);

  int32_t steps() const { return static_cast<int32_t>(alpha_.size()); }
  ScheduleKind kind() const { return kind_; }

  double alpha(int32_t k) const { return alpha_[index(k)]; }
  double alpha_bar(int32_t k) const { return alpha_bar_[index(k)]; }
  double beta(int32_t k) const { return 1.0 - alpha_[index(k)]; }
  double posterior_var(int32_t k) const { return posterior_var_[index(k)]; }

  const std::vector<double>& alpha_vec() const { return alpha_; }
  const std::vector<double>& alpha_bar_vec() const { return alpha_bar_; }
  const std::vector<double>& posterior_var_vec() const { return posterior_var_; }

  /// Bounds-checks a 1-based step index.
  int32_t index(int32_t k) const;

 private:
  DiffusionSchedule() = default;
  void validate() const;

  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> posterior_var_;
  ScheduleKind kind_ = ScheduleKind::cosine;
};

}  // namespace camp

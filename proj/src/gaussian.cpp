#include "camp/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace camp {

void GaussianEmbedding::validate() const {
  if (mean.size() != log_var.size()) {
    throw std::invalid_argument("GaussianEmbedding: mean/log_var size mismatch");
  }
  for (double v : mean) {
    if (!std::isfinite(v)) throw std::invalid_argument("GaussianEmbedding: non-finite mean");
  }
  for (double v : log_var) {
    if (!std::isfinite(v) || v < kLogVarMin || v > kLogVarMax) {
      throw std::invalid_argument("GaussianEmbedding: log_var outside clamp bounds");
    }
  }
}

std::vector<double> GaussianEmbedding::sample(Rng& rng) const {
  std::vector<double> out(mean.size());
  for (size_t i = 0; i < mean.size(); ++i) {
    out[i] = mean[i] + std::exp(0.5 * log_var[i]) * rng.normal();
  }
  return out;
}

std::vector<double> GaussianEmbedding::condition_vector() const {
  std::vector<double> out;
  out.reserve(mean.size() * 2);
  out.insert(out.end(), mean.begin(), mean.end());
  out.insert(out.end(), log_var.begin(), log_var.end());
  return out;
}

double kl_diag_gauss(const GaussianEmbedding& p, const GaussianEmbedding& q) {
  if (p.dim() != q.dim()) {
    throw std::invalid_argument("kl_diag_gauss: dimension mismatch " + std::to_string(p.dim()) +
                                " vs " + std::to_string(q.dim()));
  }
  double kl = 0.0;
  for (int32_t d = 0; d < p.dim(); ++d) {
    const double dlv = p.log_var[d] - q.log_var[d];
    const double dm = p.mean[d] - q.mean[d];
    kl += -dlv + std::exp(dlv) + dm * dm * std::exp(-q.log_var[d]) - 1.0;
  }
  return 0.5 * kl;
}

Var kl_diag_gauss_node(Tape& t, const GaussNodes& p, const GaussNodes& q) {
  if (t.val(p.mean).shape != t.val(q.mean).shape ||
      t.val(p.log_var).shape != t.val(q.log_var).shape) {
    throw std::invalid_argument("kl_diag_gauss_node: dimension mismatch " +
                                shape_str(t.val(p.mean).shape) + " vs " +
                                shape_str(t.val(q.mean).shape));
  }
  Var dlv = t.sub(p.log_var, q.log_var);
  Var dm = t.sub(p.mean, q.mean);
  Var terms = t.add(t.sub(t.exp(dlv), dlv),
                    t.sub(t.mul(t.square(dm), t.exp(t.scale(q.log_var, -1.0))),
                          t.constant(Tensor(t.val(p.mean).shape, 1.0))));
  return t.scale(t.sum_last(terms), 0.5);
}

GaussianEmbedding embedding_from_rows(const Tensor& mean, const Tensor& log_var, int64_t row) {
  GaussianEmbedding e;
  if (mean.rank() == 1) {
    e.mean = mean.data;
    e.log_var = log_var.data;
    return e;
  }
  const Tensor m = t_row(mean, row);
  const Tensor lv = t_row(log_var, row);
  e.mean = m.data;
  e.log_var = lv.data;
  return e;
}

}  // namespace camp

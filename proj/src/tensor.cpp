#include "camp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>

namespace camp {

namespace {

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(op + ": shape mismatch " + shape_str(a.shape) + " vs " +
                              shape_str(b.shape));
}

std::vector<int64_t> strides_of(const std::vector<int64_t>& shape) {
  std::vector<int64_t> st(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
    st[i] = st[i + 1] * shape[i + 1];
  }
  return st;
}

// Maps a linear index in the broadcast output to a linear index in the
// (possibly smaller) input, treating size-1 axes as pinned.
struct BroadcastIndexer {
  std::vector<int64_t> out_shape;
  std::vector<int64_t> out_strides;
  std::vector<int64_t> in_strides;  // 0 on broadcast axes

  BroadcastIndexer(const std::vector<int64_t>& out, const std::vector<int64_t>& in)
      : out_shape(out), out_strides(strides_of(out)) {
    const size_t pad = out.size() - in.size();
    auto real = strides_of(in);
    in_strides.assign(out.size(), 0);
    for (size_t i = 0; i < in.size(); ++i) {
      in_strides[pad + i] = (in[i] == 1) ? 0 : real[i];
    }
  }

  int64_t map(int64_t out_idx) const {
    int64_t in_idx = 0;
    for (size_t ax = 0; ax < out_shape.size(); ++ax) {
      const int64_t coord = (out_idx / out_strides[ax]) % out_shape[ax];
      in_idx += coord * in_strides[ax];
    }
    return in_idx;
  }
};

template <typename F>
Tensor unary_map(const Tensor& x, F f) {
  Tensor out(x.shape);
  for (int64_t i = 0; i < x.size(); ++i) out.data[i] = f(x.data[i]);
  return out;
}

template <typename F>
Tensor binary_broadcast(const char* op, const Tensor& a, const Tensor& b, F f) {
  if (a.same_shape(b)) {
    Tensor out(a.shape);
    for (int64_t i = 0; i < a.size(); ++i) out.data[i] = f(a.data[i], b.data[i]);
    return out;
  }
  std::vector<int64_t> os;
  try {
    os = broadcast_shape(a.shape, b.shape);
  } catch (const std::invalid_argument&) {
    shape_error(op, a, b);
  }
  Tensor out(os);
  BroadcastIndexer ia(os, a.shape), ib(os, b.shape);
  for (int64_t i = 0; i < out.size(); ++i) {
    out.data[i] = f(a.data[ia.map(i)], b.data[ib.map(i)]);
  }
  return out;
}

}  // namespace

Tensor::Tensor(std::vector<int64_t> s, double fill) : shape(std::move(s)) {
  for (int64_t d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension in " + shape_str(shape));
  }
  data.assign(static_cast<size_t>(shape_product(shape)), fill);
}

Tensor::Tensor(std::vector<int64_t> s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
  for (int64_t d : shape) {
    if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension in " + shape_str(shape));
  }
  if (shape_product(shape) != static_cast<int64_t>(data.size())) {
    throw std::invalid_argument("Tensor: " + std::to_string(data.size()) +
                                " values do not fill shape " + shape_str(shape));
  }
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data.assign(1, v);
  return t;
}

Tensor Tensor::zeros_like(const Tensor& t) { return Tensor(t.shape); }

int64_t Tensor::rows() const {
  if (shape.empty()) return 1;
  return shape.front();
}

int64_t Tensor::cols() const {
  if (shape.empty()) return 1;
  return shape.back();
}

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("Tensor::item: tensor of shape " + shape_str(shape) +
                                " is not a single value");
  }
  return data[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_str(const std::vector<int64_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

int64_t shape_product(const std::vector<int64_t>& shape) {
  int64_t p = 1;
  for (int64_t d : shape) p *= d;
  return p;
}

std::vector<int64_t> broadcast_shape(const std::vector<int64_t>& a,
                                     const std::vector<int64_t>& b) {
  const size_t n = std::max(a.size(), b.size());
  std::vector<int64_t> out(n, 1);
  for (size_t i = 0; i < n; ++i) {
    const int64_t da = (i < n - a.size()) ? 1 : a[i - (n - a.size())];
    const int64_t db = (i < n - b.size()) ? 1 : b[i - (n - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw std::invalid_argument("broadcast: incompatible shapes " + shape_str(a) + " vs " +
                                  shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

Tensor t_add(const Tensor& a, const Tensor& b) {
  return binary_broadcast("add", a, b, [](double x, double y) { return x + y; });
}

Tensor t_sub(const Tensor& a, const Tensor& b) {
  return binary_broadcast("sub", a, b, [](double x, double y) { return x - y; });
}

Tensor t_mul(const Tensor& a, const Tensor& b) {
  return binary_broadcast("mul", a, b, [](double x, double y) { return x * y; });
}

Tensor t_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0]) {
    shape_error("matmul", a, b);
  }
  const int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
  Tensor out({m, n});
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double* po = out.data.data();
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    double* orow = po + i * n;
    for (int64_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = pb + kk * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Tensor t_transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw std::invalid_argument("transpose: expected rank-2 tensor, got " + shape_str(a.shape));
  }
  const int64_t r = a.shape[0], c = a.shape[1];
  Tensor out({c, r});
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < c; ++j) out.data[j * r + i] = a.data[i * c + j];
  }
  return out;
}

Tensor t_relu(const Tensor& x) {
  return unary_map(x, [](double v) { return v > 0.0 ? v : 0.0; });
}

Tensor t_tanh(const Tensor& x) {
  return unary_map(x, [](double v) { return std::tanh(v); });
}

Tensor t_exp(const Tensor& x) {
  Tensor out = unary_map(x, [](double v) { return std::exp(v); });
  if (!out.all_finite()) throw std::domain_error("exp: overflow to non-finite value");
  return out;
}

Tensor t_log(const Tensor& x) {
  for (double v : x.data) {
    if (!(v > 0.0)) {
      throw std::domain_error("log: non-positive input " + std::to_string(v));
    }
  }
  return unary_map(x, [](double v) { return std::log(v); });
}

Tensor t_sqrt(const Tensor& x) {
  for (double v : x.data) {
    if (v < 0.0) throw std::domain_error("sqrt: negative input " + std::to_string(v));
  }
  return unary_map(x, [](double v) { return std::sqrt(v); });
}

Tensor t_softplus(const Tensor& x) {
  return unary_map(x, [](double v) {
    // Stable ln(1 + e^v) on both tails.
    return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
  });
}

Tensor t_square(const Tensor& x) {
  return unary_map(x, [](double v) { return v * v; });
}

Tensor t_reciprocal(const Tensor& x) {
  for (double v : x.data) {
    if (v == 0.0) throw std::domain_error("reciprocal: zero input");
  }
  return unary_map(x, [](double v) { return 1.0 / v; });
}

Tensor t_clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo > hi");
  return unary_map(x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); });
}

Tensor t_scale(const Tensor& x, double c) {
  return unary_map(x, [c](double v) { return v * c; });
}

Tensor t_add_scalar(const Tensor& x, double c) {
  return unary_map(x, [c](double v) { return v + c; });
}

Tensor t_sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data) s += v;
  return Tensor::scalar(s);
}

Tensor t_mean(const Tensor& x) {
  return Tensor::scalar(t_sum(x).item() / static_cast<double>(x.size()));
}

Tensor t_sum_last(const Tensor& x) {
  if (x.rank() < 1) throw std::invalid_argument("sum_last: scalar input");
  const int64_t n = x.shape.back();
  std::vector<int64_t> os(x.shape.begin(), x.shape.end() - 1);
  Tensor out(os);
  for (int64_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < n; ++j) s += x.data[i * n + j];
    out.data[i] = s;
  }
  return out;
}

Tensor t_mean_rows(const Tensor& x) {
  if (x.rank() != 2) throw std::invalid_argument("mean_rows: expected rank-2 tensor");
  const int64_t r = x.shape[0], c = x.shape[1];
  Tensor out({c});
  for (int64_t i = 0; i < r; ++i) {
    for (int64_t j = 0; j < c; ++j) out.data[j] += x.data[i * c + j];
  }
  for (int64_t j = 0; j < c; ++j) out.data[j] /= static_cast<double>(r);
  return out;
}

Tensor t_softmax_last(const Tensor& x) {
  if (x.rank() < 1) throw std::invalid_argument("softmax_last: scalar input");
  const int64_t n = x.shape.back();
  const int64_t rows = x.size() / n;
  Tensor out(x.shape);
  for (int64_t i = 0; i < rows; ++i) {
    const double* in = x.data.data() + i * n;
    double* o = out.data.data() + i * n;
    double mx = in[0];
    for (int64_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
    double z = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (int64_t j = 0; j < n; ++j) o[j] /= z;
  }
  return out;
}

Tensor t_concat_last(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_last: no inputs");
  std::vector<int64_t> lead(parts[0]->shape.begin(), parts[0]->shape.end() - 1);
  int64_t total = 0;
  for (const Tensor* p : parts) {
    if (p->rank() < 1) throw std::invalid_argument("concat_last: scalar input");
    std::vector<int64_t> l(p->shape.begin(), p->shape.end() - 1);
    if (l != lead) {
      throw std::invalid_argument("concat_last: leading shapes differ: " +
                                  shape_str(parts[0]->shape) + " vs " + shape_str(p->shape));
    }
    total += p->shape.back();
  }
  std::vector<int64_t> os = lead;
  os.push_back(total);
  Tensor out(os);
  const int64_t groups = shape_product(lead);
  for (int64_t g = 0; g < groups; ++g) {
    int64_t off = 0;
    for (const Tensor* p : parts) {
      const int64_t n = p->shape.back();
      std::copy_n(p->data.data() + g * n, n, out.data.data() + g * total + off);
      off += n;
    }
  }
  return out;
}

Tensor t_slice_last(const Tensor& x, int64_t start, int64_t len) {
  if (x.rank() < 1) throw std::invalid_argument("slice_last: scalar input");
  const int64_t n = x.shape.back();
  if (start < 0 || len <= 0 || start + len > n) {
    throw std::invalid_argument("slice_last: range [" + std::to_string(start) + ", " +
                                std::to_string(start + len) + ") outside axis of size " +
                                std::to_string(n));
  }
  std::vector<int64_t> os(x.shape.begin(), x.shape.end() - 1);
  os.push_back(len);
  Tensor out(os);
  const int64_t groups = x.size() / n;
  for (int64_t g = 0; g < groups; ++g) {
    std::copy_n(x.data.data() + g * n + start, len, out.data.data() + g * len);
  }
  return out;
}

Tensor t_stack_rows(const std::vector<const Tensor*>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
  const int64_t c = rows[0]->size();
  for (const Tensor* r : rows) {
    if (r->rank() != 1 || r->size() != c) {
      throw std::invalid_argument("stack_rows: expected rank-1 rows of equal length");
    }
  }
  Tensor out({static_cast<int64_t>(rows.size()), c});
  for (size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(rows[i]->data.data(), c, out.data.data() + static_cast<int64_t>(i) * c);
  }
  return out;
}

Tensor t_row(const Tensor& x, int64_t i) {
  if (x.rank() != 2) throw std::invalid_argument("row: expected rank-2 tensor");
  if (i < 0 || i >= x.shape[0]) {
    throw std::invalid_argument("row: index " + std::to_string(i) + " outside " +
                                shape_str(x.shape));
  }
  const int64_t c = x.shape[1];
  Tensor out({c});
  std::copy_n(x.data.data() + i * c, c, out.data.data());
  return out;
}

Tensor t_reshape(const Tensor& x, std::vector<int64_t> shape) {
  if (shape_product(shape) != x.size()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape) + " as " +
                                shape_str(shape));
  }
  Tensor out;
  out.shape = std::move(shape);
  out.data = x.data;
  return out;
}

Tensor reduce_to_shape(const Tensor& g, const std::vector<int64_t>& target_shape) {
  if (g.shape == target_shape) return g;
  Tensor out(target_shape);
  BroadcastIndexer idx(g.shape, target_shape);
  for (int64_t i = 0; i < g.size(); ++i) out.data[idx.map(i)] += g.data[i];
  return out;
}

}  // namespace camp

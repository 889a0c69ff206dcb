#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace camp {

/// Dense row-major tensor of 64-bit floats. Rank 0 is a scalar holding one
/// value. product(shape) always equals data.size().
struct Tensor {
  std::vector<int64_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int64_t> s, double fill = 0.0);
  Tensor(std::vector<int64_t> s, std::vector<double> values);

  static Tensor scalar(double v);
  static Tensor zeros_like(const Tensor& t);

  int64_t size() const { return static_cast<int64_t>(data.size()); }
  int64_t rank() const { return static_cast<int64_t>(shape.size()); }
  bool is_scalar() const { return shape.empty(); }

  /// First/last axis extents for the 2-D fast paths.
  int64_t rows() const;
  int64_t cols() const;

  double item() const;  // value of a one-element tensor

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
};

std::string shape_str(const std::vector<int64_t>& shape);
int64_t shape_product(const std::vector<int64_t>& shape);

// ---------------------------------------------------------------------------
// Value-level kernels. These do the arithmetic for both the autodiff tape and
// the gradient-free inference paths, so the two never drift apart.
// ---------------------------------------------------------------------------

/// Shape of numpy-style broadcasting (axes aligned from the trailing end).
/// Throws std::invalid_argument when the shapes do not broadcast.
std::vector<int64_t> broadcast_shape(const std::vector<int64_t>& a,
                                     const std::vector<int64_t>& b);

Tensor t_add(const Tensor& a, const Tensor& b);
Tensor t_sub(const Tensor& a, const Tensor& b);
Tensor t_mul(const Tensor& a, const Tensor& b);
Tensor t_matmul(const Tensor& a, const Tensor& b);
Tensor t_transpose(const Tensor& a);

Tensor t_relu(const Tensor& x);
Tensor t_tanh(const Tensor& x);
Tensor t_exp(const Tensor& x);
Tensor t_log(const Tensor& x);  // throws on non-positive entries
Tensor t_sqrt(const Tensor& x);
Tensor t_softplus(const Tensor& x);
Tensor t_square(const Tensor& x);
Tensor t_reciprocal(const Tensor& x);  // throws on zero entries
Tensor t_clamp(const Tensor& x, double lo, double hi);

Tensor t_scale(const Tensor& x, double c);
Tensor t_add_scalar(const Tensor& x, double c);

Tensor t_sum(const Tensor& x);       // -> scalar
Tensor t_mean(const Tensor& x);      // -> scalar
Tensor t_sum_last(const Tensor& x);  // drop the last axis
Tensor t_mean_rows(const Tensor& x); // [r, c] -> [c]
Tensor t_softmax_last(const Tensor& x);

Tensor t_concat_last(const std::vector<const Tensor*>& parts);
Tensor t_slice_last(const Tensor& x, int64_t start, int64_t len);
Tensor t_stack_rows(const std::vector<const Tensor*>& rows);  // n x [c] -> [n, c]
Tensor t_row(const Tensor& x, int64_t i);                     // [r, c] -> [c]
Tensor t_reshape(const Tensor& x, std::vector<int64_t> shape);

/// Reduce `g` (shaped like the broadcast output) back onto `target_shape` by
/// summing over the broadcast axes. Used by the backward pass of add/mul.
Tensor reduce_to_shape(const Tensor& g, const std::vector<int64_t>& target_shape);

}  // namespace camp

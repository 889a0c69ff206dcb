#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "camp/tensor.hpp"

namespace camp {

using ParamId = int32_t;

/// Registry of named trainable tensors. Parameters outlive the per-step
/// tapes; a tape mounts them as leaves and the optimizer writes updates back.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor init);

  Tensor& value(ParamId id);
  const Tensor& value(ParamId id) const;
  const std::string& name(ParamId id) const;
  ParamId find(const std::string& name) const;  // -1 when absent

  int32_t count() const { return static_cast<int32_t>(values_.size()); }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

class Tape;

/// Handle to one node of a tape.
struct Var {
  int32_t id = -1;
  Tape* tape = nullptr;
  bool valid() const { return id >= 0 && tape != nullptr; }
};

/// Define-by-run reverse-mode tape. Built fresh every training step; node
/// order is construction order, which is already topological, so backward is
/// a single reverse sweep visiting each node exactly once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Var constant(Tensor t);
  Var param(ParamStore& store, ParamId id);        // gradient tracked
  Var frozen(const ParamStore& store, ParamId id); // stop-gradient mount

  // Arithmetic. Shapes follow the value kernels in tensor.hpp.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var matmul(Var a, Var b);
  Var transpose(Var a);

  Var relu(Var x);
  Var tanh(Var x);
  Var exp(Var x);
  Var log(Var x);
  Var sqrt(Var x);  // requires strictly positive input when differentiated
  Var softplus(Var x);
  Var square(Var x);
  Var reciprocal(Var x);
  Var clamp(Var x, double lo, double hi);

  Var scale(Var x, double c);
  Var add_scalar(Var x, double c);

  Var sum(Var x);
  Var mean(Var x);
  Var sum_last(Var x);
  Var mean_rows(Var x);
  Var softmax_last(Var x);

  Var concat_last(const std::vector<Var>& parts);
  Var slice_last(Var x, int64_t start, int64_t len);
  Var stack_rows(const std::vector<Var>& rows);
  Var stack_scalars(const std::vector<Var>& scalars);  // n scalars -> [n]
  Var row(Var x, int64_t i);
  Var reshape(Var x, std::vector<int64_t> shape);

  // Composites.
  Var mse(Var a, Var b);                 // mean((a - b)^2)
  Var linear(Var x, Var w, Var bias);    // x @ w + bias

  /// Reverse sweep from a scalar loss. May be called once per tape.
  void backward(Var loss);

  const Tensor& val(Var v) const;

  /// Gradient of the loss w.r.t. a gradient-tracking node; zero tensor when
  /// the loss never touched it. Throws for non-tracking nodes.
  Tensor grad(Var v) const;

  /// (id, gradient) for every parameter of `store` mounted on this tape.
  /// Parameters the loss does not reach get zero gradients.
  std::vector<std::pair<ParamId, Tensor>> grads_for(const ParamStore& store) const;

  bool empty() const { return nodes_.empty(); }
  int64_t node_count() const { return static_cast<int64_t>(nodes_.size()); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on first contribution
    bool requires_grad = false;
    std::function<void(Tape&)> backprop;  // empty for leaves
    const ParamStore* store = nullptr;
    ParamId pid = -1;
  };

  std::vector<Node> nodes_;
  std::map<std::pair<const ParamStore*, ParamId>, int32_t> mounted_;
  bool backward_done_ = false;

  Var emit(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop);
  Var check(Var v, const char* op) const;
  void accumulate(int32_t id, const Tensor& g);
  const Tensor& node_val(int32_t id) const { return nodes_[id].value; }
  bool tracks(Var v) const { return nodes_[v.id].requires_grad; }
};

}  // namespace camp

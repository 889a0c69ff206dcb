#include "camp/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace camp {

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

ParamId ParamStore::add(std::string name, Tensor init) {
  if (find(name) >= 0) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return static_cast<ParamId>(values_.size() - 1);
}

Tensor& ParamStore::value(ParamId id) { return values_.at(static_cast<size_t>(id)); }
const Tensor& ParamStore::value(ParamId id) const { return values_.at(static_cast<size_t>(id)); }
const std::string& ParamStore::name(ParamId id) const { return names_.at(static_cast<size_t>(id)); }

ParamId ParamStore::find(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<ParamId>(i);
  }
  return -1;
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Var Tape::emit(Tensor value, bool requires_grad, std::function<void(Tape&)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1), this};
}

Var Tape::check(Var v, const char* op) const {
  if (!v.valid() || v.tape != this || v.id >= static_cast<int32_t>(nodes_.size())) {
    throw std::invalid_argument(std::string(op) + ": variable does not belong to this tape");
  }
  return v;
}

void Tape::accumulate(int32_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
  for (int64_t i = 0; i < g.size(); ++i) n.grad.data[i] += g.data[i];
}

Var Tape::constant(Tensor t) { return emit(std::move(t), false, {}); }

Var Tape::param(ParamStore& store, ParamId id) {
  const auto key = std::make_pair(static_cast<const ParamStore*>(&store), id);
  auto it = mounted_.find(key);
  if (it != mounted_.end()) return Var{it->second, this};
  Var v = emit(store.value(id), true, {});
  nodes_[v.id].store = &store;
  nodes_[v.id].pid = id;
  mounted_[key] = v.id;
  return v;
}

Var Tape::frozen(const ParamStore& store, ParamId id) { return constant(store.value(id)); }

// Each op computes its value through the shared kernels in tensor.hpp, then
// (when some input tracks gradients) registers a closure over node ids. The
// node vector may reallocate while the graph grows, so closures read values
// through the tape at run time, never through captured references. `oid` is
// the op's own output node; its grad seeds the parents' contributions.

namespace {
// 1 where the input value survives relu / lies inside the clamp range.
Tensor mask_mul(const Tensor& g, const Tensor& x, double lo, double hi) {
  Tensor out(g.shape);
  for (int64_t i = 0; i < g.size(); ++i) {
    out.data[i] = (x.data[i] >= lo && x.data[i] <= hi) ? g.data[i] : 0.0;
  }
  return out;
}
}  // namespace

Var Tape::add(Var a, Var b) {
  check(a, "add");
  check(b, "add");
  Tensor out = t_add(nodes_[a.id].value, nodes_[b.id].value);
  const bool rg = tracks(a) || tracks(b);
  if (!rg) return emit(std::move(out), false, {});
  const int32_t ia = a.id, ib = b.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ia, ib, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    t.accumulate(ia, reduce_to_shape(g, t.nodes_[ia].value.shape));
    t.accumulate(ib, reduce_to_shape(g, t.nodes_[ib].value.shape));
  };
  return v;
}

Var Tape::sub(Var a, Var b) {
  check(a, "sub");
  check(b, "sub");
  Tensor out = t_sub(nodes_[a.id].value, nodes_[b.id].value);
  const bool rg = tracks(a) || tracks(b);
  if (!rg) return emit(std::move(out), false, {});
  const int32_t ia = a.id, ib = b.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ia, ib, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    t.accumulate(ia, reduce_to_shape(g, t.nodes_[ia].value.shape));
    t.accumulate(ib, t_scale(reduce_to_shape(g, t.nodes_[ib].value.shape), -1.0));
  };
  return v;
}

Var Tape::mul(Var a, Var b) {
  check(a, "mul");
  check(b, "mul");
  Tensor out = t_mul(nodes_[a.id].value, nodes_[b.id].value);
  const bool rg = tracks(a) || tracks(b);
  if (!rg) return emit(std::move(out), false, {});
  const int32_t ia = a.id, ib = b.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ia, ib, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    if (t.nodes_[ia].requires_grad) {
      t.accumulate(ia, reduce_to_shape(t_mul(g, t.nodes_[ib].value), t.nodes_[ia].value.shape));
    }
    if (t.nodes_[ib].requires_grad) {
      t.accumulate(ib, reduce_to_shape(t_mul(g, t.nodes_[ia].value), t.nodes_[ib].value.shape));
    }
  };
  return v;
}

Var Tape::matmul(Var a, Var b) {
  check(a, "matmul");
  check(b, "matmul");
  Tensor out = t_matmul(nodes_[a.id].value, nodes_[b.id].value);
  const bool rg = tracks(a) || tracks(b);
  if (!rg) return emit(std::move(out), false, {});
  const int32_t ia = a.id, ib = b.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ia, ib, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    if (t.nodes_[ia].requires_grad) {
      t.accumulate(ia, t_matmul(g, t_transpose(t.nodes_[ib].value)));
    }
    if (t.nodes_[ib].requires_grad) {
      t.accumulate(ib, t_matmul(t_transpose(t.nodes_[ia].value), g));
    }
  };
  return v;
}

Var Tape::transpose(Var a) {
  check(a, "transpose");
  Tensor out = t_transpose(nodes_[a.id].value);
  if (!tracks(a)) return emit(std::move(out), false, {});
  const int32_t ia = a.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ia, oid](Tape& t) {
    t.accumulate(ia, t_transpose(t.nodes_[oid].grad));
  };
  return v;
}

Var Tape::relu(Var x) {
  check(x, "relu");
  Tensor out = t_relu(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& in = t.nodes_[ix].value;
    Tensor d(g.shape);
    for (int64_t i = 0; i < g.size(); ++i) d.data[i] = in.data[i] > 0.0 ? g.data[i] : 0.0;
    t.accumulate(ix, d);
  };
  return v;
}

Var Tape::tanh(Var x) {
  check(x, "tanh");
  Tensor out = t_tanh(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& y = t.nodes_[oid].value;
    Tensor d(g.shape);
    for (int64_t i = 0; i < g.size(); ++i) d.data[i] = g.data[i] * (1.0 - y.data[i] * y.data[i]);
    t.accumulate(ix, d);
  };
  return v;
}

Var Tape::exp(Var x) {
  check(x, "exp");
  Tensor out = t_exp(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    t.accumulate(ix, t_mul(t.nodes_[oid].grad, t.nodes_[oid].value));
  };
  return v;
}

Var Tape::log(Var x) {
  check(x, "log");
  Tensor out = t_log(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    t.accumulate(ix, t_mul(t.nodes_[oid].grad, t_reciprocal(t.nodes_[ix].value)));
  };
  return v;
}

Var Tape::sqrt(Var x) {
  check(x, "sqrt");
  if (tracks(x)) {
    for (double v : nodes_[x.id].value.data) {
      if (!(v > 0.0)) {
        throw std::domain_error("sqrt: differentiated input must be strictly positive");
      }
    }
  }
  Tensor out = t_sqrt(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& y = t.nodes_[oid].value;
    Tensor d(g.shape);
    for (int64_t i = 0; i < g.size(); ++i) d.data[i] = g.data[i] / (2.0 * y.data[i]);
    t.accumulate(ix, d);
  };
  return v;
}

Var Tape::softplus(Var x) {
  check(x, "softplus");
  Tensor out = t_softplus(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& in = t.nodes_[ix].value;
    Tensor d(g.shape);
    for (int64_t i = 0; i < g.size(); ++i) {
      d.data[i] = g.data[i] / (1.0 + std::exp(-in.data[i]));
    }
    t.accumulate(ix, d);
  };
  return v;
}

Var Tape::square(Var x) {
  check(x, "square");
  Tensor out = t_square(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& in = t.nodes_[ix].value;
    Tensor d(g.shape);
    for (int64_t i = 0; i < g.size(); ++i) d.data[i] = 2.0 * in.data[i] * g.data[i];
    t.accumulate(ix, d);
  };
  return v;
}

Var Tape::reciprocal(Var x) {
  check(x, "reciprocal");
  Tensor out = t_reciprocal(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& y = t.nodes_[oid].value;
    Tensor d(g.shape);
    for (int64_t i = 0; i < g.size(); ++i) d.data[i] = -g.data[i] * y.data[i] * y.data[i];
    t.accumulate(ix, d);
  };
  return v;
}

Var Tape::clamp(Var x, double lo, double hi) {
  check(x, "clamp");
  Tensor out = t_clamp(nodes_[x.id].value, lo, hi);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid, lo, hi](Tape& t) {
    t.accumulate(ix, mask_mul(t.nodes_[oid].grad, t.nodes_[ix].value, lo, hi));
  };
  return v;
}

Var Tape::scale(Var x, double c) {
  check(x, "scale");
  Tensor out = t_scale(nodes_[x.id].value, c);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid, c](Tape& t) {
    t.accumulate(ix, t_scale(t.nodes_[oid].grad, c));
  };
  return v;
}

Var Tape::add_scalar(Var x, double c) {
  check(x, "add_scalar");
  Tensor out = t_add_scalar(nodes_[x.id].value, c);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) { t.accumulate(ix, t.nodes_[oid].grad); };
  return v;
}

Var Tape::sum(Var x) {
  check(x, "sum");
  Tensor out = t_sum(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    t.accumulate(ix, Tensor(t.nodes_[ix].value.shape, t.nodes_[oid].grad.item()));
  };
  return v;
}

Var Tape::mean(Var x) {
  check(x, "mean");
  Tensor out = t_mean(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  const double inv_n = 1.0 / static_cast<double>(nodes_[x.id].value.size());
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid, inv_n](Tape& t) {
    t.accumulate(ix, Tensor(t.nodes_[ix].value.shape, t.nodes_[oid].grad.item() * inv_n));
  };
  return v;
}

Var Tape::sum_last(Var x) {
  check(x, "sum_last");
  Tensor out = t_sum_last(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& in = t.nodes_[ix].value;
    const int64_t n = in.shape.back();
    Tensor d(in.shape);
    for (int64_t i = 0; i < g.size(); ++i) {
      for (int64_t j = 0; j < n; ++j) d.data[i * n + j] = g.data[i];
    }
    t.accumulate(ix, d);
  };
  return v;
}

Var Tape::mean_rows(Var x) {
  check(x, "mean_rows");
  Tensor out = t_mean_rows(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& in = t.nodes_[ix].value;
    const int64_t r = in.shape[0], c = in.shape[1];
    Tensor d(in.shape);
    for (int64_t i = 0; i < r; ++i) {
      for (int64_t j = 0; j < c; ++j) d.data[i * c + j] = g.data[j] / static_cast<double>(r);
    }
    t.accumulate(ix, d);
  };
  return v;
}

Var Tape::softmax_last(Var x) {
  check(x, "softmax_last");
  Tensor out = t_softmax_last(nodes_[x.id].value);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& y = t.nodes_[oid].value;
    const int64_t n = y.shape.back();
    const int64_t rows = y.size() / n;
    Tensor d(y.shape);
    for (int64_t i = 0; i < rows; ++i) {
      const double* gy = g.data.data() + i * n;
      const double* yy = y.data.data() + i * n;
      double dot = 0.0;
      for (int64_t j = 0; j < n; ++j) dot += gy[j] * yy[j];
      for (int64_t j = 0; j < n; ++j) d.data[i * n + j] = yy[j] * (gy[j] - dot);
    }
    t.accumulate(ix, d);
  };
  return v;
}

Var Tape::concat_last(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_last: no inputs");
  std::vector<const Tensor*> vals;
  bool rg = false;
  std::vector<int32_t> ids;
  for (Var p : parts) {
    check(p, "concat_last");
    vals.push_back(&nodes_[p.id].value);
    rg |= tracks(p);
    ids.push_back(p.id);
  }
  Tensor out = t_concat_last(vals);
  if (!rg) return emit(std::move(out), false, {});
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ids, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    int64_t off = 0;
    for (int32_t id : ids) {
      const int64_t n = t.nodes_[id].value.shape.back();
      t.accumulate(id, t_slice_last(g, off, n));
      off += n;
    }
  };
  return v;
}

Var Tape::slice_last(Var x, int64_t start, int64_t len) {
  check(x, "slice_last");
  Tensor out = t_slice_last(nodes_[x.id].value, start, len);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid, start, len](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& in = t.nodes_[ix].value;
    const int64_t n = in.shape.back();
    Tensor d(in.shape);
    const int64_t groups = in.size() / n;
    for (int64_t gr = 0; gr < groups; ++gr) {
      for (int64_t j = 0; j < len; ++j) d.data[gr * n + start + j] = g.data[gr * len + j];
    }
    t.accumulate(ix, d);
  };
  return v;
}

Var Tape::stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no inputs");
  std::vector<const Tensor*> vals;
  bool rg = false;
  std::vector<int32_t> ids;
  for (Var r : rows) {
    check(r, "stack_rows");
    vals.push_back(&nodes_[r.id].value);
    rg |= tracks(r);
    ids.push_back(r.id);
  }
  Tensor out = t_stack_rows(vals);
  if (!rg) return emit(std::move(out), false, {});
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ids, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const int64_t c = g.shape[1];
    for (size_t i = 0; i < ids.size(); ++i) {
      Tensor d({c});
      std::copy_n(g.data.data() + static_cast<int64_t>(i) * c, c, d.data.data());
      t.accumulate(ids[i], d);
    }
  };
  return v;
}

Var Tape::stack_scalars(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw std::invalid_argument("stack_scalars: no inputs");
  Tensor out({static_cast<int64_t>(scalars.size())});
  bool rg = false;
  std::vector<int32_t> ids;
  for (size_t i = 0; i < scalars.size(); ++i) {
    check(scalars[i], "stack_scalars");
    const Tensor& v = nodes_[scalars[i].id].value;
    if (v.size() != 1) {
      throw std::invalid_argument("stack_scalars: input " + std::to_string(i) +
                                  " has shape " + shape_str(v.shape));
    }
    out.data[i] = v.data[0];
    rg |= tracks(scalars[i]);
    ids.push_back(scalars[i].id);
  }
  if (!rg) return emit(std::move(out), false, {});
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ids, oid](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    for (size_t i = 0; i < ids.size(); ++i) {
      Tensor d(t.nodes_[ids[i]].value.shape, g.data[i]);
      t.accumulate(ids[i], d);
    }
  };
  return v;
}

Var Tape::row(Var x, int64_t i) {
  check(x, "row");
  Tensor out = t_row(nodes_[x.id].value, i);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid, i](Tape& t) {
    const Tensor& g = t.nodes_[oid].grad;
    const Tensor& in = t.nodes_[ix].value;
    Tensor d(in.shape);
    std::copy_n(g.data.data(), g.size(), d.data.data() + i * in.shape[1]);
    t.accumulate(ix, d);
  };
  return v;
}

Var Tape::reshape(Var x, std::vector<int64_t> shape) {
  check(x, "reshape");
  Tensor out = t_reshape(nodes_[x.id].value, shape);
  if (!tracks(x)) return emit(std::move(out), false, {});
  const int32_t ix = x.id;
  Var v = emit(std::move(out), true, {});
  const int32_t oid = v.id;
  nodes_[oid].backprop = [ix, oid](Tape& t) {
    t.accumulate(ix, t_reshape(t.nodes_[oid].grad, t.nodes_[ix].value.shape));
  };
  return v;
}

Var Tape::mse(Var a, Var b) { return mean(square(sub(a, b))); }

Var Tape::linear(Var x, Var w, Var bias) { return add(matmul(x, w), bias); }

void Tape::backward(Var loss) {
  if (nodes_.empty()) throw std::runtime_error("backward: empty tape");
  check(loss, "backward");
  if (backward_done_) throw std::runtime_error("backward: already run on this tape");
  const Node& ln = nodes_[loss.id];
  if (ln.value.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(ln.value.shape));
  }
  backward_done_ = true;
  nodes_[loss.id].grad = Tensor(ln.value.shape, 1.0);
  for (int32_t i = loss.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.requires_grad && !n.grad.data.empty() && n.backprop) n.backprop(*this);
  }
}

const Tensor& Tape::val(Var v) const {
  check(v, "val");
  return nodes_[v.id].value;
}

Tensor Tape::grad(Var v) const {
  check(v, "grad");
  const Node& n = nodes_[v.id];
  if (!n.requires_grad) {
    throw std::invalid_argument("grad: variable does not track gradients");
  }
  if (n.grad.data.empty()) return Tensor(n.value.shape);
  return n.grad;
}

std::vector<std::pair<ParamId, Tensor>> Tape::grads_for(const ParamStore& store) const {
  std::vector<std::pair<ParamId, Tensor>> out;
  for (const auto& [key, id] : mounted_) {
    if (key.first != &store) continue;
    const Node& n = nodes_[id];
    out.emplace_back(key.second, n.grad.data.empty() ? Tensor(n.value.shape) : n.grad);
  }
  return out;
}

}  // namespace camp

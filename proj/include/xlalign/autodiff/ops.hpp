#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "xlalign/autodiff/graph.hpp"
#include "xlalign/autodiff/kernels.hpp"

namespace xlalign::ad {

namespace detail {

[[noreturn]] inline void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ValidationError(std::string("op '") + op + "': shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

template <class T>
inline void same_shape(const char* op, const Var<T>& a, const Var<T>& b) {
  if (a.graph != b.graph) throw ContractError(std::string("op '") + op + "': operands from different graphs");
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

template <class T>
inline T stable_sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <class T>
inline T stable_softplus(T x) {
  return std::max(x, T{0}) + std::log1p(std::exp(-std::abs(x)));
}

/// Elementwise unary op with derivative expressed through (x, y).
template <class T, class F, class D>
inline Var<T> unary(Var<T> a, F f, D dfdx, const char* name) {
  Graph<T>& g = *a.graph;
  Tensor<T> out(a.shape());
  const auto& x = a.value();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  const std::size_t ai = a.id;
  std::size_t oi = g.size();
  return g.op(std::move(out), {a}, [&g, ai, oi, dfdx] {
    const auto& xv = g.value(ai);
    const auto& yv = g.value(oi);
    const auto& go = g.grad(oi);
    auto& ga = g.grad(ai);
    for (std::size_t i = 0; i < xv.size(); ++i) ga[i] += go[i] * dfdx(xv[i], yv[i]);
  }, name);
}

}  // namespace detail

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::same_shape("add", a, b);
  Graph<T>& g = *a.graph;
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ai = a.id, bi = b.id, oi = g.size();
  return g.op(std::move(out), {a, b}, [&g, ai, bi, oi] {
    const auto& go = g.grad(oi);
    for (std::size_t id : {ai, bi}) {
      if (!g.requires_grad(id)) continue;
      auto& gx = g.grad(id);
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    }
  }, "add");
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::same_shape("sub", a, b);
  Graph<T>& g = *a.graph;
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ai = a.id, bi = b.id, oi = g.size();
  return g.op(std::move(out), {a, b}, [&g, ai, bi, oi] {
    const auto& go = g.grad(oi);
    if (g.requires_grad(ai)) {
      auto& gx = g.grad(ai);
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    }
    if (g.requires_grad(bi)) {
      auto& gx = g.grad(bi);
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] -= go[i];
    }
  }, "sub");
}

/// Elementwise product.
template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::same_shape("mul", a, b);
  Graph<T>& g = *a.graph;
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ai = a.id, bi = b.id, oi = g.size();
  return g.op(std::move(out), {a, b}, [&g, ai, bi, oi] {
    const auto& go = g.grad(oi);
    const auto& av = g.value(ai);
    const auto& bv = g.value(bi);
    if (g.requires_grad(ai)) {
      auto& gx = g.grad(ai);
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * bv[i];
    }
    if (g.requires_grad(bi)) {
      auto& gx = g.grad(bi);
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * av[i];
    }
  }, "mul");
}

template <class T>
Var<T> scale(Var<T> a, T c) {
  return detail::unary(a, [c](T x) { return x * c; }, [c](T, T) { return c; }, "scale");
}

template <class T>
Var<T> add_scalar(Var<T> a, T c) {
  return detail::unary(a, [c](T x) { return x + c; }, [](T, T) { return T{1}; }, "add_scalar");
}

template <class T>
Var<T> relu(Var<T> a) {
  return detail::unary(a, [](T x) { return x > T{0} ? x : T{0}; }, [](T x, T) { return x > T{0} ? T{1} : T{0}; },
                       "relu");
}

template <class T>
Var<T> tanh(Var<T> a) {
  return detail::unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T{1} - y * y; }, "tanh");
}

template <class T>
Var<T> exp(Var<T> a) {
  return detail::unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; }, "exp");
}

/// Logistic function.
template <class T>
Var<T> sigmoid(Var<T> a) {
  return detail::unary(a, [](T x) { return detail::stable_sigmoid(x); }, [](T, T y) { return y * (T{1} - y); },
                       "sigmoid");
}

template <class T>
Var<T> softplus(Var<T> a) {
  return detail::unary(a, [](T x) { return detail::stable_softplus(x); },
                       [](T x, T) { return detail::stable_sigmoid(x); }, "softplus");
}

/// log σ(x) computed as −softplus(−x).
template <class T>
Var<T> log_sigmoid(Var<T> a) {
  return detail::unary(a, [](T x) { return -detail::stable_softplus(-x); },
                       [](T x, T) { return detail::stable_sigmoid(-x); }, "log_sigmoid");
}

/// Clamp to [lo, hi]; gradient passes only inside the interval.
template <class T>
Var<T> clamp(Var<T> a, T lo, T hi) {
  return detail::unary(a, [lo, hi](T x) { return std::clamp(x, lo, hi); },
                       [lo, hi](T x, T) { return (x >= lo && x <= hi) ? T{1} : T{0}; }, "clamp");
}

/// Elementwise minimum; ties send the gradient to `a`.
template <class T>
Var<T> minimum(Var<T> a, Var<T> b) {
  detail::same_shape("minimum", a, b);
  Graph<T>& g = *a.graph;
  Tensor<T> out(a.shape());
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(av[i], bv[i]);
  const std::size_t ai = a.id, bi = b.id, oi = g.size();
  return g.op(std::move(out), {a, b}, [&g, ai, bi, oi] {
    const auto& go = g.grad(oi);
    const auto& av = g.value(ai);
    const auto& bv = g.value(bi);
    for (std::size_t i = 0; i < go.size(); ++i) {
      const bool to_a = av[i] <= bv[i];
      const std::size_t id = to_a ? ai : bi;
      if (g.requires_grad(id)) g.grad(id)[i] += go[i];
    }
  }, "minimum");
}

template <class T>
Var<T> sum(Var<T> a) {
  Graph<T>& g = *a.graph;
  T s{0};
  for (T x : a.value().values()) s += x;
  const std::size_t ai = a.id, oi = g.size();
  return g.op(Tensor<T>::scalar(s), {a}, [&g, ai, oi] {
    const T go = g.grad(oi)[0];
    auto& ga = g.grad(ai);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go;
  }, "sum");
}

template <class T>
Var<T> mean(Var<T> a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ValidationError("op 'mean': empty tensor");
  return scale(sum(a), T{1} / static_cast<T>(n));
}

/// Adds a length-d vector to every row of an [N, d] tensor.
template <class T>
Var<T> add_row(Var<T> a, Var<T> b) {
  const std::size_t d = a.value().cols();
  if (b.value().size() != d) detail::shape_error("add_row", a.shape(), b.shape());
  Graph<T>& g = *a.graph;
  Tensor<T> out = a.value();
  const auto& bv = b.value();
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) out.at(r, c) += bv[c];
  const std::size_t ai = a.id, bi = b.id, oi = g.size();
  return g.op(std::move(out), {a, b}, [&g, ai, bi, oi, d] {
    const auto& go = g.grad(oi);
    if (g.requires_grad(ai)) {
      auto& ga = g.grad(ai);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    }
    if (g.requires_grad(bi)) {
      auto& gb = g.grad(bi);
      for (std::size_t r = 0; r < go.rows(); ++r)
        for (std::size_t c = 0; c < d; ++c) gb[c] += go.at(r, c);
    }
  }, "add_row");
}

/// [N, k] x [k, m] -> [N, m].
template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (bv.shape().size() != 2 || av.cols() != bv.shape()[0]) detail::shape_error("matmul", av.shape(), bv.shape());
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  Graph<T>& g = *a.graph;
  Tensor<T> out(Shape{n, m});
  for (std::size_t i = 0; i < n; ++i) kernels::matvec_row(av.data() + i * k, bv.data(), out.data() + i * m, k, m);
  const std::size_t ai = a.id, bi = b.id, oi = g.size();
  return g.op(std::move(out), {a, b}, [&g, ai, bi, oi, n, k, m] {
    const auto& go = g.grad(oi);
    const auto& av = g.value(ai);
    const auto& bv = g.value(bi);
    if (g.requires_grad(ai)) {
      std::vector<T> bt(m * k);
      for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < m; ++j) bt[j * k + p] = bv[p * m + j];
      auto& ga = g.grad(ai);
      for (std::size_t i = 0; i < n; ++i)
        kernels::matvec_row(go.data() + i * m, bt.data(), ga.data() + i * k, m, k, true);
    }
    if (g.requires_grad(bi)) {
      auto& gb = g.grad(bi);
      for (std::size_t i = 0; i < n; ++i) {
        const T* grow = go.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const T x = av[i * k + p];
          if (x == T{0}) continue;
          T* brow = gb.data() + p * m;
          for (std::size_t j = 0; j < m; ++j) brow[j] += x * grow[j];
        }
      }
    }
  }, "matmul");
}

/// Stacks tensors with equal column counts along rows.
template <class T>
Var<T> concat(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ValidationError("op 'concat': no inputs");
  const std::size_t d = parts[0].value().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.value().cols() != d) detail::shape_error("concat", parts[0].shape(), p.shape());
    rows += p.value().rows();
  }
  Graph<T>& g = *parts[0].graph;
  const bool flat = parts[0].shape().size() == 1;
  Tensor<T> out(flat ? Shape{rows * d} : Shape{rows, d});
  std::size_t off = 0;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off);
    off += p.value().size();
    ids.push_back(p.id);
  }
  const std::size_t oi = g.size();
  return g.op(std::move(out), parts, [&g, ids, oi] {
    const auto& go = g.grad(oi);
    std::size_t off = 0;
    for (std::size_t id : ids) {
      const std::size_t n = g.value(id).size();
      if (g.requires_grad(id)) {
        auto& gx = g.grad(id);
        for (std::size_t i = 0; i < n; ++i) gx[i] += go[off + i];
      }
      off += n;
    }
  }, "concat");
}

/// Rows of `table` selected by `ids`.
template <class T>
Var<T> embedding(Var<T> table, std::vector<int> ids) {
  const auto& tv = table.value();
  const std::size_t v = tv.rows(), d = tv.cols();
  Tensor<T> out(Shape{ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
      throw ValidationError("op 'embedding': id " + std::to_string(ids[i]) + " out of range for table " +
                            shape_str(tv.shape()));
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
  }
  Graph<T>& g = *table.graph;
  const std::size_t ti = table.id, oi = g.size();
  return g.op(std::move(out), {table}, [&g, ti, oi, ids = std::move(ids), d] {
    const auto& go = g.grad(oi);
    auto& gt = g.grad(ti);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      T* dst = gt.data() + static_cast<std::size_t>(ids[i]) * d;
      const T* src = go.data() + i * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
  }, "embedding");
}

template <class T>
Var<T> gather_rows(Var<T> a, std::vector<std::size_t> rows) {
  const auto& av = a.value();
  const std::size_t d = av.cols();
  Tensor<T> out(Shape{rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) throw ValidationError("op 'gather_rows': row index out of range");
    std::copy_n(av.data() + rows[i] * d, d, out.data() + i * d);
  }
  Graph<T>& g = *a.graph;
  const std::size_t ai = a.id, oi = g.size();
  return g.op(std::move(out), {a}, [&g, ai, oi, rows = std::move(rows), d] {
    const auto& go = g.grad(oi);
    auto& ga = g.grad(ai);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < d; ++c) ga[rows[i] * d + c] += go[i * d + c];
  }, "gather_rows");
}

/// Row-wise softmax with max subtraction.
/// Flat range [begin, end) of a, as a vector.
template <class T>
Var<T> slice(Var<T> a, std::size_t begin, std::size_t end) {
  const auto& av = a.value();
  if (begin > end || end > av.size())
    throw ValidationError("op 'slice': range [" + std::to_string(begin) + "," + std::to_string(end) +
                          ") out of bounds for shape " + shape_str(av.shape()));
  Tensor<T> out(Shape{end - begin});
  std::copy(av.data() + begin, av.data() + end, out.data());
  Graph<T>& g = *a.graph;
  const std::size_t ai = a.id, oi = g.size();
  return g.op(std::move(out), {a},
              [&g, ai, oi, begin] {
                const auto& go = g.grad(oi);
                auto& ga = g.grad(ai);
                for (std::size_t i = 0; i < go.size(); ++i) ga[begin + i] += go[i];
              },
              "slice");
}

template <class T>
Var<T> softmax(Var<T> a) {
  const auto& av = a.value();
  const std::size_t n = av.rows(), d = av.cols();
  Tensor<T> out(av.shape());
  for (std::size_t r = 0; r < n; ++r) kernels::softmax_row(av.data() + r * d, out.data() + r * d, d);
  Graph<T>& g = *a.graph;
  const std::size_t ai = a.id, oi = g.size();
  return g.op(std::move(out), {a}, [&g, ai, oi, n, d] {
    const auto& y = g.value(oi);
    const auto& go = g.grad(oi);
    auto& ga = g.grad(ai);
    for (std::size_t r = 0; r < n; ++r) {
      const T s = kernels::dot(go.data() + r * d, y.data() + r * d, d);
      for (std::size_t c = 0; c < d; ++c) ga[r * d + c] += y[r * d + c] * (go[r * d + c] - s);
    }
  }, "softmax");
}

/// Row-wise log-softmax with max subtraction.
template <class T>
Var<T> log_softmax(Var<T> a) {
  const auto& av = a.value();
  const std::size_t n = av.rows(), d = av.cols();
  Tensor<T> out(av.shape());
  for (std::size_t r = 0; r < n; ++r) kernels::log_softmax_row(av.data() + r * d, out.data() + r * d, d);
  Graph<T>& g = *a.graph;
  const std::size_t ai = a.id, oi = g.size();
  return g.op(std::move(out), {a}, [&g, ai, oi, n, d] {
    const auto& y = g.value(oi);
    const auto& go = g.grad(oi);
    auto& ga = g.grad(ai);
    for (std::size_t r = 0; r < n; ++r) {
      T s{0};
      for (std::size_t c = 0; c < d; ++c) s += go[r * d + c];
      for (std::size_t c = 0; c < d; ++c) ga[r * d + c] += go[r * d + c] - std::exp(y[r * d + c]) * s;
    }
  }, "log_softmax");
}

/// out[i] = a[i, targets[i]].
template <class T>
Var<T> pick(Var<T> a, std::vector<int> targets) {
  const auto& av = a.value();
  const std::size_t d = av.cols();
  if (targets.size() != av.rows()) throw ValidationError("op 'pick': target count does not match rows");
  Tensor<T> out(Shape{targets.size()});
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= d)
      throw ValidationError("op 'pick': target out of range");
    out[i] = av[i * d + static_cast<std::size_t>(targets[i])];
  }
  Graph<T>& g = *a.graph;
  const std::size_t ai = a.id, oi = g.size();
  return g.op(std::move(out), {a}, [&g, ai, oi, targets = std::move(targets), d] {
    const auto& go = g.grad(oi);
    auto& ga = g.grad(ai);
    for (std::size_t i = 0; i < targets.size(); ++i) ga[i * d + static_cast<std::size_t>(targets[i])] += go[i];
  }, "pick");
}

/// Sums consecutive runs of a flat tensor; lengths must cover it exactly.
template <class T>
Var<T> segment_sum(Var<T> a, std::vector<std::size_t> lengths) {
  const auto& av = a.value();
  std::size_t total = 0;
  for (auto l : lengths) total += l;
  if (total != av.size()) throw ValidationError("op 'segment_sum': segment lengths do not cover input");
  Tensor<T> out(Shape{lengths.size()});
  std::size_t off = 0;
  for (std::size_t s = 0; s < lengths.size(); ++s) {
    T acc{0};
    for (std::size_t i = 0; i < lengths[s]; ++i) acc += av[off + i];
    out[s] = acc;
    off += lengths[s];
  }
  Graph<T>& g = *a.graph;
  const std::size_t ai = a.id, oi = g.size();
  return g.op(std::move(out), {a}, [&g, ai, oi, lengths = std::move(lengths)] {
    const auto& go = g.grad(oi);
    auto& ga = g.grad(ai);
    std::size_t off = 0;
    for (std::size_t s = 0; s < lengths.size(); ++s) {
      for (std::size_t i = 0; i < lengths[s]; ++i) ga[off + i] += go[s];
      off += lengths[s];
    }
  }, "segment_sum");
}

/// Mean over rows of −log_softmax(logits)[target].
template <class T>
Var<T> cross_entropy(Var<T> logits, std::vector<int> targets) {
  if (targets.empty()) throw ValidationError("op 'cross_entropy': no targets");
  return scale(sum(pick(log_softmax(logits), std::move(targets))), T{-1} / static_cast<T>(logits.value().rows()));
}

/// Row-wise RMS normalization with a learned gain.
template <class T>
Var<T> rmsnorm(Var<T> a, Var<T> gain, T eps = T(1e-5)) {
  const auto& av = a.value();
  const std::size_t n = av.rows(), d = av.cols();
  if (gain.value().size() != d) detail::shape_error("rmsnorm", av.shape(), gain.shape());
  Tensor<T> out(av.shape());
  std::vector<T> inv(n);
  for (std::size_t r = 0; r < n; ++r)
    inv[r] = kernels::rmsnorm_row(av.data() + r * d, gain.value().data(), out.data() + r * d, d, eps);
  Graph<T>& g = *a.graph;
  const std::size_t ai = a.id, gi = gain.id, oi = g.size();
  return g.op(std::move(out), {a, gain}, [&g, ai, gi, oi, n, d, inv = std::move(inv)] {
    const auto& x = g.value(ai);
    const auto& gv = g.value(gi);
    const auto& go = g.grad(oi);
    if (g.requires_grad(gi)) {
      auto& gg = g.grad(gi);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) gg[c] += go[r * d + c] * x[r * d + c] * inv[r];
    }
    if (g.requires_grad(ai)) {
      auto& ga = g.grad(ai);
      for (std::size_t r = 0; r < n; ++r) {
        // dy/dx = inv * (g*go - x * inv^2 * mean(g*go*x))
        T s{0};
        for (std::size_t c = 0; c < d; ++c) s += go[r * d + c] * gv[c] * x[r * d + c];
        const T k = inv[r] * inv[r] * s / static_cast<T>(d);
        for (std::size_t c = 0; c < d; ++c)
          ga[r * d + c] += inv[r] * (go[r * d + c] * gv[c] - x[r * d + c] * k);
      }
    }
  }, "rmsnorm");
}

/// Multi-head causal self-attention over packed sequences. q, k, v are
/// [N, D]; `lengths` partitions the N rows into independent sequences and
/// each row attends to itself and earlier rows of its own sequence.
template <class T>
Var<T> causal_attention(Var<T> q, Var<T> k, Var<T> v, std::size_t n_heads, std::vector<std::size_t> lengths) {
  detail::same_shape("causal_attention", q, k);
  detail::same_shape("causal_attention", q, v);
  const std::size_t n = q.value().rows(), dm = q.value().cols();
  if (n_heads == 0 || dm % n_heads != 0) throw ValidationError("op 'causal_attention': d_model not divisible by heads");
  std::size_t total = 0;
  for (auto l : lengths) total += l;
  if (total != n) throw ValidationError("op 'causal_attention': sequence lengths do not cover rows");
  const std::size_t hd = dm / n_heads;
  const T sc = T{1} / std::sqrt(static_cast<T>(hd));

  // probs laid out per (row, head) with row-local length.
  std::vector<std::size_t> prob_off(n * n_heads + 1, 0);
  {
    std::size_t row = 0, acc = 0;
    for (auto len : lengths)
      for (std::size_t t = 0; t < len; ++t, ++row)
        for (std::size_t h = 0; h < n_heads; ++h) {
          prob_off[row * n_heads + h] = acc;
          acc += t + 1;
        }
    prob_off[n * n_heads] = acc;
  }
  std::vector<T> probs(prob_off.back());
  Tensor<T> out(Shape{n, dm});
  const auto& qv = q.value();
  const auto& kv = k.value();
  const auto& vv = v.value();
  {
    std::size_t start = 0;
    for (auto len : lengths) {
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t row = start + t;
        for (std::size_t h = 0; h < n_heads; ++h)
          kernels::attend_row(qv.data() + row * dm + h * hd, kv.data() + start * dm + h * hd,
                              vv.data() + start * dm + h * hd, dm, t + 1, hd, sc,
                              probs.data() + prob_off[row * n_heads + h], out.data() + row * dm + h * hd);
      }
      start += len;
    }
  }
  Graph<T>& g = *q.graph;
  const std::size_t qi = q.id, ki = k.id, vi = v.id, oi = g.size();
  return g.op(std::move(out), {q, k, v},
              [&g, qi, ki, vi, oi, n, dm, hd, n_heads, sc, lengths = std::move(lengths), probs = std::move(probs),
               prob_off = std::move(prob_off)] {
                const auto& go = g.grad(oi);
                const auto& qv = g.value(qi);
                const auto& kv = g.value(ki);
                const auto& vv = g.value(vi);
                auto& gq = g.grad(qi);
                auto& gk = g.grad(ki);
                auto& gv = g.grad(vi);
                std::vector<T> dp;
                std::size_t start = 0;
                for (auto len : lengths) {
                  for (std::size_t t = 0; t < len; ++t) {
                    const std::size_t row = start + t;
                    for (std::size_t h = 0; h < n_heads; ++h) {
                      const T* p = probs.data() + prob_off[row * n_heads + h];
                      const T* dout = go.data() + row * dm + h * hd;
                      dp.assign(t + 1, T{0});
                      T pdp{0};
                      for (std::size_t j = 0; j <= t; ++j) {
                        const std::size_t src = (start + j) * dm + h * hd;
                        dp[j] = kernels::dot(dout, vv.data() + src, hd);
                        pdp += p[j] * dp[j];
                        T* gvr = gv.data() + src;
                        for (std::size_t c = 0; c < hd; ++c) gvr[c] += p[j] * dout[c];
                      }
                      const T* qr = qv.data() + row * dm + h * hd;
                      T* gqr = gq.data() + row * dm + h * hd;
                      for (std::size_t j = 0; j <= t; ++j) {
                        const T ds = p[j] * (dp[j] - pdp) * sc;
                        if (ds == T{0}) continue;
                        const std::size_t src = (start + j) * dm + h * hd;
                        const T* kr = kv.data() + src;
                        T* gkr = gk.data() + src;
                        for (std::size_t c = 0; c < hd; ++c) {
                          gqr[c] += ds * kr[c];
                          gkr[c] += ds * qr[c];
                        }
                      }
                    }
                  }
                  start += len;
                }
              },
              "causal_attention");
}

}  // namespace xlalign::ad

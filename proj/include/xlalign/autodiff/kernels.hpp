#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

// Row kernels shared by the autodiff ops and the incremental decoder. Every
// kernel computes one output row from one input row with a fixed
// accumulation order, so a row's result does not depend on how many other
// rows are processed alongside it.

namespace xlalign::ad::kernels {

/// out[0..m) = a[0..k) * B[k x m] (+ out if accumulate).
template <class T>
inline void matvec_row(const T* a, const T* b, T* out, std::size_t k, std::size_t m, bool accumulate = false) {
  if (!accumulate) std::fill(out, out + m, T{0});
  for (std::size_t p = 0; p < k; ++p) {
    const T av = a[p];
    const T* brow = b + p * m;
    for (std::size_t j = 0; j < m; ++j) out[j] += av * brow[j];
  }
}

template <class T>
inline T dot(const T* a, const T* b, std::size_t n) {
  T s{0};
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <class T>
inline void log_softmax_row(const T* x, T* out, std::size_t n) {
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[i]);
  T s{0};
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i] - mx);
  const T lse = mx + std::log(s);
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - lse;
}

template <class T>
inline void softmax_row(const T* x, T* out, std::size_t n) {
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[i]);
  T s{0};
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(x[i] - mx);
    s += out[i];
  }
  const T inv = T{1} / s;
  for (std::size_t i = 0; i < n; ++i) out[i] *= inv;
}

/// y = x / rms(x) * g; returns 1/rms for the backward pass.
template <class T>
inline T rmsnorm_row(const T* x, const T* g, T* y, std::size_t n, T eps) {
  T ss{0};
  for (std::size_t i = 0; i < n; ++i) ss += x[i] * x[i];
  const T inv = T{1} / std::sqrt(ss / static_cast<T>(n) + eps);
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * inv * g[i];
  return inv;
}

/// Causal attention for one query row over keys/values rows [0, len) of a
/// single head. k and v are row-major with stride `stride`; probs receives
/// the attention weights (length len).
template <class T>
inline void attend_row(const T* q, const T* k, const T* v, std::size_t stride, std::size_t len, std::size_t head_dim,
                       T scale, T* probs, T* out) {
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t j = 0; j < len; ++j) {
    probs[j] = dot(q, k + j * stride, head_dim) * scale;
    mx = std::max(mx, probs[j]);
  }
  T s{0};
  for (std::size_t j = 0; j < len; ++j) {
    probs[j] = std::exp(probs[j] - mx);
    s += probs[j];
  }
  const T inv = T{1} / s;
  for (std::size_t j = 0; j < len; ++j) probs[j] *= inv;
  std::fill(out, out + head_dim, T{0});
  for (std::size_t j = 0; j < len; ++j) {
    const T p = probs[j];
    const T* vr = v + j * stride;
    for (std::size_t d = 0; d < head_dim; ++d) out[d] += p * vr[d];
  }
}

}  // namespace xlalign::ad::kernels

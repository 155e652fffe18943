#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "xlalign/common/rng.hpp"
#include "xlalign/policy/model.hpp"

namespace xlalign::policy {

struct DecodeParams {
  /// 0 means greedy.
  double temperature = 1.0;
  std::size_t max_new_tokens = 48;
  int stop_token = 0;
  std::uint64_t seed = 0;
};

template <class T>
struct Completion {
  std::vector<int> ids;
  /// Untempered model log-probability of each emitted token.
  std::vector<T> step_logprobs;
  bool stopped = false;

  T total_logprob() const {
    T s{0};
    for (T x : step_logprobs) s += x;
    return s;
  }
};

namespace detail {

inline int argmax_token(const auto& logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i)
    if (logits[i] > logits[best]) best = i;
  return static_cast<int>(best);
}

template <class T>
int sample_token(const std::vector<T>& logits, double temperature, Rng& rng, std::vector<double>& scratch) {
  scratch.resize(logits.size());
  double mx = -INFINITY;
  for (T l : logits) mx = std::max(mx, static_cast<double>(l) / temperature);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    scratch[i] = std::exp(static_cast<double>(logits[i]) / temperature - mx);
    z += scratch[i];
  }
  double u = rng.uniform() * z;
  for (std::size_t i = 0; i < scratch.size(); ++i) {
    u -= scratch[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  // Rounding left a sliver of mass; fall back to the last positive entry.
  for (std::size_t i = scratch.size(); i-- > 0;)
    if (scratch[i] > 0.0) return static_cast<int>(i);
  return 0;
}

}  // namespace detail

/// Draws `n` completions for one prompt. Sampling is temperature-scaled
/// categorical per step, greedy when temperature is 0, and stops at the
/// stop token, after max_new_tokens, or at the context limit. The whole call
/// is a pure function of (model, prompt, params).
template <class T>
std::vector<Completion<T>> sample(const PolicyModel<T>& model, const std::vector<int>& prompt, const DecodeParams& p,
                                  std::size_t n) {
  if (n < 1) throw ValidationError("sample: n must be >= 1");
  if (p.temperature < 0.0) throw ValidationError("sample: temperature must be >= 0");
  if (prompt.empty()) throw ValidationError("sample: empty prompt");
  const std::size_t ctx = model.config().context_len;
  if (prompt.size() >= ctx) throw ValidationError("sample: prompt does not fit context");

  typename PolicyModel<T>::Decoder base(model);
  std::vector<T> first;
  for (int t : prompt) first = base.step(t);

  Rng rng(p.seed);
  std::vector<Completion<T>> out;
  out.reserve(n);
  std::vector<double> scratch;
  std::vector<T> logp(model.config().vocab_size);
  const std::size_t budget = std::min(p.max_new_tokens, ctx - prompt.size());
  for (std::size_t s = 0; s < n; ++s) {
    auto dec = base;
    std::vector<T> logits = first;
    Completion<T> c;
    for (std::size_t step = 0; step < budget; ++step) {
      const int tok = p.temperature == 0.0 ? detail::argmax_token(logits)
                                           : detail::sample_token(logits, p.temperature, rng, scratch);
      ad::kernels::log_softmax_row(logits.data(), logp.data(), logits.size());
      c.ids.push_back(tok);
      c.step_logprobs.push_back(logp[static_cast<std::size_t>(tok)]);
      if (tok == p.stop_token) {
        c.stopped = true;
        break;
      }
      if (step + 1 < budget) logits = dec.step(tok);
    }
    out.push_back(std::move(c));
  }
  return out;
}

template <class T>
Completion<T> greedy(const PolicyModel<T>& model, const std::vector<int>& prompt, std::size_t max_new_tokens,
                     int stop_token = 0) {
  DecodeParams p;
  p.temperature = 0.0;
  p.max_new_tokens = max_new_tokens;
  p.stop_token = stop_token;
  return std::move(sample(model, prompt, p, 1).front());
}

}  // namespace xlalign::policy

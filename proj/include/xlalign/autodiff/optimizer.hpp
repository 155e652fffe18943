#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "xlalign/autodiff/graph.hpp"

namespace xlalign::ad {

struct AdamWConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;
  /// Decoupled; applied to rank-2 parameters only.
  double weight_decay = 0.0;
  /// Linear warm-up from 0 to lr over this many steps, then constant.
  int warmup_steps = 0;
  /// Global-norm gradient clipping; 0 disables.
  double clip_norm = 0.0;
};

/// Learning rate in effect at 1-based update `step`.
inline double warmup_lr(const AdamWConfig& cfg, long step) {
  if (cfg.warmup_steps <= 0 || step >= cfg.warmup_steps) return cfg.lr;
  return cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
}

template <class T>
double global_grad_norm(const ParameterStore<T>& params) {
  double ss = 0.0;
  for (const auto& [_, p] : params.all())
    for (T g : p.grad.values()) ss += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(ss);
}

/// AdamW with bias-corrected moments. Moment buffers are created lazily per
/// parameter name and always match the parameter's shape.
template <class T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  AdamWConfig& config() { return cfg_; }
  long steps() const { return step_; }
  double current_lr() const { return warmup_lr(cfg_, step_); }

  /// One update from the gradients currently stored in `params`. Returns
  /// the pre-clipping global gradient norm.
  double step(ParameterStore<T>& params) {
    auto& all = params.all_mut();  // throws on frozen stores
    const double norm = global_grad_norm(params);
    const double clip = (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
    ++step_;
    const double lr = warmup_lr(cfg_, step_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (auto& [name, p] : all) {
      auto& st = state_[name];
      if (st.m.size() != p.value.size()) {
        st.m = Tensor<T>(p.value.shape());
        st.v = Tensor<T>(p.value.shape());
      }
      const bool decay = cfg_.weight_decay > 0.0 && p.value.shape().size() == 2;
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]) * clip;
        const double m = cfg_.beta1 * static_cast<double>(st.m[i]) + (1.0 - cfg_.beta1) * g;
        const double v = cfg_.beta2 * static_cast<double>(st.v[i]) + (1.0 - cfg_.beta2) * g * g;
        st.m[i] = static_cast<T>(m);
        st.v[i] = static_cast<T>(v);
        double w = static_cast<double>(p.value[i]);
        if (decay) w -= lr * cfg_.weight_decay * w;
        w -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
        p.value[i] = static_cast<T>(w);
      }
    }
    return norm;
  }

 private:
  struct Moments {
    Tensor<T> m, v;
  };
  AdamWConfig cfg_;
  std::map<std::string, Moments> state_;
  long step_ = 0;
};

}  // namespace xlalign::ad

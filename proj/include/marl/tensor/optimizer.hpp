#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "marl/errors.hpp"
#include "marl/tensor/param_store.hpp"

namespace marl::tensor {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment (or plain SGD) update over a whole ParamStore.
///
/// step() refuses to touch the parameters if any gradient is non-finite.
/// On success the gradient buffer is zeroed and the store version bumped.
template <class T>
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg = {}) : cfg_(cfg) {}

  void step(ParamStore<T>& store, T lr) {
    for (const auto& p : store.params()) {
      for (T g : p.grad) {
        if (!std::isfinite(g)) throw NumericError("non-finite gradient in '" + p.name + "', update aborted");
      }
    }
    if (cfg_.kind == OptimizerKind::sgd) {
      for (auto& p : store.params()) {
        for (std::size_t i = 0; i < p.size(); ++i) p.value[i] -= lr * p.grad[i];
      }
    } else {
      adam_step(store, lr);
    }
    store.zero_grad();
    store.bump_version();
  }

  long steps() const { return t_; }
  const OptimizerConfig& config() const { return cfg_; }

 private:
  void adam_step(ParamStore<T>& store, T lr) {
    auto params = store.params();
    if (m_.size() != params.size()) {
      m_.assign(params.size(), {});
      v_.assign(params.size(), {});
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i].assign(params[i].size(), T(0));
        v_[i].assign(params[i].size(), T(0));
      }
    }
    ++t_;
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T eps = static_cast<T>(cfg_.epsilon);
    const T c1 = T(1) - std::pow(b1, static_cast<T>(t_));
    const T c2 = T(1) - std::pow(b2, static_cast<T>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& p = params[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const T g = p.grad[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g;
        v[i] = b2 * v[i] + (T(1) - b2) * g * g;
        const T mhat = m[i] / c1;
        const T vhat = v[i] / c2;
        p.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  OptimizerConfig cfg_;
  long t_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

/// Rescales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
template <class T>
T clip_grad_norm(ParamStore<T>& store, T max_norm) {
  T sq = 0;
  for (const auto& p : store.params()) {
    for (T g : p.grad) sq += g * g;
  }
  const T norm = std::sqrt(sq);
  if (max_norm > T(0) && norm > max_norm) {
    const T s = max_norm / norm;
    for (auto& p : store.params()) {
      for (auto& g : p.grad) g *= s;
    }
  }
  return norm;
}

}  // namespace marl::tensor

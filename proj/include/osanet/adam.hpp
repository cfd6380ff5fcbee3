#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "osanet/tensor.hpp"

namespace osanet::nn {

// Adam with bias correction. One (m, v) pair per parameter array, shaped
// identically to it.
template <class T>
struct AdamState {
  T lr = T(1e-4);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
  std::uint64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  static AdamState init(const std::vector<std::size_t>& param_sizes, T lr = T(1e-4),
                        T beta1 = T(0.9), T beta2 = T(0.999), T epsilon = T(1e-8)) {
    AdamState s;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    for (std::size_t n : param_sizes) {
      s.m.emplace_back(n, T(0));
      s.v.emplace_back(n, T(0));
    }
    return s;
  }
};

template <class T>
void adam_step(AdamState<T>& state, std::vector<std::span<T>> params,
               const std::vector<std::vector<T>>& grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw NnError("adam: parameter/gradient/moment group counts disagree");
  }
  state.step += 1;
  const T bc1 = T(1) - std::pow(state.beta1, static_cast<T>(state.step));
  const T bc2 = T(1) - std::pow(state.beta2, static_cast<T>(state.step));

  for (std::size_t g = 0; g < params.size(); ++g) {
    auto p = params[g];
    const auto& grad = grads[g];
    auto& m = state.m[g];
    auto& v = state.v[g];
    if (p.size() != grad.size() || p.size() != m.size()) {
      throw NnError("adam: shape mismatch in parameter group " + std::to_string(g));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const T gi = grad[i];
      if (!std::isfinite(gi)) {
        throw NnError("adam: non-finite gradient in group " + std::to_string(g) + " at index " +
                      std::to_string(i));
      }
      m[i] = state.beta1 * m[i] + (T(1) - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (T(1) - state.beta2) * gi * gi;
      const T m_hat = m[i] / bc1;
      const T v_hat = v[i] / bc2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace osanet::nn

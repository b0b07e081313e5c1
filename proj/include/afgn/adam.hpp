#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "afgn/tensor.hpp"

namespace afgn {

// Adam with bias correction. State starts at zero moments; the update is a
// deterministic function of (params, grads, state, step counter).
template <typename T = float>
class Adam {
 public:
  Adam(std::vector<Tensor<T>> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
        eps_(eps) {
    if (lr <= 0.0) throw ValueError("adam: learning rate must be positive");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw ValueError("adam: betas must lie in [0, 1)");
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto& p : params_) {
      m_.emplace_back(p.numel(), T(0));
      v_.emplace_back(p.numel(), T(0));
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
      auto& p = params_[pi];
      if (!p.has_grad())
        throw ValueError("adam: parameter " + std::to_string(pi) +
                         " has no gradient; run backward() first");
      std::span<const T> g = p.grad();
      std::span<T> x = p.values();
      T* m = m_[pi].data();
      T* v = v_[pi].data();
      for (size_t i = 0; i < g.size(); ++i) {
        m[i] = static_cast<T>(beta1_ * m[i] + (1.0 - beta1_) * g[i]);
        v[i] = static_cast<T>(beta2_ * v[i] +
                              (1.0 - beta2_) * static_cast<double>(g[i]) * g[i]);
        double mhat = m[i] / c1;
        double vhat = v[i] / c2;
        x[i] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) {
      p.grad_mut();  // allocate on first use
      p.zero_grad();
    }
  }

  int64_t step_count() const { return t_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<T>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace afgn

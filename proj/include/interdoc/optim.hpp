#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace interdoc {

/// Adaptive-moment gradient descent with bias correction.
class Adam {
 public:
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(n, 0.0f), v_(n, 0.0f), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// One update of `params` from `grad`; `t` is the 1-based step count shared
  /// by every tensor updated in this step.
  void step(std::span<float> params, std::span<const float> grad, double lr, std::uint64_t t) {
    if (lr == 0.0) return;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
    const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const float step = static_cast<float>(lr / c1);
    const float inv_c2 = static_cast<float>(1.0 / c2);
    const float eps = static_cast<float>(eps_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const float g = grad[i];
      m_[i] = b1 * m_[i] + (1.0f - b1) * g;
      v_[i] = b2 * v_[i] + (1.0f - b2) * g * g;
      params[i] -= step * m_[i] / (std::sqrt(v_[i] * inv_c2) + eps);
    }
  }

 private:
  std::vector<float> m_, v_;
  double beta1_, beta2_, eps_;
};

}  // namespace interdoc

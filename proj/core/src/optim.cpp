#include "hpsmp/optim.hpp"

#include <cmath>

namespace hpsmp {

void AdamState::step(ParamSet& params, const AdamConfig& config) {
  ++step_;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step_));
  params.for_each([&](const std::string& name, Tensor& t, bool trainable) {
    if (!trainable) return;
    Moments& mom = moments_[name];
    if (mom.m.empty()) {
      mom.m.assign(t.size(), 0.0);
      mom.v.assign(t.size(), 0.0);
    }
    const bool has_grad = t.has_grad();
    double* values = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double g = has_grad ? t.grad_at(i) : 0.0;
      mom.m[i] = config.beta1 * mom.m[i] + (1.0 - config.beta1) * g;
      mom.v[i] = config.beta2 * mom.v[i] + (1.0 - config.beta2) * g * g;
      const double m_hat = mom.m[i] / bc1;
      const double v_hat = mom.v[i] / bc2;
      values[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  });
}

}  // namespace hpsmp

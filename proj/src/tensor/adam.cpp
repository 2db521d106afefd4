#include "cegnn/adam.hpp"

#include <cmath>
#include <string>

#include "cegnn/error.hpp"
#include "cegnn/ops.hpp"

namespace cegnn {

AdamState::AdamState(std::span<const Tensor> params, AdamOptions options) : options_(options) {
  for (const Tensor& p : params) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void adam_step(AdamState& state, std::span<Tensor> params) {
  if (params.size() != state.m_.size()) {
    throw ShapeError("adam_step: state tracks " + std::to_string(state.m_.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].size() != state.m_[p].size()) {
      throw ShapeError("adam_step: length mismatch for parameter " + std::to_string(p));
    }
  }
  const auto& opt = state.options_;
  state.step_ += 1;
  const double t = static_cast<double>(state.step_);
  const double correction1 = 1.0 - std::pow(opt.beta1, t);
  const double correction2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto values = params[p].mutable_values();
    const auto grad = params[p].grad();
    auto& m = state.m_[p];
    auto& v = state.v_[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
    check_finite(values, "adam_step");
  }
}

}  // namespace cegnn

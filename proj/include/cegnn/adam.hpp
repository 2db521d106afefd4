#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cegnn/tensor.hpp"

namespace cegnn {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment buffers for a fixed, ordered list of parameters.
class AdamState {
 public:
  AdamState(std::span<const Tensor> params, AdamOptions options = {});

  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }
  std::uint64_t step_count() const { return step_; }
  std::span<const double> first_moment(std::size_t param) const { return m_.at(param); }
  std::span<const double> second_moment(std::size_t param) const { return v_.at(param); }

 private:
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;

  friend void adam_step(AdamState&, std::span<Tensor>);
};

/// Bias-corrected Adam update in place. A parameter that never received a
/// gradient is treated as having a zero gradient.
void adam_step(AdamState& state, std::span<Tensor> params);

}  // namespace cegnn

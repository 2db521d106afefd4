#pragma once

// Central-difference gradient oracle. Evaluates the objective on plain
// forward passes only; it never touches a Tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "cegnn/tensor.hpp"

namespace cegnn::testing {

inline std::vector<double> central_difference(Tensor& param, const std::function<double()>& objective,
                                              double h = 1e-5) {
  auto values = param.mutable_values();
  std::vector<double> grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double saved = values[i];
    values[i] = saved + h;
    const double up = objective();
    values[i] = saved - h;
    const double down = objective();
    values[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// ||a - b|| / max(||a||, ||b||, floor)
inline double relative_error(std::span<const double> a, std::span<const double> b,
                             double floor = 1e-12) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ai = i < a.size() ? a[i] : 0.0;
    const double bi = i < b.size() ? b[i] : 0.0;
    diff += (ai - bi) * (ai - bi);
    na += ai * ai;
    nb += bi * bi;
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true,
                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(numel(shape));
  for (double& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

/// Analytic gradient of `objective` w.r.t. `param` via the tape.
inline std::vector<double> tape_gradient(Tensor& param, const std::function<Tensor()>& objective) {
  param.zero_grad();
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = objective();
  }
  tape.backward(loss);
  auto g = param.grad();
  return g.empty() ? std::vector<double>(param.size(), 0.0) : std::vector<double>(g.begin(), g.end());
}

}  // namespace cegnn::testing

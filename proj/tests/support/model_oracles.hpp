#pragma once

// Whole-model oracles shared by the unit and acceptance suites.

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cegnn/mesh.hpp"
#include "cegnn/model.hpp"
#include "cegnn/ops.hpp"
#include "finite_difference.hpp"

namespace cegnn::testing {

struct GradientReport {
  std::string name;
  double error = 0.0;
};

/// Moves every bias and LayerNorm offset off zero. Freshly initialized
/// biases are exactly zero, so a row with all-dead hidden units lands on a
/// ReLU kink where central differences are not a derivative.
inline void jitter_biases(ModelParams& params, std::uint64_t seed, double scale = 0.1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto& [name, t] : params.named_parameters()) {
    if (name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0) {
      for (double& v : t.mutable_values()) v = dist(rng);
    }
  }
}

/// Analytic vs central-difference gradient of sum(w * forward_step(u)) for
/// every named parameter.
inline std::vector<GradientReport> model_gradient_check(const MeshGraph& mesh, const Tensor& u,
                                                        const ModelParams& params,
                                                        std::uint64_t seed, double h = 1e-5) {
  std::mt19937_64 rng(seed);
  const auto probe_w = random_tensor({u.dim(0), u.dim(1)}, rng, false);
  const auto graph = graph_index(mesh);
  auto objective = [&] { return sum(mul(forward_step(mesh, graph, u, params), probe_w)); };

  auto named = params.named_parameters();
  for (auto& [name, t] : named) t.zero_grad();
  Tape tape;
  Tensor loss;
  {
    TapeScope scope(tape);
    loss = objective();
  }
  tape.backward(loss);

  std::vector<GradientReport> out;
  for (auto& [name, t] : named) {
    const auto g = t.grad();
    const std::vector<double> analytic = g.empty() ? std::vector<double>(t.size(), 0.0)
                                                   : std::vector<double>(g.begin(), g.end());
    const auto numeric = central_difference(t, [&] { return objective().item(); }, h);
    out.push_back({name, relative_error(analytic, numeric)});
  }
  return out;
}

inline std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

/// Row i of `rows` moved to row perm[i].
inline Tensor permute_rows(const Tensor& rows, const std::vector<std::size_t>& perm) {
  const std::size_t w = rows.size() / rows.dim(0);
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    std::copy_n(rows.values().begin() + i * w, w, out.begin() + perm[i] * w);
  }
  return Tensor::from(rows.shape(), std::move(out));
}

/// Largest |forward(pi mesh, pi u) - pi forward(mesh, u)| entry.
inline double permutation_gap(const MeshGraph& mesh, const Tensor& u, const ModelParams& params,
                              const std::vector<std::size_t>& perm) {
  const auto base = permute_rows(forward_step(mesh, u, params), perm);
  const auto moved = forward_step(relabel_nodes(mesh, perm), permute_rows(u, perm), params);
  double gap = 0.0;
  for (std::size_t k = 0; k < base.size(); ++k) {
    gap = std::max(gap, std::abs(base.values()[k] - moved.values()[k]));
  }
  return gap;
}

/// Copies every parameter of `target` from the same-named tensor of `source`.
inline void copy_shared_parameters(const ModelParams& source, ModelParams& target) {
  const auto from = source.named_parameters();
  for (auto& [name, t] : target.named_parameters()) {
    const auto it = std::find_if(from.begin(), from.end(), [&](const auto& p) { return p.first == name; });
    const auto v = it->second.values();
    std::copy(v.begin(), v.end(), t.mutable_values().begin());
  }
  const auto masks = source.named_masks();
  for (auto& [name, t] : target.named_masks()) {
    const auto it = std::find_if(masks.begin(), masks.end(), [&](const auto& p) { return p.first == name; });
    const auto v = it->second.values();
    std::copy(v.begin(), v.end(), t.mutable_values().begin());
  }
}

/// Zeroes every cell-path tensor (cell encoder and per-layer cell MLPs).
inline void zero_cell_path(ModelParams& params) {
  for (auto& [name, t] : params.named_parameters()) {
    if (name.find(".cell") != std::string::npos) {
      auto v = t.mutable_values();
      std::fill(v.begin(), v.end(), 0.0);
    }
  }
}

}  // namespace cegnn::testing

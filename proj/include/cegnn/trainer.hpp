#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cegnn/mesh.hpp"
#include "cegnn/model.hpp"
#include "cegnn/pde.hpp"
#include "cegnn/tensor.hpp"

namespace cegnn {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 1;
  std::size_t epochs = 200;
  double noise_std = 1e-4;
  std::uint64_t seed = 0;
  std::size_t max_steps = 0;  // optimizer-step budget; 0 means epochs alone decide
  double lr_decay = 1.0;      // step k uses learning_rate * lr_decay^k
};

void validate(const TrainConfig& config);

/// One supervised pair: frame `step` of a trajectory and its successor.
struct Sample {
  std::size_t trajectory = 0;
  std::size_t step = 0;
};

/// All consecutive frame pairs, in trajectory-then-time order. Throws
/// ConfigError for an empty list or a trajectory shorter than two frames.
std::vector<Sample> make_pairs(std::span<const Trajectory> trajectories);

/// Seeded in-place Fisher-Yates shuffle.
void shuffle_pairs(std::vector<Sample>& pairs, std::mt19937_64& rng);

/// u + N(0, stddev^2) i.i.d.; returns u unchanged (and draws nothing) when stddev is 0.
Tensor add_noise(const Tensor& u, double stddev, std::mt19937_64& rng);

/// Total Gaussian draws made by add_noise on this thread.
std::uint64_t noise_draw_count();

/// sqrt(mean((y - y_hat)^2)); differentiable through y_hat.
Tensor rmse(const Tensor& target, const Tensor& prediction);
double rmse(std::span<const double> target, std::span<const double> prediction);

/// One metrics row: epoch, split, metric, value.
struct MetricsRecord {
  std::size_t epoch = 0;
  std::string split;
  std::string metric;
  double value = 0.0;
};

/// "epoch,split,metric,value" with values printed to 17 significant digits.
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records);
std::string format_value(double value);

/// Training mesh for a dataset recipe: the solver grid with its spacing.
MeshGraph mesh_for_spec(const PdeSpec& spec, bool periodic_wrap);

/// Frame `step` of a trajectory as an N x 2 tensor.
Tensor frame_tensor(const Trajectory& trajectory, std::size_t step);

struct TrainData {
  const MeshGraph* mesh = nullptr;
  std::span<const Trajectory> train;
  std::span<const Trajectory> val;
};

struct TrainResult {
  ModelParams best;  // lowest validation one-step RMSE (train loss when no validation set)
  std::size_t best_epoch = 0;
  double best_score = 0.0;
  std::size_t optimizer_steps = 0;
  std::vector<double> loss_trace;  // one entry per optimizer step
  std::vector<MetricsRecord> records;
};

using MetricsCallback = std::function<void(const MetricsRecord&)>;

/// One-step training: per batch noise, forward_step, RMSE, backward, Adam.
/// Validation one-step RMSE after every epoch. `params` is updated in place.
TrainResult train(ModelParams& params, const TrainData& data, const TrainConfig& config,
                  const MetricsCallback& on_record = {});

/// Mean over all pairs of the per-pair one-step RMSE; never adds noise.
double evaluate_one_step(const ModelParams& params, const MeshGraph& mesh,
                         std::span<const Trajectory> trajectories, std::size_t batch_size = 16);

struct RolloutResult {
  std::vector<double> step_rmse;  // step_rmse[k] compares prediction k+1 with frame start+k+1
  double mean_rmse = 0.0;
  std::vector<double> frames;  // start frame followed by `horizon` predictions
};

/// Autoregressive prediction from frame `start`. Throws ConfigError when the
/// horizon exceeds the ground truth and NumericError (with step index) on blow-up.
RolloutResult rollout(const ModelParams& params, const MeshGraph& mesh, const Trajectory& truth,
                      std::size_t horizon, std::size_t start = 0);

}  // namespace cegnn

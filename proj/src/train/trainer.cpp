#include "cegnn/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <utility>

#include "cegnn/adam.hpp"
#include "cegnn/binary_io.hpp"
#include "cegnn/error.hpp"
#include "cegnn/ops.hpp"

namespace cegnn {

namespace {
thread_local std::uint64_t g_noise_draws = 0;
}

void validate(const TrainConfig& config) {
  if (!(config.noise_std >= 0.0)) throw ConfigError("noise stddev must be non-negative");
  if (config.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(config.lr_decay > 0.0 && config.lr_decay <= 1.0)) throw ConfigError("lr decay must be in (0, 1]");
}

std::vector<Sample> make_pairs(std::span<const Trajectory> trajectories) {
  if (trajectories.empty()) {
    throw ConfigError("make_pairs: no trajectories");
  }
  std::vector<Sample> pairs;
  for (std::size_t t = 0; t < trajectories.size(); ++t) {
    const std::size_t frames = trajectories[t].frame_count();
    if (frames < 2) {
      throw ConfigError("make_pairs: trajectory " + std::to_string(t) + " has fewer than 2 frames");
    }
    for (std::size_t s = 0; s + 1 < frames; ++s) {
      pairs.push_back({t, s});
    }
  }
  return pairs;
}

void shuffle_pairs(std::vector<Sample>& pairs, std::mt19937_64& rng) {
  for (std::size_t i = pairs.size(); i > 1; --i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
    std::swap(pairs[i - 1], pairs[j]);
  }
}

Tensor add_noise(const Tensor& u, double stddev, std::mt19937_64& rng) {
  if (!(stddev >= 0.0)) {
    throw ConfigError("noise stddev must be non-negative");
  }
  if (stddev == 0.0) {
    return u;
  }
  std::normal_distribution<double> normal(0.0, stddev);
  std::vector<double> values(u.values().begin(), u.values().end());
  for (double& v : values) v += normal(rng);
  g_noise_draws += values.size();
  return Tensor::from(u.shape(), std::move(values));
}

std::uint64_t noise_draw_count() { return g_noise_draws; }

Tensor rmse(const Tensor& target, const Tensor& prediction) {
  if (target.shape() != prediction.shape()) {
    throw ShapeError("rmse: " + shape_string(target.shape()) + " vs " +
                     shape_string(prediction.shape()));
  }
  const Tensor diff = sub(prediction, target);
  return sqrt(scale(sum(mul(diff, diff)), 1.0 / static_cast<double>(target.size())));
}

double rmse(std::span<const double> target, std::span<const double> prediction) {
  if (target.size() != prediction.size() || target.empty()) {
    throw ShapeError("rmse: length mismatch");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = target[i] - prediction[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(target.size()));
}

std::string format_value(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> records) {
  auto out = io::open_for_write(path);
  out << "epoch,split,metric,value\n";
  for (const auto& r : records) {
    out << r.epoch << ',' << r.split << ',' << r.metric << ',' << format_value(r.value) << '\n';
  }
  if (!out) {
    throw IoError("failed to write " + path.string());
  }
}

MeshGraph mesh_for_spec(const PdeSpec& spec, bool periodic_wrap) {
  return grid_to_mesh({spec.grid, spec.dx, periodic_wrap});
}

Tensor frame_tensor(const Trajectory& trajectory, std::size_t step) {
  const auto frame = trajectory.frame(step);
  return Tensor::from({trajectory.spec.node_count(), kFieldChannels},
                      std::vector<double>(frame.begin(), frame.end()));
}

namespace {

/// Meshes replicated per batch size, built on first use.
class BatchGraphs {
 public:
  explicit BatchGraphs(const MeshGraph& mesh) : mesh_(mesh) {}

  const std::pair<MeshGraph, GraphIndex>& get(std::size_t copies) {
    auto it = cache_.find(copies);
    if (it == cache_.end()) {
      MeshGraph batched = replicate(mesh_, copies);
      GraphIndex index = graph_index(batched);
      it = cache_.emplace(copies, std::make_pair(std::move(batched), std::move(index))).first;
    }
    return it->second;
  }

 private:
  const MeshGraph& mesh_;
  std::map<std::size_t, std::pair<MeshGraph, GraphIndex>> cache_;
};

/// Stacks frames of `samples` (offset by `shift` steps) as a (B*N) x 2 tensor.
Tensor stack_frames(std::span<const Trajectory> trajectories, std::span<const Sample> samples,
                    std::size_t shift) {
  const std::size_t frame_size = trajectories[samples[0].trajectory].frame_size();
  std::vector<double> values;
  values.reserve(samples.size() * frame_size);
  for (const auto& s : samples) {
    const auto frame = trajectories[s.trajectory].frame(s.step + shift);
    if (frame.size() != frame_size) {
      throw ShapeError("trajectories in one dataset must share a grid");
    }
    values.insert(values.end(), frame.begin(), frame.end());
  }
  const std::size_t rows = values.size() / kFieldChannels;
  return Tensor::from({rows, kFieldChannels}, std::move(values));
}

void check_mesh(const MeshGraph& mesh, std::span<const Trajectory> trajectories) {
  for (const auto& t : trajectories) {
    if (t.spec.node_count() != mesh.node_count()) {
      throw ShapeError("trajectory grid has " + std::to_string(t.spec.node_count()) +
                       " nodes, mesh has " + std::to_string(mesh.node_count()));
    }
  }
}

double evaluate_pairs(const ModelParams& params, BatchGraphs& graphs,
                      std::span<const Trajectory> trajectories, std::span<const Sample> pairs,
                      std::size_t batch_size, std::size_t nodes) {
  double total = 0.0;
  for (std::size_t begin = 0; begin < pairs.size(); begin += batch_size) {
    const auto batch = pairs.subspan(begin, std::min(batch_size, pairs.size() - begin));
    const auto& [mesh, index] = graphs.get(batch.size());
    const Tensor input = stack_frames(trajectories, batch, 0);
    const Tensor target = stack_frames(trajectories, batch, 1);
    const Tensor prediction = forward_step(mesh, index, input, params);
    const std::size_t stride = nodes * kFieldChannels;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      total += rmse(target.values().subspan(b * stride, stride),
                    prediction.values().subspan(b * stride, stride));
    }
  }
  return total / static_cast<double>(pairs.size());
}

}  // namespace

double evaluate_one_step(const ModelParams& params, const MeshGraph& mesh,
                         std::span<const Trajectory> trajectories, std::size_t batch_size) {
  check_mesh(mesh, trajectories);
  const auto pairs = make_pairs(trajectories);
  BatchGraphs graphs(mesh);
  return evaluate_pairs(params, graphs, trajectories, pairs, std::max<std::size_t>(1, batch_size),
                        mesh.node_count());
}

TrainResult train(ModelParams& params, const TrainData& data, const TrainConfig& config,
                  const MetricsCallback& on_record) {
  validate(config);
  if (data.mesh == nullptr) {
    throw ConfigError("train: no mesh");
  }
  check_mesh(*data.mesh, data.train);
  check_mesh(*data.mesh, data.val);
  auto pairs = make_pairs(data.train);
  const std::vector<Sample> val_pairs =
      data.val.empty() ? std::vector<Sample>{} : make_pairs(data.val);

  std::mt19937_64 shuffle_rng(config.seed);
  std::mt19937_64 noise_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Tensor> parameters = params.parameter_list();
  AdamState adam(parameters, AdamOptions{config.learning_rate});
  BatchGraphs graphs(*data.mesh);

  TrainResult result;
  auto emit = [&](MetricsRecord record) {
    if (on_record) on_record(record);
    result.records.push_back(std::move(record));
  };

  bool have_best = false;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.max_steps != 0 && result.optimizer_steps >= config.max_steps) {
      break;
    }
    shuffle_pairs(pairs, shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < pairs.size(); begin += config.batch_size) {
      if (config.max_steps != 0 && result.optimizer_steps >= config.max_steps) {
        break;
      }
      const auto batch = std::span<const Sample>(pairs).subspan(
          begin, std::min(config.batch_size, pairs.size() - begin));
      const auto& [mesh, index] = graphs.get(batch.size());
      const Tensor input = add_noise(stack_frames(data.train, batch, 0), config.noise_std, noise_rng);
      const Tensor target = stack_frames(data.train, batch, 1);
      for (Tensor& p : parameters) p.zero_grad();
      Tape tape;
      Tensor loss;
      try {
        TapeScope scope(tape);
        loss = rmse(target, forward_step(mesh, index, input, params));
        tape.backward(loss);
        adam.set_learning_rate(config.learning_rate *
                               std::pow(config.lr_decay, static_cast<double>(result.optimizer_steps)));
        adam_step(adam, parameters);
      } catch (const NumericError& e) {
        throw NumericError("training epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(result.optimizer_steps + 1) + ": " + e.what());
      }
      result.optimizer_steps += 1;
      result.loss_trace.push_back(loss.item());
      loss_sum += loss.item();
      batches += 1;
    }
    const double train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    emit({epoch, "train", "one_step_rmse", train_loss});
    double score = train_loss;
    if (!val_pairs.empty()) {
      score = evaluate_pairs(params, graphs, data.val, val_pairs, config.batch_size,
                             data.mesh->node_count());
      emit({epoch, "val", "one_step_rmse", score});
    }
    if (!have_best || score < result.best_score) {
      have_best = true;
      result.best_score = score;
      result.best_epoch = epoch;
      result.best = clone_params(params);
    }
  }
  if (!have_best) {
    result.best = clone_params(params);
  }
  return result;
}

RolloutResult rollout(const ModelParams& params, const MeshGraph& mesh, const Trajectory& truth,
                      std::size_t horizon, std::size_t start) {
  if (horizon == 0 || start + horizon >= truth.frame_count()) {
    throw ConfigError("rollout horizon " + std::to_string(horizon) + " from frame " +
                      std::to_string(start) + " exceeds the " +
                      std::to_string(truth.frame_count()) + " available frames");
  }
  check_mesh(mesh, std::span<const Trajectory>(&truth, 1));
  const GraphIndex index = graph_index(mesh);
  RolloutResult result;
  Tensor state = frame_tensor(truth, start);
  result.frames.assign(state.values().begin(), state.values().end());
  for (std::size_t k = 1; k <= horizon; ++k) {
    try {
      state = forward_step(mesh, index, state, params);
    } catch (const NumericError& e) {
      throw NumericError("rollout blow-up at step " + std::to_string(k) + ": " + e.what());
    }
    result.frames.insert(result.frames.end(), state.values().begin(), state.values().end());
    result.step_rmse.push_back(rmse(truth.frame(start + k), state.values()));
  }
  double total = 0.0;
  for (double r : result.step_rmse) total += r;
  result.mean_rmse = total / static_cast<double>(horizon);
  return result;
}

}  // namespace cegnn

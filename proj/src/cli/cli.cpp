#include "cegnn/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "cegnn/binary_io.hpp"
#include "cegnn/error.hpp"
#include "cegnn/mesh.hpp"
#include "cegnn/model.hpp"
#include "cegnn/named_tensors.hpp"
#include "cegnn/pde.hpp"
#include "cegnn/trainer.hpp"

namespace cegnn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kTrajectoryExt = ".traj";
constexpr std::uint64_t kNoiseSeedSalt = 0x9e3779b97f4a7c15ULL;  // matches trainer's noise stream

struct Flags {
  // data
  std::string pde = "burgers";
  std::size_t dim = 2;
  std::size_t grid = 0;
  double dx = 0.0;
  double dt = 0.0;
  std::size_t steps = 0;
  std::size_t stride = 1;
  std::string ic;
  double ic_mean = 0.0;
  double ic_std = 0.3;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  // model
  std::size_t layers = 4;
  std::size_t latent_dim = 128;
  std::size_t windows = 4;
  double mask_keep = 0.5;
  std::size_t mlp_depth = 2;
  std::size_t mlp_hidden = 0;
  bool no_residual = false;
  std::string ablate = "none";
  // training
  std::uint64_t seed = 0;
  double lr = 1e-4;
  double lr_decay = 1.0;
  std::size_t batch = 1;
  double noise_std = 1e-4;
  std::size_t epochs = 200;
  std::size_t max_steps = 0;
  bool periodic_wrap = false;
  // evaluation
  std::size_t horizon = 10;
  std::size_t start = 0;
  bool export_frames = false;
  std::string split = "test";
  // paths
  std::string data;
  std::string checkpoint;
  std::string out;
  std::string path;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string indexed(const std::string& stem, std::size_t k, const char* ext) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03zu", k);
  return stem + buf + ext;
}

/// Every option of `app` with its effective value (given or default).
json flag_set(const CLI::App& app) {
  json flags = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      flags[name] = opt->get_expected_max() == 0 ? json(true)
                                                 : json(results.size() == 1 ? results[0] : "");
    } else {
      flags[name] = opt->get_expected_max() == 0 ? json(false) : json(opt->get_default_str());
    }
  }
  return flags;
}

/// One run directory with its manifest, written once when the run ends.
class RunDir {
 public:
  RunDir(const std::string& out, const std::string& command, json flags) : root_(out) {
    if (out.empty()) {
      throw ConfigError("--out is required");
    }
    if (fs::exists(root_) && !(fs::is_directory(root_) && fs::is_empty(root_))) {
      throw ConfigError("output directory " + root_.string() + " exists and is not empty");
    }
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) {
      throw IoError("cannot create " + root_.string() + ": " + ec.message());
    }
    manifest_ = {{"command", command}, {"flags", std::move(flags)}, {"version", kVersion},
                 {"started_at", utc_now()}, {"seeds", json::object()},
                 {"paths", {{"out", root_.string()}, {"inputs", json::array()}, {"outputs", json::array()}}}};
  }

  fs::path file(const std::string& name) {
    manifest_["paths"]["outputs"].push_back(name);
    return root_ / name;
  }
  void input(const fs::path& path) { manifest_["paths"]["inputs"].push_back(path.string()); }
  json& manifest() { return manifest_; }

  void finish(const std::string& status, const std::string& error = {}) {
    manifest_["status"] = status;
    if (!error.empty()) manifest_["error"] = error;
    manifest_["finished_at"] = utc_now();
    std::ofstream out(root_ / "manifest.json");
    out << manifest_.dump(2) << '\n';
    if (!out) {
      throw IoError("cannot write " + (root_ / "manifest.json").string());
    }
  }

 private:
  fs::path root_;
  json manifest_;
};

/// Runs `body` inside a RunDir, recording failure in the manifest before rethrowing.
template <class Body>
void with_run(RunDir& run, Body&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    run.finish("failed", e.what());
    throw;
  }
  run.finish("ok");
}

struct SplitCounts {
  std::size_t train, val, test;
};

SplitCounts default_split(PdeKind kind, std::size_t dim) {
  switch (kind) {
    case PdeKind::kBurgers: return {10, 2, 3};
    case PdeKind::kFitzHughNagumo: return {5, 2, 3};
    case PdeKind::kGrayScott: return dim == 3 ? SplitCounts{1, 1, 2} : SplitCounts{5, 2, 3};
  }
  return {1, 1, 1};
}

std::vector<fs::path> split_files(const fs::path& dir, const std::string& split) {
  if (!fs::is_directory(dir)) {
    throw IoError("data directory " + dir.string() + " does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind(split + "_", 0) == 0 &&
        entry.path().extension() == kTrajectoryExt) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<Trajectory> load_split(RunDir& run, const fs::path& dir, const std::string& split,
                                   bool required) {
  std::vector<Trajectory> out;
  for (const auto& path : split_files(dir, split)) {
    run.input(path);
    out.push_back(load_trajectory(path));
  }
  if (required && out.empty()) {
    throw IoError("no " + split + "_*" + kTrajectoryExt + " files in " + dir.string());
  }
  return out;
}

void check_same_grid(const std::vector<Trajectory>& a, const PdeSpec& ref) {
  for (const auto& t : a) {
    if (t.spec.grid != ref.grid || t.spec.dx != ref.dx) {
      throw ShapeError("trajectories in the dataset use different grids");
    }
  }
}

ModelConfig model_config(const Flags& f, std::size_t spatial_dim) {
  ModelConfig c;
  c.layers = f.layers;
  c.latent_dim = f.latent_dim;
  c.n_windows = f.windows;
  c.mask_keep_prob = f.mask_keep;
  c.mlp_depth = f.mlp_depth;
  c.mlp_hidden = f.mlp_hidden;
  c.residual = !f.no_residual;
  c.spatial_dim = spatial_dim;
  c = apply_ablation(c, parse_ablation(f.ablate));
  validate(c);
  return c;
}

TrainConfig train_config(const Flags& f) {
  TrainConfig t;
  t.learning_rate = f.lr;
  t.batch_size = f.batch;
  t.epochs = f.epochs;
  t.noise_std = f.noise_std;
  t.seed = f.seed;
  t.max_steps = f.max_steps;
  t.lr_decay = f.lr_decay;
  validate(t);
  return t;
}

json train_seeds(const Flags& f) {
  return {{"init", f.seed}, {"shuffle", f.seed}, {"noise", f.seed ^ kNoiseSeedSalt}};
}

void write_csv(const fs::path& path, const std::string& header, const std::vector<std::string>& rows) {
  std::ofstream out(path, std::ios::binary);
  out << header << '\n';
  for (const auto& r : rows) out << r << '\n';
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
}

// ---------------------------------------------------------------- commands

void cmd_generate(const Flags& f, const CLI::App& app, std::ostream& out) {
  const PdeKind kind = parse_pde(f.pde);
  PdeSpec spec = default_spec(kind, f.dim);
  if (f.grid) spec.grid.assign(f.dim, f.grid);
  if (f.dx > 0.0) spec.dx = f.dx;
  if (f.dt > 0.0) spec.dt = f.dt;
  if (f.steps) spec.steps = f.steps;
  validate(spec);
  IcOptions ic;
  ic.kind = f.ic.empty() ? (kind == PdeKind::kGrayScott ? IcKind::kBlocks : IcKind::kGaussian)
                         : parse_ic(f.ic);
  ic.mean = f.ic_mean;
  ic.stddev = f.ic_std;
  if (!(ic.stddev >= 0.0)) {
    throw ConfigError("--ic-std must be non-negative");
  }
  SplitCounts counts = default_split(kind, f.dim);
  if (app.count("--train")) counts.train = f.n_train;
  if (app.count("--val")) counts.val = f.n_val;
  if (app.count("--test")) counts.test = f.n_test;

  RunDir run(f.out, "generate", flag_set(app));
  with_run(run, [&] {
    json seeds = json::object();
    std::size_t index = 0;
    for (const auto& [split, n] : {std::pair{"train", counts.train}, std::pair{"val", counts.val},
                                   std::pair{"test", counts.test}}) {
      for (std::size_t k = 0; k < n; ++k, ++index) {
        const std::uint64_t seed = splitmix64(f.seed ^ splitmix64(index));
        Trajectory t = generate_trajectory(spec, sample_ic(ic, spec, seed), f.stride);
        t.ic = ic;
        t.seed = seed;
        const std::string name = indexed(split, k, kTrajectoryExt);
        save_trajectory(run.file(name), t);
        seeds[name] = seed;
        out << "wrote " << name << " (" << t.frame_count() << " frames)\n";
      }
    }
    run.manifest()["seeds"] = {{"base", f.seed}, {"trajectories", seeds}};
    run.manifest()["splits"] = {{"train", counts.train}, {"val", counts.val}, {"test", counts.test}};
  });
}

struct Dataset {
  std::vector<Trajectory> train, val, test;
  PdeSpec spec;
};

Dataset load_dataset(RunDir& run, const fs::path& dir, bool need_test) {
  Dataset d;
  d.train = load_split(run, dir, "train", true);
  d.val = load_split(run, dir, "val", false);
  d.test = load_split(run, dir, "test", need_test);
  d.spec = d.train.front().spec;
  check_same_grid(d.train, d.spec);
  check_same_grid(d.val, d.spec);
  check_same_grid(d.test, d.spec);
  return d;
}

json checkpoint_meta(const Flags& f, const PdeSpec& spec, const TrainResult& result) {
  return {{"pde", pde_name(spec.kind)},    {"grid", spec.grid},
          {"dx", spec.dx},                 {"periodic_wrap", f.periodic_wrap},
          {"ablation", f.ablate},          {"seed", f.seed},
          {"best_epoch", result.best_epoch}, {"best_score", result.best_score},
          {"optimizer_steps", result.optimizer_steps}};
}

void cmd_train(const Flags& f, const CLI::App& app, std::ostream& out) {
  if (f.data.empty()) {
    throw ConfigError("--data is required");
  }
  const TrainConfig tc = train_config(f);
  RunDir run(f.out, "train", flag_set(app));
  with_run(run, [&] {
    const Dataset d = load_dataset(run, f.data, false);
    const ModelConfig config = model_config(f, d.spec.dim());
    const MeshGraph mesh = mesh_for_spec(d.spec, f.periodic_wrap);
    ModelParams params = init_params(config, f.seed);
    run.manifest()["seeds"] = train_seeds(f);
    run.manifest()["parameters"] = count_parameters(config).total;
    const auto result = train(params, {&mesh, d.train, d.val}, tc, [&](const MetricsRecord& r) {
      out << "epoch " << r.epoch << ' ' << r.split << ' ' << r.metric << ' ' << format_value(r.value)
          << '\n';
    });
    save_checkpoint(run.file("checkpoint.bin"), result.best, checkpoint_meta(f, d.spec, result));
    write_metrics_csv(run.file("metrics.csv"), result.records);
    out << "best epoch " << result.best_epoch << " score " << format_value(result.best_score) << '\n';
  });
}

void cmd_eval(const Flags& f, const CLI::App& app, std::ostream& out) {
  if (f.data.empty() || f.checkpoint.empty()) {
    throw ConfigError("--data and --checkpoint are required");
  }
  RunDir run(f.out, "eval", flag_set(app));
  with_run(run, [&] {
    run.input(f.checkpoint);
    const Checkpoint ckpt = load_checkpoint(f.checkpoint);
    const auto truths = load_split(run, f.data, f.split, true);
    check_same_grid(truths, truths.front().spec);
    const bool wrap = ckpt.meta.value("periodic_wrap", false);
    const MeshGraph mesh = mesh_for_spec(truths.front().spec, wrap);

    std::vector<double> per_step(f.horizon, 0.0);
    for (std::size_t k = 0; k < truths.size(); ++k) {
      const auto r = rollout(ckpt.params, mesh, truths[k], f.horizon, f.start);
      for (std::size_t s = 0; s < f.horizon; ++s) per_step[s] += r.step_rmse[s];
      if (f.export_frames) {
        Trajectory pred;
        pred.spec = truths[k].spec;
        pred.spec.steps = f.horizon + 1;
        pred.ic = truths[k].ic;
        pred.seed = truths[k].seed;
        pred.stride = truths[k].stride;
        pred.source = "model";
        pred.frames = r.frames;
        save_trajectory(run.file(indexed("pred", k, kTrajectoryExt)), pred);
      }
    }
    std::vector<std::string> rows;
    double mean = 0.0;
    for (std::size_t s = 0; s < f.horizon; ++s) {
      per_step[s] /= static_cast<double>(truths.size());
      mean += per_step[s];
      rows.push_back(std::to_string(s + 1) + "," + format_value(per_step[s]));
    }
    mean /= static_cast<double>(f.horizon);
    write_csv(run.file("rollout.csv"), "step,rmse", rows);

    const double one_step = evaluate_one_step(ckpt.params, mesh, truths);
    write_csv(run.file("summary.csv"), "metric,value",
              {"one_step_rmse," + format_value(one_step), "rollout_mean_rmse," + format_value(mean),
               "rollout_final_rmse," + format_value(per_step.back()),
               "trajectories," + std::to_string(truths.size()), "horizon," + std::to_string(f.horizon)});
    out << "one-step rmse " << format_value(one_step) << ", rollout mean rmse " << format_value(mean)
        << " over " << f.horizon << " steps\n";
  });
}

void cmd_sweep(const Flags& f, const CLI::App& app, std::ostream& out) {
  if (f.data.empty()) {
    throw ConfigError("--data is required");
  }
  const TrainConfig tc = train_config(f);
  RunDir run(f.out, "sweep", flag_set(app));
  with_run(run, [&] {
    const Dataset d = load_dataset(run, f.data, false);
    const MeshGraph mesh = mesh_for_spec(d.spec, f.periodic_wrap);
    const auto& scored = d.test.empty() ? (d.val.empty() ? d.train : d.val) : d.test;
    run.manifest()["seeds"] = train_seeds(f);
    run.manifest()["scored_split"] = d.test.empty() ? (d.val.empty() ? "train" : "val") : "test";
    std::vector<std::string> rows;
    for (std::size_t windows : {1u, 2u, 4u, 8u, 16u}) {
      Flags variant = f;
      variant.windows = windows;
      const ModelConfig config = model_config(variant, d.spec.dim());
      if (!config.fe_enabled) {
        throw ConfigError("sweep varies the FE window count; it cannot run with FE disabled");
      }
      ModelParams params = init_params(config, f.seed);
      const auto result = train(params, {&mesh, d.train, d.val}, tc);
      const double rmse = evaluate_one_step(result.best, mesh, scored);
      const auto counts = count_parameters(config);
      rows.push_back(std::to_string(windows) + "," + std::to_string(config.window_dim()) + "," +
                     std::to_string(counts.fe_layers) + "," + std::to_string(counts.total) + "," +
                     format_value(rmse));
      out << "n_windows " << windows << ": fe parameters " << counts.fe_layers << ", one-step rmse "
          << format_value(rmse) << '\n';
    }
    write_csv(run.file("sweep.csv"), "n_windows,window_dim,fe_parameters,total_parameters,one_step_rmse",
              rows);
  });
}

void print_channel_stats(std::ostream& out, const Trajectory& t) {
  for (std::size_t c = 0; c < kFieldChannels; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = c; k < t.frames.size(); k += kFieldChannels, ++n) {
      lo = std::min(lo, t.frames[k]);
      hi = std::max(hi, t.frames[k]);
      sum += t.frames[k];
    }
    out << "channel " << c << ": min " << format_value(lo) << " max " << format_value(hi) << " mean "
        << format_value(n ? sum / static_cast<double>(n) : 0.0) << '\n';
  }
}

std::string shape_text(const std::vector<std::size_t>& dims) {
  std::string s = "(";
  for (std::size_t k = 0; k < dims.size(); ++k) s += (k ? ", " : "") + std::to_string(dims[k]);
  return s + ")";
}

void cmd_inspect(const Flags& f, std::ostream& out) {
  const fs::path path = f.path;
  const json header = io::peek_header(path);
  const std::string format = header.value("format", "");
  out << "file: " << path.string() << '\n' << "manifest: " << header.dump() << '\n';
  if (format == "cegnn-trajectory") {
    const Trajectory t = load_trajectory(path);
    std::vector<std::size_t> dims{t.frame_count()};
    dims.insert(dims.end(), t.spec.grid.begin(), t.spec.grid.end());
    dims.push_back(kFieldChannels);
    out << "shape: " << shape_text(dims) << '\n';
    print_channel_stats(out, t);
  } else if (format == "cegnn-checkpoint") {
    const Checkpoint ckpt = load_checkpoint(path);
    std::size_t total = 0;
    for (const auto& [name, t] : ckpt.params.named_parameters()) {
      out << name << ' ' << shape_string(t.shape()) << '\n';
      total += t.size();
    }
    std::size_t masks = 0;
    for (const auto& [name, t] : ckpt.params.named_masks()) masks += t.size();
    out << "parameters: " << total << '\n' << "frozen mask entries: " << masks << '\n';
  } else if (format == "cegnn-params") {
    std::size_t total = 0;
    for (const auto& [name, t] : load_tensors(path)) {
      out << name << ' ' << shape_string(t.shape()) << '\n';
      total += t.size();
    }
    out << "parameters: " << total << '\n';
  } else if (format == "cegnn-mesh") {
    const MeshGraph mesh = load_mesh(path);
    out << "dim: " << mesh.dim << "\nnodes: " << mesh.node_count()
        << "\ndirected edges: " << mesh.edge_count() << "\ncells: " << mesh.cell_count() << '\n';
  } else {
    throw IoError(path.string() + ": unknown format '" + format + "'");
  }
}

// ---------------------------------------------------------------- flag wiring

void add_data_flags(CLI::App* app, Flags& f) {
  app->add_option("--pde", f.pde, "burgers, fn or gs")->check(CLI::IsMember({"burgers", "fn", "gs"}));
  app->add_option("--dim", f.dim, "spatial dimension")->check(CLI::IsMember({2, 3}));
  app->add_option("--grid", f.grid, "nodes per axis (0 = recipe)");
  app->add_option("--dx", f.dx, "grid spacing (0 = recipe)");
  app->add_option("--dt", f.dt, "solver step (0 = recipe)");
  app->add_option("--steps", f.steps, "stored frames per trajectory (0 = recipe)");
  app->add_option("--stride", f.stride, "solver steps between stored frames")->check(CLI::PositiveNumber);
  app->add_option("--ic", f.ic, "gaussian or blocks (default by PDE)")
      ->check(CLI::IsMember({"gaussian", "blocks"}));
  app->add_option("--ic-mean", f.ic_mean, "gaussian IC mean");
  app->add_option("--ic-std", f.ic_std, "gaussian IC standard deviation");
  app->add_option("--train", f.n_train, "training trajectories");
  app->add_option("--val", f.n_val, "validation trajectories");
  app->add_option("--test", f.n_test, "test trajectories");
}

void add_model_flags(CLI::App* app, Flags& f) {
  app->add_option("--layers", f.layers, "message-passing layers");
  app->add_option("--latent-dim", f.latent_dim, "latent width D");
  app->add_option("--windows", f.windows, "FE window count");
  app->add_option("--mask-keep", f.mask_keep, "FE mask keep probability");
  app->add_option("--mlp-depth", f.mlp_depth, "hidden layers per MLP");
  app->add_option("--mlp-hidden", f.mlp_hidden, "hidden width (0 = latent dim)");
  app->add_flag("--no-residual", f.no_residual, "drop residual connections");
  app->add_option("--ablate", f.ablate, "none, no-cell, no-fe or no-cell-no-fe")
      ->check(CLI::IsMember({"none", "no-cell", "no-fe", "no-cell-no-fe"}));
}

void add_train_flags(CLI::App* app, Flags& f) {
  app->add_option("--lr", f.lr, "Adam learning rate");
  app->add_option("--lr-decay", f.lr_decay, "per-step learning-rate factor");
  app->add_option("--batch", f.batch, "pairs per optimizer step");
  app->add_option("--noise-std", f.noise_std, "input noise standard deviation");
  app->add_option("--epochs", f.epochs, "training epochs");
  app->add_option("--max-steps", f.max_steps, "optimizer step budget (0 = none)");
  app->add_flag("--periodic-wrap", f.periodic_wrap, "connect the training mesh across the domain edge");
}

int report(std::ostream& err, int code, const std::string& what) {
  err << "error: " << what << '\n';
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cell-embedded graph network solver: data generation, training and evaluation", "cegnn"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("generate", "solve a PDE and write train/val/test trajectories");
  add_data_flags(gen, f);
  gen->add_option("--seed", f.seed, "base seed for initial conditions");
  gen->add_option("--out", f.out, "fresh output directory")->required();

  auto* tr = app.add_subcommand("train", "train a model on a generated dataset");
  tr->add_option("--data", f.data, "directory written by generate")->required();
  add_model_flags(tr, f);
  add_train_flags(tr, f);
  tr->add_option("--seed", f.seed, "initialization and training seed");
  tr->add_option("--out", f.out, "fresh output directory")->required();

  auto* ev = app.add_subcommand("eval", "autoregressive rollout of a checkpoint");
  ev->add_option("--checkpoint", f.checkpoint, "checkpoint written by train")->required();
  ev->add_option("--data", f.data, "directory written by generate")->required();
  ev->add_option("--split", f.split, "trajectory split to roll out")
      ->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--horizon", f.horizon, "rollout steps")->check(CLI::PositiveNumber);
  ev->add_option("--start", f.start, "first frame of the rollout");
  ev->add_flag("--export-frames", f.export_frames, "write predicted trajectories");
  ev->add_option("--out", f.out, "fresh output directory")->required();

  auto* sw = app.add_subcommand("sweep", "train each FE window count in {1, 2, 4, 8, 16}");
  sw->add_option("--data", f.data, "directory written by generate")->required();
  add_model_flags(sw, f);
  add_train_flags(sw, f);
  sw->add_option("--seed", f.seed, "initialization and training seed");
  sw->add_option("--out", f.out, "fresh output directory")->required();

  auto* in = app.add_subcommand("inspect", "summarize an artifact file");
  in->add_option("path", f.path, "trajectory, checkpoint, parameter or mesh file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) cmd_generate(f, *gen, out);
    if (*tr) cmd_train(f, *tr, out);
    if (*ev) cmd_eval(f, *ev, out);
    if (*sw) cmd_sweep(f, *sw, out);
    if (*in) cmd_inspect(f, out);
  } catch (const NumericError& e) {
    return report(err, kExitNumeric, e.what());
  } catch (const IoError& e) {
    return report(err, kExitIo, e.what());
  } catch (const fs::filesystem_error& e) {
    return report(err, kExitIo, e.what());
  } catch (const Error& e) {
    return report(err, kExitUsage, e.what());
  } catch (const std::exception& e) {
    return report(err, kExitUsage, e.what());
  }
  return kExitOk;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace cegnn::cli

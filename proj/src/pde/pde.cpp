#include "cegnn/pde.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "cegnn/binary_io.hpp"
#include "cegnn/error.hpp"

namespace cegnn {

std::string pde_name(PdeKind kind) {
  switch (kind) {
    case PdeKind::kBurgers: return "burgers";
    case PdeKind::kFitzHughNagumo: return "fn";
    case PdeKind::kGrayScott: return "gs";
  }
  return "?";
}

PdeKind parse_pde(const std::string& name) {
  if (name == "burgers") return PdeKind::kBurgers;
  if (name == "fn") return PdeKind::kFitzHughNagumo;
  if (name == "gs") return PdeKind::kGrayScott;
  throw ConfigError("unknown PDE '" + name + "' (expected burgers, fn or gs)");
}

std::string ic_name(IcKind kind) { return kind == IcKind::kGaussian ? "gaussian" : "blocks"; }

IcKind parse_ic(const std::string& name) {
  if (name == "gaussian") return IcKind::kGaussian;
  if (name == "blocks") return IcKind::kBlocks;
  throw ConfigError("unknown initial condition '" + name + "' (expected gaussian or blocks)");
}

std::size_t PdeSpec::node_count() const {
  std::size_t n = 1;
  for (std::size_t c : grid) n *= c;
  return n;
}

PdeSpec default_spec(PdeKind kind, std::size_t dim) {
  if (dim != 2 && !(dim == 3 && kind == PdeKind::kGrayScott)) {
    throw ConfigError(pde_name(kind) + " has no " + std::to_string(dim) + "-D recipe");
  }
  PdeSpec spec;
  spec.kind = kind;
  switch (kind) {
    case PdeKind::kBurgers:
      spec.grid = {50, 50};
      spec.dx = 0.02;
      spec.dt = 0.001;
      spec.diffusion_u = 0.01;
      spec.diffusion_v = 0.01;
      spec.steps = 1000;
      break;
    case PdeKind::kFitzHughNagumo:
      spec.grid = {128, 128};
      spec.dx = 1.0;
      spec.dt = 0.002;
      spec.diffusion_u = 1.0;
      spec.diffusion_v = 100.0;
      spec.alpha = 0.01;
      spec.beta = 0.25;
      spec.steps = 3000;
      break;
    case PdeKind::kGrayScott:
      spec.grid = dim == 3 ? std::vector<std::size_t>{24, 24, 24} : std::vector<std::size_t>{48, 48};
      spec.dx = 2.0;
      spec.dt = 0.25;
      spec.diffusion_u = 0.2;
      spec.diffusion_v = 0.1;
      spec.alpha = 0.025;
      spec.beta = 0.055;
      spec.steps = 3000;
      break;
  }
  return spec;
}

void validate(const PdeSpec& spec) {
  const std::size_t dim = spec.dim();
  if (dim != 2 && dim != 3) {
    throw ConfigError("PDE grid must be 2-D or 3-D");
  }
  if (dim == 3 && spec.kind != PdeKind::kGrayScott) {
    throw ConfigError(pde_name(spec.kind) + " is only defined in 2-D");
  }
  for (std::size_t c : spec.grid) {
    if (c < 3) throw ConfigError("periodic stencils need at least 3 nodes per axis");
  }
  if (!(spec.dt > 0.0) || !(spec.dx > 0.0) || !std::isfinite(spec.dt) || !std::isfinite(spec.dx)) {
    throw ConfigError("dt and dx must be positive and finite");
  }
  for (double c : {spec.diffusion_u, spec.diffusion_v, spec.alpha, spec.beta}) {
    if (!std::isfinite(c)) throw ConfigError("PDE coefficients must be finite");
  }
  if (spec.steps < 1) {
    throw ConfigError("trajectory needs at least one frame");
  }
}

namespace {

struct AxisWalk {
  std::size_t stride;
  std::size_t count;
};

std::vector<AxisWalk> axis_walks(std::span<const std::size_t> grid) {
  std::vector<AxisWalk> walks(grid.size());
  std::size_t stride = 1;
  for (std::size_t a = grid.size(); a-- > 0;) {
    walks[a] = {stride, grid[a]};
    stride *= grid[a];
  }
  return walks;
}

void check_grid(std::span<const double> field, std::span<const std::size_t> grid,
                std::size_t channels) {
  std::size_t n = 1;
  for (std::size_t c : grid) {
    if (c < 3) throw ShapeError("periodic stencil needs at least 3 nodes per axis");
    n *= c;
  }
  if (field.size() != n * channels) {
    throw ShapeError("field length " + std::to_string(field.size()) + " does not match grid");
  }
}

std::size_t plus_neighbor(std::size_t node, const AxisWalk& w) {
  const std::size_t coord = (node / w.stride) % w.count;
  return coord + 1 < w.count ? node + w.stride : node - (w.count - 1) * w.stride;
}

std::size_t minus_neighbor(std::size_t node, const AxisWalk& w) {
  const std::size_t coord = (node / w.stride) % w.count;
  return coord > 0 ? node - w.stride : node + (w.count - 1) * w.stride;
}

}  // namespace

std::vector<double> laplacian_periodic(std::span<const double> field,
                                       std::span<const std::size_t> grid, std::size_t channels,
                                       double dx) {
  check_grid(field, grid, channels);
  const auto walks = axis_walks(grid);
  const std::size_t nodes = field.size() / channels;
  const double inv_dx2 = 1.0 / (dx * dx);
  const double center_weight = 2.0 * static_cast<double>(grid.size());
  std::vector<double> out(field.size());
  for (std::size_t node = 0; node < nodes; ++node) {
    for (std::size_t ch = 0; ch < channels; ++ch) {
      double acc = 0.0;
      for (const auto& w : walks) {
        acc += field[plus_neighbor(node, w) * channels + ch] + field[minus_neighbor(node, w) * channels + ch];
      }
      out[node * channels + ch] = (acc - center_weight * field[node * channels + ch]) * inv_dx2;
    }
  }
  return out;
}

std::vector<double> gradient_periodic(std::span<const double> field,
                                      std::span<const std::size_t> grid, std::size_t channels,
                                      double dx, std::size_t axis) {
  check_grid(field, grid, channels);
  if (axis >= grid.size()) {
    throw ShapeError("gradient axis out of range");
  }
  const auto w = axis_walks(grid)[axis];
  const std::size_t nodes = field.size() / channels;
  const double inv = 1.0 / (2.0 * dx);
  std::vector<double> out(field.size());
  for (std::size_t node = 0; node < nodes; ++node) {
    const std::size_t up = plus_neighbor(node, w) * channels;
    const std::size_t down = minus_neighbor(node, w) * channels;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      out[node * channels + ch] = (field[up + ch] - field[down + ch]) * inv;
    }
  }
  return out;
}

std::vector<double> rhs(const PdeSpec& spec, std::span<const double> values) {
  if (values.size() != spec.node_count() * kFieldChannels) {
    throw ShapeError("state length does not match the PDE grid");
  }
  const std::size_t nodes = spec.node_count();
  auto out = laplacian_periodic(values, spec.grid, kFieldChannels, spec.dx);
  for (std::size_t i = 0; i < nodes; ++i) {
    out[2 * i] *= spec.diffusion_u;
    out[2 * i + 1] *= spec.diffusion_v;
  }
  switch (spec.kind) {
    case PdeKind::kBurgers: {
      const auto ddx = gradient_periodic(values, spec.grid, kFieldChannels, spec.dx, 0);
      const auto ddy = gradient_periodic(values, spec.grid, kFieldChannels, spec.dx, 1);
      for (std::size_t i = 0; i < nodes; ++i) {
        const double u = values[2 * i], v = values[2 * i + 1];
        out[2 * i] -= u * ddx[2 * i] + v * ddy[2 * i];
        out[2 * i + 1] -= u * ddx[2 * i + 1] + v * ddy[2 * i + 1];
      }
      break;
    }
    case PdeKind::kFitzHughNagumo:
      for (std::size_t i = 0; i < nodes; ++i) {
        const double u = values[2 * i], v = values[2 * i + 1];
        out[2 * i] += u - u * u * u - v * v * v + spec.alpha;
        out[2 * i + 1] += (u - v) * spec.beta;
      }
      break;
    case PdeKind::kGrayScott:
      for (std::size_t i = 0; i < nodes; ++i) {
        const double u = values[2 * i], v = values[2 * i + 1];
        const double uvv = u * v * v;
        out[2 * i] += -uvv + spec.alpha * (1.0 - u);
        out[2 * i + 1] += uvv - (spec.beta + spec.alpha) * v;
      }
      break;
  }
  return out;
}

FieldState rk4_step(const PdeSpec& spec, const FieldState& state) {
  FieldState next;
  next.values = rk4_advance([&spec](std::span<const double> y) { return rhs(spec, y); },
                            state.values, spec.dt);
  next.time = state.time + spec.dt;
  for (double v : next.values) {
    if (!std::isfinite(v)) {
      throw NumericError("rk4_step: non-finite state at t=" + std::to_string(next.time));
    }
  }
  return next;
}

std::size_t block_side(std::size_t count) { return std::min(count, std::max<std::size_t>(2, count / 6)); }

FieldState sample_ic(const IcOptions& options, const PdeSpec& spec, std::uint64_t seed) {
  validate(spec);
  std::mt19937_64 rng(seed);
  FieldState state;
  const std::size_t nodes = spec.node_count();
  state.values.resize(nodes * kFieldChannels);
  if (options.kind == IcKind::kGaussian) {
    if (options.stddev < 0.0) {
      throw ConfigError("initial-condition stddev must be non-negative");
    }
    if (options.stddev == 0.0) {
      std::fill(state.values.begin(), state.values.end(), options.mean);
    } else {
      std::normal_distribution<double> normal(options.mean, options.stddev);
      for (double& v : state.values) v = normal(rng);
    }
    return state;
  }
  for (std::size_t i = 0; i < nodes; ++i) {
    state.values[2 * i] = 1.0;
    state.values[2 * i + 1] = 0.0;
  }
  const auto walks = axis_walks(spec.grid);
  const std::size_t blocks = std::uniform_int_distribution<std::size_t>(1, 2)(rng);
  for (std::size_t b = 0; b < blocks; ++b) {
    std::vector<std::size_t> origin(spec.dim());
    for (std::size_t a = 0; a < spec.dim(); ++a) {
      origin[a] = std::uniform_int_distribution<std::size_t>(0, spec.grid[a] - 1)(rng);
    }
    for (std::size_t node = 0; node < nodes; ++node) {
      bool inside = true;
      for (std::size_t a = 0; a < spec.dim() && inside; ++a) {
        const std::size_t coord = (node / walks[a].stride) % walks[a].count;
        const std::size_t rel = (coord + spec.grid[a] - origin[a]) % spec.grid[a];
        inside = rel < block_side(spec.grid[a]);
      }
      if (inside) {
        state.values[2 * node] = 0.5;
        state.values[2 * node + 1] = 0.25;
      }
    }
  }
  return state;
}

std::size_t Trajectory::frame_count() const {
  return frame_size() == 0 ? 0 : frames.size() / frame_size();
}

std::span<const double> Trajectory::frame(std::size_t index) const {
  if (index >= frame_count()) {
    throw ShapeError("frame " + std::to_string(index) + " out of range " +
                     std::to_string(frame_count()));
  }
  return {frames.data() + index * frame_size(), frame_size()};
}

Trajectory generate_trajectory(const PdeSpec& spec, const FieldState& initial, std::size_t stride) {
  validate(spec);
  if (stride < 1) {
    throw ConfigError("stride must be at least 1");
  }
  if (initial.values.size() != spec.node_count() * kFieldChannels) {
    throw ShapeError("initial state does not match the PDE grid");
  }
  Trajectory trajectory;
  trajectory.spec = spec;
  trajectory.stride = stride;
  trajectory.frames.reserve(spec.steps * trajectory.frame_size());
  trajectory.frames.insert(trajectory.frames.end(), initial.values.begin(), initial.values.end());
  FieldState state = initial;
  std::size_t solver_step = 0;
  for (std::size_t frame = 1; frame < spec.steps; ++frame) {
    for (std::size_t s = 0; s < stride; ++s) {
      ++solver_step;
      try {
        state = rk4_step(spec, state);
      } catch (const NumericError& e) {
        throw NumericError("blow-up at solver step " + std::to_string(solver_step) + ": " + e.what());
      }
    }
    trajectory.frames.insert(trajectory.frames.end(), state.values.begin(), state.values.end());
  }
  return trajectory;
}

namespace {

nlohmann::json trajectory_header(const Trajectory& t) {
  return {{"format", "cegnn-trajectory"},
          {"version", 1},
          {"name", pde_name(t.spec.kind)},
          {"dim", t.spec.dim()},
          {"grid", t.spec.grid},
          {"dx", t.spec.dx},
          {"dt", t.spec.dt},
          {"steps", t.spec.steps},
          {"stride", t.stride},
          {"seed", t.seed},
          {"ic_kind", ic_name(t.ic.kind)},
          {"ic_mean", t.ic.mean},
          {"ic_std", t.ic.stddev},
          {"channels", kFieldChannels},
          {"source", t.source},
          {"coefficients",
           {{"D_u", t.spec.diffusion_u}, {"D_v", t.spec.diffusion_v}, {"alpha", t.spec.alpha},
            {"beta", t.spec.beta}}}};
}

}  // namespace

void save_trajectory(const std::filesystem::path& path, const Trajectory& trajectory) {
  if (trajectory.frames.size() != trajectory.spec.steps * trajectory.frame_size()) {
    throw ShapeError("trajectory holds " + std::to_string(trajectory.frames.size()) +
                     " values, expected steps * grid * 2");
  }
  auto out = io::open_for_write(path);
  io::write_header(out, trajectory_header(trajectory));
  io::write_f64(out, trajectory.frames);
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  auto in = io::open_for_read(path);
  const auto h = io::read_header(in);
  if (h.value("format", "") != "cegnn-trajectory") {
    throw IoError(path.string() + " is not a trajectory file");
  }
  Trajectory t;
  try {
    t.spec.kind = parse_pde(h.at("name"));
    t.spec.grid = h.at("grid").get<std::vector<std::size_t>>();
    t.spec.dx = h.at("dx");
    t.spec.dt = h.at("dt");
    t.spec.steps = h.at("steps");
    const auto& c = h.at("coefficients");
    t.spec.diffusion_u = c.at("D_u");
    t.spec.diffusion_v = c.at("D_v");
    t.spec.alpha = c.at("alpha");
    t.spec.beta = c.at("beta");
    t.stride = h.at("stride");
    t.seed = h.at("seed");
    t.ic.kind = parse_ic(h.at("ic_kind"));
    t.ic.mean = h.at("ic_mean");
    t.ic.stddev = h.at("ic_std");
    t.source = h.at("source");
    if (h.at("channels").get<std::size_t>() != kFieldChannels ||
        h.at("dim").get<std::size_t>() != t.spec.dim()) {
      throw IoError("inconsistent trajectory manifest");
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("trajectory manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw IoError(std::string("trajectory manifest: ") + e.what());
  }
  const std::size_t expected = t.spec.steps * t.frame_size();
  if (io::remaining_bytes(in) != expected * sizeof(double)) {
    throw IoError("length mismatch: payload has " + std::to_string(io::remaining_bytes(in)) +
                  " bytes, manifest implies " + std::to_string(expected * sizeof(double)));
  }
  t.frames = io::read_f64(in, expected);
  return t;
}

}  // namespace cegnn

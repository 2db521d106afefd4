#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cegnn {

enum class PdeKind { kBurgers, kFitzHughNagumo, kGrayScott };

std::string pde_name(PdeKind kind);
PdeKind parse_pde(const std::string& name);

/// Periodic two-channel reaction/convection-diffusion problem on a regular grid.
struct PdeSpec {
  PdeKind kind = PdeKind::kBurgers;
  std::vector<std::size_t> grid;  // nodes per axis; dimension = grid.size()
  double dx = 1.0;
  double dt = 1.0;
  double diffusion_u = 0.0;
  double diffusion_v = 0.0;
  double alpha = 0.0;  // FN forcing / GS feed rate
  double beta = 0.0;   // FN coupling / GS kill rate
  std::size_t steps = 1;  // stored frames per trajectory

  std::size_t dim() const { return grid.size(); }
  std::size_t node_count() const;
};

/// Dataset recipes: Burgers 50^2, FN 128^2, GS 48^2 or 24^3.
PdeSpec default_spec(PdeKind kind, std::size_t dim = 2);

/// Throws ConfigError on non-positive dt/dx, non-finite coefficients, a
/// grid smaller than 3 per axis, or an unsupported kind/dimension pair.
void validate(const PdeSpec& spec);

inline constexpr std::size_t kFieldChannels = 2;

/// Node-major (row-major over the grid, axis 0 slowest), channels last.
struct FieldState {
  std::vector<double> values;
  double time = 0.0;
};

/// Second-order central Laplacian with periodic wrap, applied per channel.
std::vector<double> laplacian_periodic(std::span<const double> field,
                                       std::span<const std::size_t> grid, std::size_t channels,
                                       double dx);

/// Central first derivative (f[i+1] - f[i-1]) / (2 dx) along `axis`.
std::vector<double> gradient_periodic(std::span<const double> field,
                                      std::span<const std::size_t> grid, std::size_t channels,
                                      double dx, std::size_t axis);

/// Time derivative of the named system.
///   burgers: u_t = D u_lap - (u . grad) u         (velocity components u, v)
///   fn:      u_t = Du lap u + u - u^3 - v^3 + alpha,  v_t = Dv lap v + (u - v) beta
///   gs:      u_t = Du lap u - u v^2 + alpha (1 - u),   v_t = Dv lap v + u v^2 - (beta + alpha) v
std::vector<double> rhs(const PdeSpec& spec, std::span<const double> values);

/// One classical RK4 step of y' = f(y). `f` maps a state span to its derivative.
template <class Rhs>
std::vector<double> rk4_advance(Rhs&& f, std::span<const double> y, double h) {
  const std::size_t n = y.size();
  std::vector<double> stage(n);
  const auto k1 = f(y);
  for (std::size_t i = 0; i < n; ++i) stage[i] = y[i] + 0.5 * h * k1[i];
  const auto k2 = f(std::span<const double>(stage));
  for (std::size_t i = 0; i < n; ++i) stage[i] = y[i] + 0.5 * h * k2[i];
  const auto k3 = f(std::span<const double>(stage));
  for (std::size_t i = 0; i < n; ++i) stage[i] = y[i] + h * k3[i];
  const auto k4 = f(std::span<const double>(stage));
  std::vector<double> next(n);
  for (std::size_t i = 0; i < n; ++i) {
    next[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  }
  return next;
}

/// Advances by spec.dt. Throws NumericError if the new state is not finite.
FieldState rk4_step(const PdeSpec& spec, const FieldState& state);

enum class IcKind { kGaussian, kBlocks };

std::string ic_name(IcKind kind);
IcKind parse_ic(const std::string& name);

struct IcOptions {
  IcKind kind = IcKind::kGaussian;
  double mean = 0.0;
  double stddev = 0.3;
};

/// gaussian: i.i.d. normal per node and channel.
/// blocks: (u, v) = (1, 0) background with one or two axis-aligned blocks of
/// side max(2, n/6) set to (0.5, 0.25), placed with periodic wrap.
FieldState sample_ic(const IcOptions& options, const PdeSpec& spec, std::uint64_t seed);

/// Side length of one seeded block along an axis with `count` nodes.
std::size_t block_side(std::size_t count);

struct Trajectory {
  PdeSpec spec;
  IcOptions ic;
  std::uint64_t seed = 0;
  std::size_t stride = 1;  // solver steps between stored frames
  std::string source = "solver";
  std::vector<double> frames;  // frame-major, then node-major, channels last

  std::size_t frame_count() const;
  std::size_t frame_size() const { return spec.node_count() * kFieldChannels; }
  std::span<const double> frame(std::size_t index) const;
};

/// Stores `initial` as frame 0, then every stride-th RK4 step until
/// spec.steps frames exist. Blow-ups are reported with the solver step index.
Trajectory generate_trajectory(const PdeSpec& spec, const FieldState& initial, std::size_t stride = 1);

void save_trajectory(const std::filesystem::path& path, const Trajectory& trajectory);
Trajectory load_trajectory(const std::filesystem::path& path);

}  // namespace cegnn

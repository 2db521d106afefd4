#include "cegnn/model.hpp"

#include <cmath>
#include <map>
#include <random>

#include "cegnn/binary_io.hpp"
#include "cegnn/error.hpp"
#include "cegnn/ops.hpp"

namespace cegnn {

void validate(const ModelConfig& c) {
  if (c.latent_dim == 0 || c.in_channels == 0 || c.node_type_count == 0) {
    throw ConfigError("latent width, channel count and node-type count must be positive");
  }
  if (c.spatial_dim != 2 && c.spatial_dim != 3) {
    throw ConfigError("spatial dimension must be 2 or 3");
  }
  if (c.n_windows == 0 || c.latent_dim % c.n_windows != 0) {
    throw ConfigError("window count " + std::to_string(c.n_windows) +
                      " must divide latent width " + std::to_string(c.latent_dim));
  }
  if (!(c.mask_keep_prob > 0.0 && c.mask_keep_prob <= 1.0)) {
    throw ConfigError("mask keep probability must lie in (0, 1]");
  }
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"layers", c.layers},
          {"latent_dim", c.latent_dim},
          {"fe_enabled", c.fe_enabled},
          {"cell_enabled", c.cell_enabled},
          {"n_windows", c.n_windows},
          {"mask_keep_prob", c.mask_keep_prob},
          {"mlp_hidden", c.mlp_hidden},
          {"mlp_depth", c.mlp_depth},
          {"residual", c.residual},
          {"in_channels", c.in_channels},
          {"node_type_count", c.node_type_count},
          {"spatial_dim", c.spatial_dim}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.layers = j.at("layers");
    c.latent_dim = j.at("latent_dim");
    c.fe_enabled = j.at("fe_enabled");
    c.cell_enabled = j.at("cell_enabled");
    c.n_windows = j.at("n_windows");
    c.mask_keep_prob = j.at("mask_keep_prob");
    c.mlp_hidden = j.at("mlp_hidden");
    c.mlp_depth = j.at("mlp_depth");
    c.residual = j.at("residual");
    c.in_channels = j.at("in_channels");
    c.node_type_count = j.at("node_type_count");
    c.spatial_dim = j.at("spatial_dim");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  validate(c);
  return c;
}

Ablation parse_ablation(const std::string& name) {
  if (name == "none") return Ablation::kNone;
  if (name == "no-cell") return Ablation::kNoCell;
  if (name == "no-fe") return Ablation::kNoFe;
  if (name == "no-cell-no-fe") return Ablation::kNoCellNoFe;
  throw ConfigError("unknown ablation '" + name + "'");
}

std::string ablation_name(Ablation ablation) {
  switch (ablation) {
    case Ablation::kNone: return "none";
    case Ablation::kNoCell: return "no-cell";
    case Ablation::kNoFe: return "no-fe";
    case Ablation::kNoCellNoFe: return "no-cell-no-fe";
  }
  return "?";
}

ModelConfig apply_ablation(ModelConfig config, Ablation ablation) {
  config.cell_enabled = ablation == Ablation::kNone || ablation == Ablation::kNoFe;
  config.fe_enabled = ablation == Ablation::kNone || ablation == Ablation::kNoCell;
  return config;
}

Tensor Mlp::operator()(const Tensor& x) const {
  Tensor y = x;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    y = linear(y, weights[k], biases[k]);
    if (k + 1 < weights.size()) {
      y = relu(y);
    }
  }
  if (norm) {
    y = layer_norm(y, norm->first, norm->second);
  }
  return y;
}

namespace {

// Encoder and processor MLP input widths.
std::size_t node_encoder_in(const ModelConfig& c) {
  return c.in_channels + c.node_type_count + c.spatial_dim;
}
std::size_t edge_encoder_in(const ModelConfig& c) { return edge_raw_width(c.spatial_dim); }
std::size_t cell_encoder_in(const ModelConfig& c) { return cell_raw_width(c.spatial_dim); }
std::size_t cell_update_in(const ModelConfig& c) { return (c.vertices_per_cell() + 1) * c.latent_dim; }
std::size_t edge_update_in(const ModelConfig& c) { return 3 * c.latent_dim; }
// The node MLP keeps its cell-aggregate slot when cells are disabled; the slot is fed zeros.
std::size_t node_update_in(const ModelConfig& c) { return 3 * c.latent_dim; }

std::vector<std::size_t> mlp_widths(std::size_t in, std::size_t out, const ModelConfig& c) {
  std::vector<std::size_t> widths{in};
  for (std::size_t k = 0; k < c.mlp_depth; ++k) widths.push_back(c.hidden());
  widths.push_back(out);
  return widths;
}

std::size_t mlp_count(std::size_t in, std::size_t out, bool norm, const ModelConfig& c) {
  const auto widths = mlp_widths(in, out, c);
  std::size_t total = 0;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    total += widths[k] * widths[k + 1] + widths[k + 1];
  }
  return total + (norm ? 2 * out : 0);
}

class Initializer {
 public:
  Initializer(const ModelConfig& config, std::uint64_t seed) : config_(config), rng_(seed) {}

  Mlp mlp(std::size_t in, std::size_t out, bool norm) {
    Mlp m;
    const auto widths = mlp_widths(in, out, config_);
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
      const double bound = std::sqrt(6.0 / static_cast<double>(widths[k] + widths[k + 1]));
      m.weights.push_back(uniform({widths[k], widths[k + 1]}, bound));
      m.biases.push_back(Tensor::zeros({widths[k + 1]}, true));
    }
    if (norm) {
      m.norm.emplace(Tensor::full({out}, 1.0, true), Tensor::zeros({out}, true));
    }
    return m;
  }

  FeBlock fe() {
    FeBlock block;
    const std::size_t w = config_.window_dim();
    std::bernoulli_distribution keep(config_.mask_keep_prob);
    // Glorot over (w*w inputs, w outputs), then scaled by 1/w
    const double bound = std::sqrt(6.0 / static_cast<double>(w * w + w)) / static_cast<double>(w);
    for (std::size_t k = 0; k < config_.n_windows; ++k) {
      block.weights.push_back(uniform({w, w, w}, bound));
      std::vector<double> mask(w * w);
      for (double& m : mask) m = keep(rng_) ? 1.0 : 0.0;
      block.masks.push_back(Tensor::from({w, w}, std::move(mask), false));
    }
    return block;
  }

 private:
  Tensor uniform(Shape shape, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> values(numel(shape));
    for (double& v : values) v = dist(rng_);
    return Tensor::from(std::move(shape), std::move(values), true);
  }

  const ModelConfig& config_;
  std::mt19937_64 rng_;
};

void append_mlp(NamedTensors& out, const std::string& prefix, const Mlp& mlp) {
  for (std::size_t k = 0; k < mlp.weights.size(); ++k) {
    out.emplace_back(prefix + ".linear" + std::to_string(k) + ".weight", mlp.weights[k]);
    out.emplace_back(prefix + ".linear" + std::to_string(k) + ".bias", mlp.biases[k]);
  }
  if (mlp.norm) {
    out.emplace_back(prefix + ".norm.gain", mlp.norm->first);
    out.emplace_back(prefix + ".norm.bias", mlp.norm->second);
  }
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  Initializer init(config, seed);
  const std::size_t d = config.latent_dim;
  ModelParams p;
  p.config = config;
  p.node_encoder = init.mlp(node_encoder_in(config), d, true);
  p.edge_encoder = init.mlp(edge_encoder_in(config), d, true);
  if (config.cell_enabled) {
    p.cell_encoder = init.mlp(cell_encoder_in(config), d, true);
  }
  for (std::size_t l = 0; l < config.layers; ++l) {
    LayerParams layer;
    if (config.cell_enabled) {
      layer.cell = init.mlp(cell_update_in(config), d, true);
    }
    layer.edge = init.mlp(edge_update_in(config), d, true);
    layer.node = init.mlp(node_update_in(config), d, true);
    if (config.fe_enabled) {
      layer.fe = init.fe();
    }
    p.layers.push_back(std::move(layer));
  }
  p.decoder = init.mlp(d, config.in_channels, false);
  return p;
}

NamedTensors ModelParams::named_parameters() const {
  NamedTensors out;
  append_mlp(out, "encoder.node", node_encoder);
  append_mlp(out, "encoder.edge", edge_encoder);
  if (cell_encoder) append_mlp(out, "encoder.cell", *cell_encoder);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "processor." + std::to_string(l);
    if (layers[l].cell) append_mlp(out, prefix + ".cell", *layers[l].cell);
    append_mlp(out, prefix + ".edge", layers[l].edge);
    append_mlp(out, prefix + ".node", layers[l].node);
    if (layers[l].fe) {
      for (std::size_t w = 0; w < layers[l].fe->weights.size(); ++w) {
        out.emplace_back(prefix + ".fe.window" + std::to_string(w) + ".weight",
                         layers[l].fe->weights[w]);
      }
    }
  }
  append_mlp(out, "decoder", decoder);
  return out;
}

NamedTensors ModelParams::named_masks() const {
  NamedTensors out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!layers[l].fe) continue;
    for (std::size_t w = 0; w < layers[l].fe->masks.size(); ++w) {
      out.emplace_back("processor." + std::to_string(l) + ".fe.window" + std::to_string(w) + ".mask",
                       layers[l].fe->masks[w]);
    }
  }
  return out;
}

std::vector<Tensor> ModelParams::parameter_list() const {
  std::vector<Tensor> out;
  for (auto& [name, tensor] : named_parameters()) out.push_back(tensor);
  return out;
}

ParameterCounts count_parameters(const ModelConfig& c) {
  validate(c);
  const std::size_t d = c.latent_dim;
  ParameterCounts n;
  n.node_encoder = mlp_count(node_encoder_in(c), d, true, c);
  n.edge_encoder = mlp_count(edge_encoder_in(c), d, true, c);
  if (c.cell_enabled) {
    n.cell_encoder = mlp_count(cell_encoder_in(c), d, true, c);
    n.cell_layers = c.layers * mlp_count(cell_update_in(c), d, true, c);
  }
  n.edge_layers = c.layers * mlp_count(edge_update_in(c), d, true, c);
  n.node_layers = c.layers * mlp_count(node_update_in(c), d, true, c);
  if (c.fe_enabled) {
    const std::size_t w = c.window_dim();
    n.fe_per_layer = c.n_windows * w * w * w;
    n.fe_layers = c.layers * n.fe_per_layer;
    n.mask_entries = c.layers * c.n_windows * w * w;
  }
  n.decoder = mlp_count(d, c.in_channels, false, c);
  n.total = n.node_encoder + n.edge_encoder + n.cell_encoder + n.cell_layers + n.edge_layers +
            n.node_layers + n.fe_layers + n.decoder;
  return n;
}

GraphIndex graph_index(const MeshGraph& mesh) {
  GraphIndex g;
  g.nodes = mesh.node_count();
  g.edge_first.reserve(mesh.edge_count());
  g.edge_second.reserve(mesh.edge_count());
  for (const auto& [i, j] : mesh.edges) {
    g.edge_first.push_back(i);
    g.edge_second.push_back(j);
  }
  const std::size_t per_cell = mesh.vertices_per_cell();
  g.cell_slot.assign(per_cell, {});
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto cell = mesh.cell(c);
    for (std::size_t v = 0; v < per_cell; ++v) {
      g.cell_slot[v].push_back(cell[v]);
      g.member_cell.push_back(c);
      g.member_node.push_back(cell[v]);
    }
  }
  return g;
}

Latents encode(const RawFeatures& raw, const ModelParams& params) {
  const auto& c = params.config;
  if (raw.node.dim(1) != node_encoder_in(c) || raw.edge.dim(1) != edge_encoder_in(c) ||
      (params.cell_encoder && raw.cell.defined() && raw.cell.dim(1) != cell_encoder_in(c))) {
    throw ShapeError("raw feature widths do not match the model configuration");
  }
  Latents z;
  z.node = params.node_encoder(raw.node);
  z.edge = params.edge_encoder(raw.edge);
  if (params.cell_encoder && raw.cell.defined()) {
    z.cell = (*params.cell_encoder)(raw.cell);
  }
  return z;
}

Tensor cell_update(const Tensor& h, const Tensor& c, const GraphIndex& graph,
                   const ModelParams& params, std::size_t layer) {
  const auto& mlp = params.layers.at(layer).cell;
  if (!mlp) {
    throw ConfigError("cell_update called on a model without cells");
  }
  std::vector<Tensor> parts;
  for (const auto& slot : graph.cell_slot) {
    parts.push_back(gather_rows(h, slot));
  }
  parts.push_back(c);
  Tensor out = (*mlp)(concat(parts));
  return params.config.residual ? add(out, c) : out;
}

Tensor edge_update(const Tensor& h, const Tensor& e, const GraphIndex& graph,
                   const ModelParams& params, std::size_t layer) {
  Tensor out = params.layers.at(layer).edge(
      concat({gather_rows(h, graph.edge_first), gather_rows(h, graph.edge_second), e}));
  return params.config.residual ? add(out, e) : out;
}

Tensor node_update(const Tensor& h, const Tensor& e_new, const Tensor& c_new,
                   const GraphIndex& graph, const ModelParams& params, std::size_t layer) {
  const std::size_t n = h.dim(0), d = h.dim(1);
  const Tensor edge_sum = graph.edge_first.empty() ? Tensor::zeros({n, d})
                                                   : segment_sum(e_new, graph.edge_first, n);
  const Tensor cell_sum =
      (!c_new.defined() || graph.member_cell.empty())
          ? Tensor::zeros({n, d})
          : segment_sum(gather_rows(c_new, graph.member_cell), graph.member_node, n);
  Tensor out = params.layers.at(layer).node(concat({h, edge_sum, cell_sum}));
  return params.config.residual ? add(out, h) : out;
}

Tensor fe_forward(const Tensor& h, const FeBlock& fe, const ModelConfig& config) {
  const std::size_t w = config.window_dim();
  if (h.dim(1) != config.latent_dim || fe.weights.size() != config.n_windows) {
    throw ShapeError("FE block does not match the latent layout");
  }
  std::vector<Tensor> windows;
  for (std::size_t k = 0; k < config.n_windows; ++k) {
    const Tensor chunk = config.n_windows == 1 ? h : slice_last(h, k * w, w);
    windows.push_back(relu(contract3(fe.weights[k], mul(batched_outer(chunk), fe.masks[k]))));
  }
  Tensor out = windows.size() == 1 ? windows[0] : concat(windows);
  return config.residual ? add(out, h) : out;
}

Tensor decode(const Tensor& h, const Tensor& u, const ModelParams& params) {
  Tensor delta = params.decoder(h);
  if (delta.shape() != u.shape()) {
    throw ShapeError("decoder output " + shape_string(delta.shape()) + " vs state " +
                     shape_string(u.shape()));
  }
  return add(delta, u);
}

Tensor forward_step(const MeshGraph& mesh, const GraphIndex& graph, const Tensor& u,
                    const ModelParams& params) {
  if (mesh.dim != params.config.spatial_dim) {
    throw ShapeError("mesh dimension differs from the model configuration");
  }
  const bool cells = params.config.cell_enabled && mesh.cell_count() > 0;
  RawFeatures raw{node_raw_features(mesh, u), edge_raw_features(mesh),
                  cells ? cell_raw_features(mesh) : Tensor{}};
  Latents z = encode(raw, params);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    Tensor c_new;
    if (cells) {
      c_new = cell_update(z.node, z.cell, graph, params, l);
    }
    Tensor e_new = edge_update(z.node, z.edge, graph, params, l);
    z.node = node_update(z.node, e_new, c_new, graph, params, l);
    z.edge = e_new;
    z.cell = c_new;
    if (params.layers[l].fe) {
      z.node = fe_forward(z.node, *params.layers[l].fe, params.config);
    }
  }
  return decode(z.node, u, params);
}

Tensor forward_step(const MeshGraph& mesh, const Tensor& u, const ModelParams& params) {
  return forward_step(mesh, graph_index(mesh), u, params);
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const nlohmann::json& meta) {
  const auto named = params.named_parameters();
  const auto masks = params.named_masks();
  auto out = io::open_for_write(path);
  io::write_header(out, {{"format", "cegnn-checkpoint"},
                         {"version", 1},
                         {"config", to_json(params.config)},
                         {"meta", meta},
                         {"params", tensor_manifest(named)},
                         {"masks", tensor_manifest(masks)}});
  write_tensor_payload(out, named);
  write_tensor_payload(out, masks);
}

namespace {

void copy_into(const NamedTensors& source, const NamedTensors& target, const char* what) {
  if (source.size() != target.size()) {
    throw IoError(std::string("checkpoint ") + what + " count " + std::to_string(source.size()) +
                  " does not match config (" + std::to_string(target.size()) + ")");
  }
  for (std::size_t k = 0; k < source.size(); ++k) {
    if (source[k].first != target[k].first || source[k].second.shape() != target[k].second.shape()) {
      throw IoError(std::string("checkpoint ") + what + " '" + source[k].first + "' " +
                    shape_string(source[k].second.shape()) + " does not match expected '" +
                    target[k].first + "' " + shape_string(target[k].second.shape()));
    }
    Tensor dst = target[k].second;
    const auto src = source[k].second.values();
    std::copy(src.begin(), src.end(), dst.mutable_values().begin());
  }
}

}  // namespace

ModelParams clone_params(const ModelParams& params) {
  ModelParams copy = init_params(params.config, 0);
  copy_into(params.named_parameters(), copy.named_parameters(), "parameter");
  copy_into(params.named_masks(), copy.named_masks(), "mask");
  return copy;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto in = io::open_for_read(path);
  const auto header = io::read_header(in);
  if (header.value("format", "") != "cegnn-checkpoint") {
    throw IoError(path.string() + " is not a checkpoint");
  }
  ModelConfig config;
  try {
    config = model_config_from_json(header.at("config"));
  } catch (const ConfigError& e) {
    throw IoError(e.what());
  }
  Checkpoint ckpt{init_params(config, 0), header.value("meta", nlohmann::json::object())};
  const auto stored_params = read_tensor_payload(in, header.at("params"), true);
  const auto stored_masks = read_tensor_payload(in, header.at("masks"), false);
  io::expect_eof(in);
  copy_into(stored_params, ckpt.params.named_parameters(), "parameter");
  copy_into(stored_masks, ckpt.params.named_masks(), "mask");
  return ckpt;
}

}  // namespace cegnn

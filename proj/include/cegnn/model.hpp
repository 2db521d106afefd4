#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cegnn/mesh.hpp"
#include "cegnn/named_tensors.hpp"
#include "cegnn/tensor.hpp"

namespace cegnn {

struct ModelConfig {
  std::size_t layers = 4;
  std::size_t latent_dim = 128;
  bool fe_enabled = true;
  bool cell_enabled = true;
  std::size_t n_windows = 4;
  double mask_keep_prob = 0.5;
  std::size_t mlp_hidden = 0;  // 0 means latent_dim
  std::size_t mlp_depth = 2;   // hidden layers per MLP
  bool residual = true;
  std::size_t in_channels = 2;
  std::size_t node_type_count = kNodeTypeCount;
  std::size_t spatial_dim = 2;

  std::size_t window_dim() const { return latent_dim / n_windows; }
  std::size_t hidden() const { return mlp_hidden == 0 ? latent_dim : mlp_hidden; }
  std::size_t vertices_per_cell() const { return spatial_dim + 1; }
};

/// Throws ConfigError if the window count does not divide the latent width,
/// the keep probability is outside (0, 1], or a width is zero.
void validate(const ModelConfig& config);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Component switches of the ablation study.
enum class Ablation { kNone, kNoCell, kNoFe, kNoCellNoFe };

Ablation parse_ablation(const std::string& name);
std::string ablation_name(Ablation ablation);
ModelConfig apply_ablation(ModelConfig config, Ablation ablation);

/// Hidden layers use ReLU; `norm` (when present) is a LayerNorm on the output.
struct Mlp {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
  std::optional<std::pair<Tensor, Tensor>> norm;  // gain, bias

  Tensor operator()(const Tensor& x) const;
};

/// One W per window (window_dim^3) and its frozen {0,1} mask (window_dim^2).
struct FeBlock {
  std::vector<Tensor> weights;
  std::vector<Tensor> masks;
};

struct LayerParams {
  std::optional<Mlp> cell;
  Mlp edge;
  Mlp node;
  std::optional<FeBlock> fe;
};

struct ModelParams {
  ModelConfig config;
  Mlp node_encoder;
  Mlp edge_encoder;
  std::optional<Mlp> cell_encoder;
  std::vector<LayerParams> layers;
  Mlp decoder;

  /// Learnable tensors under stable dotted names, in storage order.
  NamedTensors named_parameters() const;
  /// Frozen FE masks; never part of named_parameters().
  NamedTensors named_masks() const;
  std::vector<Tensor> parameter_list() const;
};

/// Xavier-uniform MLP weights, zero biases, unit LayerNorm gains, FE weights
/// Xavier-uniform over (window_dim^2, window_dim) times 1/window_dim, masks
/// Bernoulli(mask_keep_prob).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Deep copy; the result shares no storage with `params`.
ModelParams clone_params(const ModelParams& params);

struct ParameterCounts {
  std::size_t node_encoder = 0;
  std::size_t edge_encoder = 0;
  std::size_t cell_encoder = 0;
  std::size_t cell_layers = 0;
  std::size_t edge_layers = 0;
  std::size_t node_layers = 0;
  std::size_t fe_layers = 0;
  std::size_t fe_per_layer = 0;  // n_windows * window_dim^3
  std::size_t decoder = 0;
  std::size_t total = 0;
  std::size_t mask_entries = 0;  // frozen, excluded from total
};

ParameterCounts count_parameters(const ModelConfig& config);

/// Index arrays derived from a mesh for gather/scatter.
struct GraphIndex {
  std::size_t nodes = 0;
  std::vector<std::size_t> edge_first;   // i of edge (i, j); edges aggregate into i
  std::vector<std::size_t> edge_second;  // j
  std::vector<std::vector<std::size_t>> cell_slot;  // cell_slot[v][c] = v-th vertex of cell c
  std::vector<std::size_t> member_cell;  // each (cell, vertex) incidence ...
  std::vector<std::size_t> member_node;  // ... and the node it feeds
};

GraphIndex graph_index(const MeshGraph& mesh);

struct Latents {
  Tensor node;
  Tensor edge;
  Tensor cell;  // undefined when cells are disabled
};

Latents encode(const RawFeatures& raw, const ModelParams& params);

/// c' = phi_c(h_i, h_j, h_k[, h_l], c) (+ c)
Tensor cell_update(const Tensor& h, const Tensor& c, const GraphIndex& graph,
                   const ModelParams& params, std::size_t layer);

/// e' = phi_e(h_i, h_j, e) (+ e)
Tensor edge_update(const Tensor& h, const Tensor& e, const GraphIndex& graph,
                   const ModelParams& params, std::size_t layer);

/// h' = phi_v(h, sum_edges e', sum_cells c') (+ h). Each cell feeds all of its
/// vertices. An undefined `c_new` stands in as zeros.
Tensor node_update(const Tensor& h, const Tensor& e_new, const Tensor& c_new,
                   const GraphIndex& graph, const ModelParams& params, std::size_t layer);

/// Windowed feature enhancement: per window w, relu(contract3(W_w, M_w * (h_w outer h_w))),
/// windows concatenated (+ h).
Tensor fe_forward(const Tensor& h, const FeBlock& fe, const ModelConfig& config);

/// u_next = phi_de(h) + u
Tensor decode(const Tensor& h, const Tensor& u, const ModelParams& params);

/// encode -> layers x (CellMPNN, FE) -> decode.
Tensor forward_step(const MeshGraph& mesh, const Tensor& u, const ModelParams& params);
Tensor forward_step(const MeshGraph& mesh, const GraphIndex& graph, const Tensor& u,
                    const ModelParams& params);

/// Config manifest, named parameters and masks in one file.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const nlohmann::json& meta = nlohmann::json::object());

struct Checkpoint {
  ModelParams params;
  nlohmann::json meta;
};

/// Validates every stored name and shape against the stored config.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cegnn

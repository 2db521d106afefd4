#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cegnn/tensor.hpp"

namespace cegnn {

enum class NodeType : std::uint8_t { kInterior = 0, kBoundary = 1 };
inline constexpr std::size_t kNodeTypeCount = 2;

/// Axis-aligned periodic domain [0, extents[a]) used for minimum-image offsets.
struct PeriodicBox {
  bool enabled = false;
  std::vector<double> extents;

  /// Shortest wrapped displacement along `axis`; identity when disabled.
  double wrap(double delta, std::size_t axis) const;
};

using Edge = std::array<std::size_t, 2>;

/// Nodes, directed edges and simplicial cells with precomputed cell geometry.
///
/// Triangles in 2-D, tetrahedra in 3-D. Each undirected adjacency is stored
/// as the consecutive pair (i,j),(j,i). Cell vertex order is canonical: it is
/// fixed at construction and never reordered afterwards.
struct MeshGraph {
  std::size_t dim = 2;
  std::vector<double> positions;  // node-major, dim coordinates per node
  std::vector<NodeType> node_types;
  std::vector<Edge> edges;
  std::vector<std::size_t> cells;  // vertices_per_cell indices per cell
  std::vector<double> cell_centroids;
  std::vector<double> cell_measures;  // area (2-D) or volume (3-D)
  PeriodicBox box;
  double length_scale = 1.0;  // reference spacing for degeneracy checks

  std::size_t node_count() const { return node_types.size(); }
  std::size_t edge_count() const { return edges.size(); }
  std::size_t vertices_per_cell() const { return dim + 1; }
  std::size_t cell_count() const { return cells.size() / vertices_per_cell(); }
  std::span<const std::size_t> cell(std::size_t c) const {
    return {cells.data() + c * vertices_per_cell(), vertices_per_cell()};
  }
  std::span<const double> position(std::size_t n) const { return {positions.data() + n * dim, dim}; }
};

/// Builds a mesh from positions and cells: derives edges from cell sides,
/// computes cell geometry, and types every node on an unshared facet as
/// boundary.
MeshGraph build_mesh(std::size_t dim, std::vector<double> positions, std::vector<std::size_t> cells,
                     PeriodicBox box = {}, double length_scale = 1.0);

struct GridSpec {
  std::vector<std::size_t> counts;  // nodes per axis; dimension = counts.size()
  double spacing = 1.0;
  bool periodic = false;  // add wrap-around cells and adjacencies
};

/// Regular grid triangulation. 2-D squares split along the (i,j)-(i+1,j+1)
/// diagonal; 3-D cubes split into five tetrahedra with parity alternating on
/// (i+j+k) so shared faces agree. Node index is row-major with axis 0 slowest.
MeshGraph grid_to_mesh(const GridSpec& spec);

struct CellGeometry {
  std::vector<double> centroids;
  std::vector<double> measures;
};

/// Centroids (vertex mean, minimum-image adjusted) and measures. Throws
/// ShapeError for a cell with measure below 1e-12 * length_scale^dim.
CellGeometry cell_geometry(std::size_t dim, std::span<const double> positions,
                           std::span<const std::size_t> cells, const PeriodicBox& box,
                           double length_scale);
CellGeometry cell_geometry(const MeshGraph& mesh);

/// Encoder inputs.
///   node: N x (d + kNodeTypeCount + m)  field, one-hot type, position
///   edge: E x (m + 1)                   x_j - x_i, |x_j - x_i|
///   cell: C x (V*m + m + 1)             vertex-minus-centroid vectors, centroid, measure
struct RawFeatures {
  Tensor node;
  Tensor edge;
  Tensor cell;
};

std::size_t node_raw_width(std::size_t channels, std::size_t dim);
std::size_t edge_raw_width(std::size_t dim);
std::size_t cell_raw_width(std::size_t dim);

Tensor node_raw_features(const MeshGraph& mesh, const Tensor& field);
Tensor edge_raw_features(const MeshGraph& mesh);
Tensor cell_raw_features(const MeshGraph& mesh);

/// field is N x d.
RawFeatures raw_features(const MeshGraph& mesh, const Tensor& field);

/// Relabels node n as perm[n]; edge and cell order is kept, their indices remapped.
MeshGraph relabel_nodes(const MeshGraph& mesh, std::span<const std::size_t> perm);

/// `copies` independent replicas of `mesh` in one graph; replica r owns nodes
/// [r*N, (r+1)*N). Used to batch samples that share a mesh.
MeshGraph replicate(const MeshGraph& mesh, std::size_t copies);

void save_mesh(const std::filesystem::path& path, const MeshGraph& mesh);
MeshGraph load_mesh(const std::filesystem::path& path);

}  // namespace cegnn

#include "cegnn/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "cegnn/binary_io.hpp"
#include "cegnn/error.hpp"

namespace cegnn {

double PeriodicBox::wrap(double delta, std::size_t axis) const {
  if (!enabled) {
    return delta;
  }
  const double length = extents.at(axis);
  return delta - length * std::round(delta / length);
}

namespace {

void validate_dim(std::size_t dim) {
  if (dim != 2 && dim != 3) {
    throw ShapeError("mesh dimension must be 2 or 3, got " + std::to_string(dim));
  }
}

/// Facets of a simplex: its sides (2-D) or faces (3-D), as sorted vertex lists.
std::vector<std::vector<std::size_t>> facets_of(std::span<const std::size_t> cell) {
  std::vector<std::vector<std::size_t>> facets;
  for (std::size_t skip = 0; skip < cell.size(); ++skip) {
    std::vector<std::size_t> facet;
    for (std::size_t v = 0; v < cell.size(); ++v) {
      if (v != skip) facet.push_back(cell[v]);
    }
    std::sort(facet.begin(), facet.end());
    facets.push_back(std::move(facet));
  }
  return facets;
}

}  // namespace

CellGeometry cell_geometry(std::size_t dim, std::span<const double> positions,
                           std::span<const std::size_t> cells, const PeriodicBox& box,
                           double length_scale) {
  validate_dim(dim);
  const std::size_t per_cell = dim + 1;
  const std::size_t count = cells.size() / per_cell;
  const double min_measure = 1e-12 * std::pow(length_scale, static_cast<double>(dim));
  CellGeometry geometry;
  geometry.centroids.resize(count * dim);
  geometry.measures.resize(count);
  for (std::size_t c = 0; c < count; ++c) {
    const std::size_t* vertex = cells.data() + c * per_cell;
    // Offsets from vertex 0, minimum-image wrapped.
    std::array<std::array<double, 3>, 4> offset{};
    for (std::size_t v = 0; v < per_cell; ++v) {
      for (std::size_t a = 0; a < dim; ++a) {
        offset[v][a] = box.wrap(positions[vertex[v] * dim + a] - positions[vertex[0] * dim + a], a);
      }
    }
    for (std::size_t a = 0; a < dim; ++a) {
      double mean = 0.0;
      for (std::size_t v = 0; v < per_cell; ++v) mean += offset[v][a];
      double centroid = positions[vertex[0] * dim + a] + mean / static_cast<double>(per_cell);
      if (box.enabled) {
        centroid -= box.extents[a] * std::floor(centroid / box.extents[a]);
      }
      geometry.centroids[c * dim + a] = centroid;
    }
    double measure = 0.0;
    if (dim == 2) {
      const auto& p = offset[1];
      const auto& q = offset[2];
      measure = 0.5 * std::abs(p[0] * q[1] - p[1] * q[0]);
    } else {
      const auto& p = offset[1];
      const auto& q = offset[2];
      const auto& r = offset[3];
      const double det = p[0] * (q[1] * r[2] - q[2] * r[1]) - p[1] * (q[0] * r[2] - q[2] * r[0]) +
                         p[2] * (q[0] * r[1] - q[1] * r[0]);
      measure = std::abs(det) / 6.0;
    }
    if (!(measure >= min_measure)) {
      throw ShapeError("degenerate cell " + std::to_string(c) + " (measure " +
                       std::to_string(measure) + ")");
    }
    geometry.measures[c] = measure;
  }
  return geometry;
}

CellGeometry cell_geometry(const MeshGraph& mesh) {
  return cell_geometry(mesh.dim, mesh.positions, mesh.cells, mesh.box, mesh.length_scale);
}

MeshGraph build_mesh(std::size_t dim, std::vector<double> positions, std::vector<std::size_t> cells,
                     PeriodicBox box, double length_scale) {
  validate_dim(dim);
  const std::size_t per_cell = dim + 1;
  if (positions.size() % dim != 0 || positions.empty()) {
    throw ShapeError("positions length " + std::to_string(positions.size()) +
                     " is not a positive multiple of dim");
  }
  if (cells.size() % per_cell != 0) {
    throw ShapeError("cell index list length is not a multiple of " + std::to_string(per_cell));
  }
  if (box.enabled && box.extents.size() != dim) {
    throw ShapeError("periodic box needs one extent per axis");
  }
  const std::size_t n = positions.size() / dim;
  for (std::size_t index : cells) {
    if (index >= n) {
      throw ShapeError("cell vertex " + std::to_string(index) + " out of range " + std::to_string(n));
    }
  }

  MeshGraph mesh;
  mesh.dim = dim;
  mesh.box = std::move(box);
  mesh.length_scale = length_scale;
  mesh.positions = std::move(positions);
  mesh.cells = std::move(cells);

  std::set<std::pair<std::size_t, std::size_t>> undirected;
  std::map<std::vector<std::size_t>, std::size_t> facet_uses;
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto cell = mesh.cell(c);
    for (std::size_t a = 0; a < per_cell; ++a) {
      for (std::size_t b = a + 1; b < per_cell; ++b) {
        if (cell[a] == cell[b]) {
          throw ShapeError("cell " + std::to_string(c) + " repeats a vertex");
        }
        undirected.emplace(std::min(cell[a], cell[b]), std::max(cell[a], cell[b]));
      }
    }
    for (auto& facet : facets_of(cell)) {
      ++facet_uses[std::move(facet)];
    }
  }
  for (const auto& [i, j] : undirected) {
    mesh.edges.push_back({i, j});
    mesh.edges.push_back({j, i});
  }

  mesh.node_types.assign(n, NodeType::kInterior);
  for (const auto& [facet, uses] : facet_uses) {
    if (uses == 1) {
      for (std::size_t v : facet) mesh.node_types[v] = NodeType::kBoundary;
    }
  }

  auto geometry = cell_geometry(mesh);
  mesh.cell_centroids = std::move(geometry.centroids);
  mesh.cell_measures = std::move(geometry.measures);
  return mesh;
}

namespace {

void append_square_cells(const GridSpec& spec, std::vector<std::size_t>& cells) {
  const std::size_t nx = spec.counts[0], ny = spec.counts[1];
  const std::size_t sx = spec.periodic ? nx : nx - 1;
  const std::size_t sy = spec.periodic ? ny : ny - 1;
  auto node = [&](std::size_t i, std::size_t j) { return (i % nx) * ny + (j % ny); };
  for (std::size_t i = 0; i < sx; ++i) {
    for (std::size_t j = 0; j < sy; ++j) {
      const std::size_t a = node(i, j), b = node(i + 1, j), c = node(i, j + 1), d = node(i + 1, j + 1);
      cells.insert(cells.end(), {a, b, d});
      cells.insert(cells.end(), {a, d, c});
    }
  }
}

// Corner k of a unit cube sits at (k & 1, (k >> 1) & 1, (k >> 2) & 1).
constexpr std::array<std::array<std::size_t, 4>, 5> kEvenCubeTets{{
    {0, 1, 2, 4}, {3, 1, 2, 7}, {5, 1, 4, 7}, {6, 2, 4, 7}, {1, 2, 4, 7}}};
constexpr std::array<std::array<std::size_t, 4>, 5> kOddCubeTets{{
    {1, 0, 3, 5}, {2, 0, 3, 6}, {4, 0, 5, 6}, {7, 3, 5, 6}, {0, 3, 5, 6}}};

void append_cube_cells(const GridSpec& spec, std::vector<std::size_t>& cells) {
  const std::size_t nx = spec.counts[0], ny = spec.counts[1], nz = spec.counts[2];
  const std::size_t sx = spec.periodic ? nx : nx - 1;
  const std::size_t sy = spec.periodic ? ny : ny - 1;
  const std::size_t sz = spec.periodic ? nz : nz - 1;
  auto node = [&](std::size_t i, std::size_t j, std::size_t k) {
    return ((i % nx) * ny + (j % ny)) * nz + (k % nz);
  };
  for (std::size_t i = 0; i < sx; ++i) {
    for (std::size_t j = 0; j < sy; ++j) {
      for (std::size_t k = 0; k < sz; ++k) {
        std::array<std::size_t, 8> corner{};
        for (std::size_t c = 0; c < 8; ++c) {
          corner[c] = node(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
        }
        const auto& tets = (i + j + k) % 2 == 0 ? kEvenCubeTets : kOddCubeTets;
        for (const auto& tet : tets) {
          for (std::size_t v : tet) cells.push_back(corner[v]);
        }
      }
    }
  }
}

}  // namespace

MeshGraph grid_to_mesh(const GridSpec& spec) {
  const std::size_t dim = spec.counts.size();
  validate_dim(dim);
  if (!(spec.spacing > 0.0)) {
    throw ShapeError("grid spacing must be positive");
  }
  for (std::size_t count : spec.counts) {
    if (count < 2) {
      throw ShapeError("grid needs at least 2 nodes per axis");
    }
    if (spec.periodic && count < 3) {
      throw ShapeError("periodic grid needs at least 3 nodes per axis");
    }
    if (spec.periodic && dim == 3 && count % 2 != 0) {
      throw ShapeError("periodic 3-D grid needs even node counts so tetrahedra match across the wrap");
    }
  }
  std::vector<double> positions;
  const std::size_t total = numel(spec.counts);
  positions.reserve(total * dim);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::size_t rest = flat;
    std::array<std::size_t, 3> index{};
    for (std::size_t a = dim; a-- > 0;) {
      index[a] = rest % spec.counts[a];
      rest /= spec.counts[a];
    }
    for (std::size_t a = 0; a < dim; ++a) {
      positions.push_back(static_cast<double>(index[a]) * spec.spacing);
    }
  }
  std::vector<std::size_t> cells;
  if (dim == 2) {
    append_square_cells(spec, cells);
  } else {
    append_cube_cells(spec, cells);
  }
  PeriodicBox box;
  if (spec.periodic) {
    box.enabled = true;
    for (std::size_t count : spec.counts) {
      box.extents.push_back(static_cast<double>(count) * spec.spacing);
    }
  }
  return build_mesh(dim, std::move(positions), std::move(cells), std::move(box), spec.spacing);
}

std::size_t node_raw_width(std::size_t channels, std::size_t dim) {
  return channels + kNodeTypeCount + dim;
}
std::size_t edge_raw_width(std::size_t dim) { return dim + 1; }
std::size_t cell_raw_width(std::size_t dim) { return (dim + 1) * dim + dim + 1; }

Tensor node_raw_features(const MeshGraph& mesh, const Tensor& field) {
  const std::size_t n = mesh.node_count();
  if (field.rank() != 2 || field.dim(0) != n) {
    throw ShapeError("field " + shape_string(field.shape()) + " does not match " +
                     std::to_string(n) + " mesh nodes");
  }
  const std::size_t d = field.dim(1);
  const std::size_t width = node_raw_width(d, mesh.dim);
  std::vector<double> out(n * width, 0.0);
  const auto f = field.values();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * width;
    std::copy_n(f.data() + i * d, d, row);
    row[d + static_cast<std::size_t>(mesh.node_types[i])] = 1.0;
    std::copy_n(mesh.positions.data() + i * mesh.dim, mesh.dim, row + d + kNodeTypeCount);
  }
  return Tensor::from({n, width}, std::move(out));
}

Tensor edge_raw_features(const MeshGraph& mesh) {
  const std::size_t m = mesh.dim;
  const std::size_t width = edge_raw_width(m);
  std::vector<double> out(mesh.edge_count() * width);
  for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
    const auto [i, j] = mesh.edges[e];
    double* row = out.data() + e * width;
    double norm2 = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      row[a] = mesh.box.wrap(mesh.positions[j * m + a] - mesh.positions[i * m + a], a);
      norm2 += row[a] * row[a];
    }
    row[m] = std::sqrt(norm2);
  }
  return Tensor::from({mesh.edge_count(), width}, std::move(out));
}

Tensor cell_raw_features(const MeshGraph& mesh) {
  const std::size_t m = mesh.dim;
  const std::size_t per_cell = mesh.vertices_per_cell();
  const std::size_t width = cell_raw_width(m);
  std::vector<double> out(mesh.cell_count() * width);
  for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
    const auto cell = mesh.cell(c);
    const double* centroid = mesh.cell_centroids.data() + c * m;
    double* row = out.data() + c * width;
    for (std::size_t v = 0; v < per_cell; ++v) {
      for (std::size_t a = 0; a < m; ++a) {
        row[v * m + a] = mesh.box.wrap(mesh.positions[cell[v] * m + a] - centroid[a], a);
      }
    }
    std::copy_n(centroid, m, row + per_cell * m);
    row[per_cell * m + m] = mesh.cell_measures[c];
  }
  return Tensor::from({mesh.cell_count(), width}, std::move(out));
}

RawFeatures raw_features(const MeshGraph& mesh, const Tensor& field) {
  return {node_raw_features(mesh, field), edge_raw_features(mesh), cell_raw_features(mesh)};
}

MeshGraph relabel_nodes(const MeshGraph& mesh, std::span<const std::size_t> perm) {
  const std::size_t n = mesh.node_count();
  if (perm.size() != n) {
    throw ShapeError("permutation length differs from node count");
  }
  std::vector<bool> seen(n, false);
  for (std::size_t target : perm) {
    if (target >= n || seen[target]) {
      throw ShapeError("relabel_nodes: not a permutation");
    }
    seen[target] = true;
  }
  MeshGraph out = mesh;
  for (std::size_t i = 0; i < n; ++i) {
    out.node_types[perm[i]] = mesh.node_types[i];
    std::copy_n(mesh.positions.data() + i * mesh.dim, mesh.dim,
                out.positions.data() + perm[i] * mesh.dim);
  }
  for (auto& [i, j] : out.edges) {
    i = perm[i];
    j = perm[j];
  }
  for (auto& v : out.cells) {
    v = perm[v];
  }
  return out;
}

MeshGraph replicate(const MeshGraph& mesh, std::size_t copies) {
  if (copies == 0) {
    throw ShapeError("replicate: zero copies");
  }
  if (copies == 1) {
    return mesh;
  }
  const std::size_t n = mesh.node_count();
  MeshGraph out;
  out.dim = mesh.dim;
  out.box = mesh.box;
  out.length_scale = mesh.length_scale;
  for (std::size_t r = 0; r < copies; ++r) {
    const std::size_t shift = r * n;
    out.positions.insert(out.positions.end(), mesh.positions.begin(), mesh.positions.end());
    out.node_types.insert(out.node_types.end(), mesh.node_types.begin(), mesh.node_types.end());
    for (const auto& [i, j] : mesh.edges) out.edges.push_back({i + shift, j + shift});
    for (std::size_t v : mesh.cells) out.cells.push_back(v + shift);
    out.cell_centroids.insert(out.cell_centroids.end(), mesh.cell_centroids.begin(),
                              mesh.cell_centroids.end());
    out.cell_measures.insert(out.cell_measures.end(), mesh.cell_measures.begin(),
                             mesh.cell_measures.end());
  }
  return out;
}

void save_mesh(const std::filesystem::path& path, const MeshGraph& mesh) {
  auto out = io::open_for_write(path);
  io::write_header(out, {{"format", "cegnn-mesh"},
                         {"version", 1},
                         {"dim", mesh.dim},
                         {"nodes", mesh.node_count()},
                         {"edges", mesh.edge_count()},
                         {"cells", mesh.cell_count()},
                         {"periodic", mesh.box.enabled},
                         {"extents", mesh.box.extents},
                         {"length_scale", mesh.length_scale}});
  io::write_f64(out, mesh.positions);
  std::vector<std::size_t> types(mesh.node_types.size());
  std::transform(mesh.node_types.begin(), mesh.node_types.end(), types.begin(),
                 [](NodeType t) { return static_cast<std::size_t>(t); });
  io::write_u64(out, types);
  std::vector<std::size_t> edges;
  for (const auto& [i, j] : mesh.edges) edges.insert(edges.end(), {i, j});
  io::write_u64(out, edges);
  io::write_u64(out, mesh.cells);
}

MeshGraph load_mesh(const std::filesystem::path& path) {
  auto in = io::open_for_read(path);
  const auto header = io::read_header(in);
  if (header.value("format", "") != "cegnn-mesh") {
    throw IoError(path.string() + " is not a mesh file");
  }
  const std::size_t dim = header.at("dim");
  const std::size_t nodes = header.at("nodes");
  const std::size_t edge_count = header.at("edges");
  const std::size_t cell_count = header.at("cells");
  const std::size_t expected = (nodes * dim + nodes + 2 * edge_count + cell_count * (dim + 1)) * 8;
  if (io::remaining_bytes(in) != expected) {
    throw IoError("length mismatch: mesh payload has " + std::to_string(io::remaining_bytes(in)) +
                  " bytes, manifest implies " + std::to_string(expected));
  }
  auto positions = io::read_f64(in, nodes * dim);
  const auto types = io::read_u64(in, nodes);
  const auto edge_flat = io::read_u64(in, 2 * edge_count);
  auto cells = io::read_u64(in, cell_count * (dim + 1));
  PeriodicBox box{header.at("periodic").get<bool>(), header.at("extents").get<std::vector<double>>()};
  MeshGraph mesh = build_mesh(dim, std::move(positions), std::move(cells), std::move(box),
                              header.at("length_scale").get<double>());
  for (std::size_t i = 0; i < nodes; ++i) {
    if (types[i] >= kNodeTypeCount) {
      throw IoError("invalid node type in mesh file");
    }
    mesh.node_types[i] = static_cast<NodeType>(types[i]);
  }
  mesh.edges.clear();
  for (std::size_t e = 0; e < edge_count; ++e) {
    if (edge_flat[2 * e] >= nodes || edge_flat[2 * e + 1] >= nodes) {
      throw IoError("edge index out of range in mesh file");
    }
    mesh.edges.push_back({edge_flat[2 * e], edge_flat[2 * e + 1]});
  }
  return mesh;
}

}  // namespace cegnn

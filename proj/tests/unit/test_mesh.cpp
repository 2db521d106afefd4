#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <set>

#include "cegnn/error.hpp"
#include "cegnn/mesh.hpp"

using namespace cegnn;

namespace {

std::size_t undirected_count(const MeshGraph& mesh) { return mesh.edge_count() / 2; }

double total_measure(const MeshGraph& mesh) {
  return std::accumulate(mesh.cell_measures.begin(), mesh.cell_measures.end(), 0.0);
}

Tensor random_field(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> v(n * d);
  for (double& x : v) x = normal(rng);
  return Tensor::from({n, d}, std::move(v));
}

}  // namespace

TEST_CASE("grid_to_mesh counts") {
  const auto square = grid_to_mesh({{2, 2}, 1.0, false});
  CHECK(square.node_count() == 4);
  CHECK(square.cell_count() == 2);
  CHECK(undirected_count(square) == 5);
  CHECK(square.edge_count() == 10);

  const auto three = grid_to_mesh({{3, 3}, 1.0, false});
  CHECK(three.cell_count() == 8);
  CHECK(undirected_count(three) == 16);

  const auto cube = grid_to_mesh({{2, 2, 2}, 1.0, false});
  CHECK(cube.cell_count() == 5);
  CHECK(cube.vertices_per_cell() == 4);
  CHECK(total_measure(cube) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(grid_to_mesh({{3}, 1.0, false}), ShapeError);
  CHECK_THROWS_AS(grid_to_mesh({{2, 2, 2, 2}, 1.0, false}), ShapeError);
  CHECK_THROWS_AS(grid_to_mesh({{1, 4}, 1.0, false}), ShapeError);
}

TEST_CASE("mesh invariants hold on 2-D and 3-D grids") {
  for (const GridSpec& spec : {GridSpec{{5, 4}, 0.3, false}, GridSpec{{6, 5}, 0.5, true},
                               GridSpec{{3, 4, 3}, 2.0, false}, GridSpec{{4, 4, 6}, 1.0, true}}) {
    CAPTURE(spec.counts.size());
    CAPTURE(spec.periodic);
    const auto mesh = grid_to_mesh(spec);
    std::set<Edge> edges(mesh.edges.begin(), mesh.edges.end());
    CHECK(edges.size() == mesh.edge_count());
    for (const auto& [i, j] : mesh.edges) {
      CHECK(i < mesh.node_count());
      CHECK(j < mesh.node_count());
      CHECK(edges.count({j, i}) == 1);
    }
    for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
      const auto cell = mesh.cell(c);
      for (std::size_t a = 0; a < cell.size(); ++a)
        for (std::size_t b = a + 1; b < cell.size(); ++b) CHECK(edges.count({cell[a], cell[b]}) == 1);
      CHECK(mesh.cell_measures[c] > 0.0);
    }
    double domain = 1.0;
    for (std::size_t n : spec.counts) {
      domain *= static_cast<double>(spec.periodic ? n : n - 1) * spec.spacing;
    }
    CHECK(std::abs(total_measure(mesh) - domain) <= 1e-9 * domain);
  }
}

TEST_CASE("node types") {
  const auto open = grid_to_mesh({{4, 4}, 1.0, false});
  std::size_t boundary = 0;
  for (auto t : open.node_types) boundary += t == NodeType::kBoundary;
  CHECK(boundary == 12);
  const auto wrapped = grid_to_mesh({{4, 4}, 1.0, true});
  for (auto t : wrapped.node_types) CHECK(t == NodeType::kInterior);
}

TEST_CASE("cell_geometry") {
  const auto tri = build_mesh(2, {0, 0, 1, 0, 0, 1}, {0, 1, 2});
  CHECK(tri.cell_centroids[0] == doctest::Approx(1.0 / 3.0));
  CHECK(tri.cell_centroids[1] == doctest::Approx(1.0 / 3.0));
  CHECK(tri.cell_measures[0] == doctest::Approx(0.5));

  const auto tet = build_mesh(3, {0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 1, 2, 3});
  CHECK(tet.cell_measures[0] == doctest::Approx(1.0 / 6.0));

  CHECK_THROWS_AS(build_mesh(2, {0, 0, 1, 1, 2, 2}, {0, 1, 2}), ShapeError);
  CHECK_THROWS_AS(build_mesh(2, {0, 0, 1, 0, 0, 1}, {0, 1, 5}), ShapeError);
}

TEST_CASE("raw features") {
  SUBCASE("edge vector and distance") {
    const auto tri = build_mesh(2, {0, 0, 1, 1, 0, 1}, {0, 1, 2});
    const auto edge = edge_raw_features(tri);
    const auto it = std::find(tri.edges.begin(), tri.edges.end(), Edge{0, 1});
    REQUIRE(it != tri.edges.end());
    const std::size_t e = static_cast<std::size_t>(it - tri.edges.begin());
    CHECK(edge.values()[e * 3 + 0] == 1.0);
    CHECK(edge.values()[e * 3 + 1] == 1.0);
    CHECK(edge.values()[e * 3 + 2] == doctest::Approx(std::sqrt(2.0)));
  }
  SUBCASE("minimum image across a periodic boundary") {
    PeriodicBox box{true, {1.0, 1.0}};
    CHECK(box.wrap(0.0 - 0.9, 0) == doctest::Approx(0.1));
    const auto mesh = grid_to_mesh({{10, 10}, 0.1, true});
    const auto edge = edge_raw_features(mesh);
    // node (9,0) at x=0.9 to node (0,0) at x=0
    const auto it = std::find(mesh.edges.begin(), mesh.edges.end(), Edge{90, 0});
    REQUIRE(it != mesh.edges.end());
    const std::size_t e = static_cast<std::size_t>(it - mesh.edges.begin());
    CHECK(edge.values()[e * 3 + 0] == doctest::Approx(0.1));
    CHECK(edge.values()[e * 3 + 1] == doctest::Approx(0.0));
  }
  SUBCASE("widths and zero-sum centroid offsets") {
    for (const GridSpec& spec : {GridSpec{{4, 3}, 0.5, true}, GridSpec{{3, 3, 3}, 1.0, false}}) {
      const auto mesh = grid_to_mesh(spec);
      const std::size_t m = mesh.dim;
      const auto raw = raw_features(mesh, random_field(mesh.node_count(), 2, 1));
      CHECK(raw.node.dim(1) == 2 + kNodeTypeCount + m);
      CHECK(raw.edge.dim(1) == m + 1);
      CHECK(raw.cell.dim(1) == (m == 2 ? 9u : 16u));
      for (std::size_t c = 0; c < mesh.cell_count(); ++c) {
        for (std::size_t a = 0; a < m; ++a) {
          double s = 0.0;
          for (std::size_t v = 0; v <= m; ++v) s += raw.cell.values()[c * raw.cell.dim(1) + v * m + a];
          CHECK(std::abs(s) < 1e-12);
        }
      }
      for (std::size_t e = 0; e < mesh.edge_count(); ++e) {
        const double* row = raw.edge.values().data() + e * (m + 1);
        double n2 = 0.0;
        for (std::size_t a = 0; a < m; ++a) n2 += row[a] * row[a];
        CHECK(row[m] == doctest::Approx(std::sqrt(n2)).epsilon(1e-15));
      }
    }
  }
  SUBCASE("field row count must match") {
    const auto mesh = grid_to_mesh({{3, 3}, 1.0, false});
    CHECK_THROWS_AS(raw_features(mesh, random_field(8, 2, 0)), ShapeError);
  }
}

TEST_CASE("relabeling nodes permutes raw features") {
  for (const GridSpec& spec : {GridSpec{{5, 4}, 0.25, false}, GridSpec{{4, 4, 4}, 1.0, true}}) {
    const auto mesh = grid_to_mesh(spec);
    const std::size_t n = mesh.node_count();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(9);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto field = random_field(n, 2, 4);
    std::vector<double> moved(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
      moved[perm[i] * 2] = field.values()[i * 2];
      moved[perm[i] * 2 + 1] = field.values()[i * 2 + 1];
    }
    const auto relabeled = relabel_nodes(mesh, perm);
    const auto geometry = cell_geometry(relabeled);
    for (std::size_t k = 0; k < geometry.measures.size(); ++k) {
      CHECK(std::abs(geometry.measures[k] - mesh.cell_measures[k]) < 1e-12);
    }
    const auto a = raw_features(mesh, field);
    const auto b = raw_features(relabeled, Tensor::from({n, 2}, moved));
    const std::size_t w = a.node.dim(1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < w; ++c)
        CHECK(std::abs(a.node.values()[i * w + c] - b.node.values()[perm[i] * w + c]) < 1e-12);
    for (std::size_t k = 0; k < a.edge.size(); ++k) CHECK(std::abs(a.edge.values()[k] - b.edge.values()[k]) < 1e-12);
    for (std::size_t k = 0; k < a.cell.size(); ++k) CHECK(std::abs(a.cell.values()[k] - b.cell.values()[k]) < 1e-12);
  }
}

TEST_CASE("replicate and serialization") {
  const auto mesh = grid_to_mesh({{3, 4}, 0.5, false});
  const auto twice = replicate(mesh, 2);
  CHECK(twice.node_count() == 24);
  CHECK(twice.edge_count() == 2 * mesh.edge_count());
  CHECK(twice.cells[mesh.cells.size()] == mesh.cells[0] + 12);

  const auto path = std::filesystem::temp_directory_path() / "cegnn_mesh_test.bin";
  const auto wrapped = grid_to_mesh({{4, 4, 4}, 0.5, true});
  save_mesh(path, wrapped);
  const auto loaded = load_mesh(path);
  CHECK(loaded.positions == wrapped.positions);
  CHECK(loaded.edges == wrapped.edges);
  CHECK(loaded.cells == wrapped.cells);
  CHECK(loaded.node_types == wrapped.node_types);
  CHECK(loaded.cell_measures == wrapped.cell_measures);
  CHECK(loaded.box.enabled);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  CHECK_THROWS_AS(load_mesh(path), IoError);
  std::filesystem::remove(path);
}

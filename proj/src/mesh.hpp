#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace eigenflow {

// Where a conformal density lives: on every vertex (area measure) or on
// boundary vertices only (length measure for boundary-spectrum problems).
enum class FactorSupport { area, boundary };

// Piecewise-linear positive density over the support vertex set.  For
// `boundary` support, values follow the order of TriMesh::boundary_vertices().
struct ConformalFactor {
  FactorSupport support = FactorSupport::area;
  Eigen::VectorXd values;
};

// Oriented manifold triangle mesh.  Construction validates: triangle indices
// in range and distinct, every edge in at most two triangles with opposite
// orientations, single-fan vertex links, no duplicate faces, positive
// triangle areas (> 1e-14 * scale^2), one connected component, and no
// unreferenced vertices.  Boundary edges are chained into loops; each
// boundary edge belongs to exactly one loop.
class TriMesh {
 public:
  static TriMesh from_data(std::vector<Eigen::Vector3d> vertices,
                           std::vector<std::array<int, 3>> triangles);
  static TriMesh load_off(const std::string& path);
  void save_off(const std::string& path) const;

  // Generators.  All produce consistently oriented meshes.
  static TriMesh octahedron();
  static TriMesh icosahedron();
  // Icosahedron refined `level` times with new vertices projected to the
  // unit sphere.
  static TriMesh icosphere(int level);
  // Unit-area flat torus immersed with all-congruent right isosceles
  // triangles (legs 1/n); `n` must be even and >= 4.  Vertex positions may
  // coincide; edge lengths realize the flat metric exactly.
  static TriMesh flat_torus(int n);
  // Unit disk from `rings` concentric rings (ring k carries 6k vertices);
  // boundary is the regular 6*rings-gon inscribed in the unit circle.
  static TriMesh unit_disk(int rings);
  // Flat square annulus (3x3 cells minus the middle one); Euler
  // characteristic 0 with two boundary loops.
  static TriMesh square_with_hole();

  int vertex_count() const { return static_cast<int>(vertices_.size()); }
  int triangle_count() const { return static_cast<int>(triangles_.size()); }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  const std::vector<Eigen::Vector3d>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }

  bool has_boundary() const { return !boundary_loops_.empty(); }
  const std::vector<std::vector<int>>& boundary_loops() const { return boundary_loops_; }
  // Boundary vertex ids, ascending.  This order indexes boundary-supported
  // conformal factors.
  const std::vector<int>& boundary_vertices() const { return boundary_vertices_; }
  bool is_boundary_vertex(int v) const { return boundary_flag_[v] != 0; }

  int euler_characteristic() const;
  int genus() const;

  double triangle_area(int t) const;
  double total_area() const;
  // Bounding-box diagonal; the length scale for degeneracy thresholds.
  double scale() const { return scale_; }

  // Midpoint 1->4 refinement, `levels` times.  With `sphere_project`, each
  // new midpoint is normalized to the unit sphere; original vertices are
  // left untouched.
  TriMesh refined(int levels, bool sphere_project) const;

  // Vertices within graph-geodesic distance `radius` of `center` (Dijkstra
  // over edge lengths), ascending ids, center included.  With `factor`
  // (area support), edge lengths are scaled by sqrt of the mean endpoint
  // density, i.e. distances in the conformal metric.  Throws EmptyBall when
  // no vertex besides the center qualifies.
  std::vector<int> geodesic_ball(int center, double radius,
                                 const ConformalFactor* factor = nullptr) const;

  // All vertex ids (area support) or boundary vertex ids (boundary
  // support): the index set densities and subgradients live on.
  std::vector<int> support_vertices(FactorSupport support) const;

 private:
  TriMesh() = default;
  void finalize();  // builds edges/adjacency/boundary and validates

  std::vector<Eigen::Vector3d> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::vector<int>> boundary_loops_;
  std::vector<int> boundary_vertices_;
  std::vector<char> boundary_flag_;
  double scale_ = 0.0;
};

// f = 1 everywhere on the support.
ConformalFactor uniform_factor(const TriMesh& mesh, FactorSupport support);

// Smooth deterministic perturbation: f = 1 + amplitude * g / max|g| with g a
// low-frequency trigonometric field drawn from `seed`.  amplitude in [0, 1).
ConformalFactor perturbed_factor(const TriMesh& mesh, FactorSupport support,
                                 double amplitude, std::uint64_t seed);

}  // namespace eigenflow

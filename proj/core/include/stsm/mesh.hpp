#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

namespace stsm {

/// Planar coordinate. Longitude/latitude pairs are treated as planar.
struct Point2D {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2D&, const Point2D&) = default;
};

using TriangleIndices = std::array<int, 3>;

/// Two-zone triangulation: a fine inner region around the data and a coarse
/// extension ring. Triangles are counter-clockwise.
struct TriangulatedMesh {
  std::vector<Point2D> vertices;
  std::vector<TriangleIndices> triangles;
  std::vector<bool> inner_flag;  // per vertex

  std::size_t n_vertices() const { return vertices.size(); }
  std::size_t n_triangles() const { return triangles.size(); }

  /// A triangle is inner when all three of its vertices are inner.
  bool is_inner_triangle(std::size_t t) const;
};

struct MeshOptions {
  double max_edge_inner = 1.0;
  double max_edge_outer = 2.0;
  double extension_margin = 1.0;
  double min_angle_deg = 20.0;
  /// Dilation of the data hull that forms the inner boundary. Non-positive
  /// selects 0.25 * max_edge_inner.
  double buffer = -1.0;
  std::size_t max_vertices = 200000;
};

/// Conforming Delaunay refinement of the station hull plus an extension ring.
/// Every input point becomes a mesh vertex. Throws DataError on degenerate
/// input and InvalidArgument on non-positive sizes.
TriangulatedMesh build_mesh(std::span<const Point2D> points, const MeshOptions& options);

/// Throws DataError when orientation, index range, duplicate or conformity
/// checks fail.
void validate_mesh(const TriangulatedMesh& mesh);

struct MeshStats {
  std::size_t n_vertices = 0;
  std::size_t n_triangles = 0;
  double min_angle = 0.0;  // degrees
  double max_edge = 0.0;
};

MeshStats mesh_stats(const TriangulatedMesh& mesh);

double signed_area(const Point2D& a, const Point2D& b, const Point2D& c);

struct BarycentricHit {
  std::size_t triangle = 0;
  std::array<double, 3> weights{};
};

/// Point location with a uniform bucket grid. Among triangles containing a
/// point the one with the lowest index wins.
class TriangleLocator {
 public:
  explicit TriangleLocator(const TriangulatedMesh& mesh);

  std::optional<BarycentricHit> locate(const Point2D& p) const;

 private:
  const TriangulatedMesh* mesh_;
  double x0_ = 0, y0_ = 0, cell_ = 1;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<int>> buckets_;
};

/// Sparse n_points x n_vertices matrix of barycentric weights.
struct Projector {
  Eigen::SparseMatrix<double, Eigen::RowMajor> weights;

  Eigen::Index rows() const { return weights.rows(); }
  Eigen::Index cols() const { return weights.cols(); }
};

/// Throws PointOutsideMesh naming the first point not covered by any triangle.
Projector barycentric_projector(const TriangulatedMesh& mesh, std::span<const Point2D> points);

/// Plain-text format: `vertices N triangles M`, N lines `x y inner_flag`,
/// M lines `i j k` (0-based).
void write_mesh(std::ostream& out, const TriangulatedMesh& mesh);
TriangulatedMesh read_mesh(std::istream& in);

}  // namespace stsm

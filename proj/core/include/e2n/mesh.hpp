#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace e2n::mesh
{

using Point = Eigen::Vector2d;
using Triangle = std::array<int, 3>;

/// Boundary markers used throughout: inflow carries Dirichlet data, outflow is natural,
/// walls are free-slip.
namespace marker
{
inline constexpr int inflow = 1;
inline constexpr int outflow = 2;
inline constexpr int wall = 3;
}  // namespace marker

struct BoundaryEdge
{
  int v0;
  int v1;
  int marker;
};

/// Area of the reference triangle (0,0), (1,0), (0,1).
inline constexpr double reference_area = 0.5;

/// Immutable 2D triangulation. Construction validates orientation, boundary coverage and
/// the optional refinement parent map.
class TriMesh
{
public:
  TriMesh(std::vector<Point> vertices, std::vector<Triangle> triangles,
          std::vector<BoundaryEdge> boundary_edges, std::vector<int> parent_map = {});

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_elements() const { return static_cast<int>(triangles_.size()); }
  int num_edges() const { return num_edges_; }

  const std::vector<Point> &vertices() const { return vertices_; }
  const Point &vertex(int v) const { return vertices_[v]; }
  const std::vector<Triangle> &triangles() const { return triangles_; }
  const Triangle &triangle(int k) const { return triangles_[k]; }
  const std::vector<BoundaryEdge> &boundary_edges() const { return boundary_; }

  bool has_parent_map() const { return !parent_map_.empty(); }
  /// Fine element index -> coarse element index; empty unless produced by refinement.
  const std::vector<int> &parent_map() const { return parent_map_; }
  int num_parents() const { return num_parents_; }

  double area(int k) const { return area_[k]; }
  Point centroid(int k) const;
  /// Length of the part of the element boundary lying on the domain boundary.
  double boundary_length(int k) const { return boundary_length_[k]; }
  double total_area() const;

  /// Elements sharing vertex v.
  std::span<const int> vertex_elements(int v) const
  {
    return {vertex_elem_.data() + vertex_elem_offset_[v],
            vertex_elem_.data() + vertex_elem_offset_[v + 1]};
  }

  /// Unique undirected edges, each stored with the smaller vertex first, sorted.
  std::vector<std::array<int, 2>> edges() const;

private:
  std::vector<Point> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<BoundaryEdge> boundary_;
  std::vector<int> parent_map_;
  int num_parents_ = 0;
  int num_edges_ = 0;
  std::vector<double> area_;
  std::vector<double> boundary_length_;
  std::vector<int> vertex_elem_offset_;
  std::vector<int> vertex_elem_;
};

using MeshPtr = std::shared_ptr<const TriMesh>;

double signed_area(const Point &a, const Point &b, const Point &c);

struct ElementGeometry
{
  double h1;
  double h2;
  double theta;
  double d;
  double s;
  double area;
  double boundary_length;
};

/// Right-triangle grid on [0, width] x [0, height] with round(width/h) x round(height/h)
/// cells. Left side is inflow, right side outflow, top and bottom walls. Diagonals are
/// mirrored about the vertical centre line so the mesh is (nearly) reflection symmetric.
TriMesh build_structured_mesh(double width_m, double height_m, double h_target);

/// Red refinement: every triangle is split at its edge midpoints into four. Coarse vertex
/// numbering is preserved; children of element k are 4k..4k+3 with child 3 the interior one.
TriMesh uniform_refine(const TriMesh &mesh);

/// Number of uniform_refine calls made by this process (instrumentation).
std::size_t uniform_refine_count();

ElementGeometry element_geometry(const TriMesh &mesh, int k);
ElementGeometry element_geometry(const std::array<Point, 3> &vertices, double boundary_length = 0.0);

/// Reflection x -> width - x, with triangle orientation restored.
TriMesh mirror_x(const TriMesh &mesh, double width);

/// Copy of the mesh with markers a and b exchanged.
TriMesh swap_markers(const TriMesh &mesh, int a, int b);

/// Copy of the mesh with every boundary edge set to the given marker.
TriMesh with_uniform_marker(const TriMesh &mesh, int marker);

void write_mesh(std::ostream &out, const TriMesh &mesh);
TriMesh read_mesh(std::istream &in);

}  // namespace e2n::mesh

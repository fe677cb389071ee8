#include "e2n/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "e2n/errors.hpp"
#include "text_io.hpp"

namespace e2n::mesh
{

namespace
{

std::atomic<std::size_t> refine_calls{0};

std::uint64_t edge_key(int a, int b)
{
  if (a > b)
  {
    std::swap(a, b);
  }
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

double signed_area(const Point &a, const Point &b, const Point &c)
{
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

TriMesh::TriMesh(std::vector<Point> vertices, std::vector<Triangle> triangles,
                 std::vector<BoundaryEdge> boundary_edges, std::vector<int> parent_map)
  : vertices_(std::move(vertices)), triangles_(std::move(triangles)),
    boundary_(std::move(boundary_edges)), parent_map_(std::move(parent_map))
{
  const int nv = num_vertices();
  const int ne = num_elements();
  if (ne == 0)
  {
    throw InvalidArgument("mesh has no triangles");
  }
  for (const auto &p : vertices_)
  {
    if (!std::isfinite(p.x()) || !std::isfinite(p.y()))
    {
      throw InvalidArgument("mesh vertex has non-finite coordinates");
    }
  }

  area_.resize(ne);
  for (int k = 0; k < ne; ++k)
  {
    for (int v : triangles_[k])
    {
      if (v < 0 || v >= nv)
      {
        throw InvalidArgument("triangle " + std::to_string(k) + " references vertex " +
                              std::to_string(v) + " out of range");
      }
    }
    const auto &t = triangles_[k];
    area_[k] = signed_area(vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]);
    if (!(area_[k] > 0.0))
    {
      throw DegenerateElement("triangle " + std::to_string(k) +
                              " has non-positive signed area");
    }
  }

  // Edge incidence: (key, element, local edge index) sorted by key.
  struct Incidence
  {
    std::uint64_t key;
    int element;
    int local;
  };
  std::vector<Incidence> inc;
  inc.reserve(3 * static_cast<std::size_t>(ne));
  for (int k = 0; k < ne; ++k)
  {
    const auto &t = triangles_[k];
    for (int i = 0; i < 3; ++i)
    {
      inc.push_back({edge_key(t[i], t[(i + 1) % 3]), k, i});
    }
  }
  std::sort(inc.begin(), inc.end(), [](const Incidence &a, const Incidence &b) {
    return a.key < b.key || (a.key == b.key && a.element < b.element);
  });

  std::vector<std::uint64_t> boundary_keys;
  boundary_length_.assign(ne, 0.0);
  num_edges_ = 0;
  for (std::size_t i = 0; i < inc.size();)
  {
    std::size_t j = i;
    while (j < inc.size() && inc[j].key == inc[i].key)
    {
      ++j;
    }
    ++num_edges_;
    if (j - i > 2)
    {
      throw InvalidArgument("non-manifold edge shared by more than two triangles");
    }
    if (j - i == 1)
    {
      boundary_keys.push_back(inc[i].key);
    }
    i = j;
  }

  std::vector<std::uint64_t> marked;
  marked.reserve(boundary_.size());
  for (const auto &e : boundary_)
  {
    if (e.v0 < 0 || e.v0 >= nv || e.v1 < 0 || e.v1 >= nv || e.v0 == e.v1)
    {
      throw InvalidArgument("boundary edge references invalid vertices");
    }
    if (e.marker < marker::inflow || e.marker > marker::wall)
    {
      throw InvalidArgument("boundary marker must be 1, 2 or 3");
    }
    marked.push_back(edge_key(e.v0, e.v1));
  }
  std::sort(marked.begin(), marked.end());
  if (std::adjacent_find(marked.begin(), marked.end()) != marked.end())
  {
    throw InvalidArgument("boundary edge listed twice");
  }
  if (marked != boundary_keys)
  {
    throw InvalidArgument("boundary markers do not match the topological boundary");
  }

  for (const auto &e : boundary_)
  {
    const auto key = edge_key(e.v0, e.v1);
    auto it = std::lower_bound(inc.begin(), inc.end(), key,
                               [](const Incidence &a, std::uint64_t k) { return a.key < k; });
    boundary_length_[it->element] += (vertices_[e.v1] - vertices_[e.v0]).norm();
  }

  vertex_elem_offset_.assign(nv + 1, 0);
  for (const auto &t : triangles_)
  {
    for (int v : t)
    {
      ++vertex_elem_offset_[v + 1];
    }
  }
  for (int v = 0; v < nv; ++v)
  {
    vertex_elem_offset_[v + 1] += vertex_elem_offset_[v];
  }
  vertex_elem_.resize(vertex_elem_offset_[nv]);
  std::vector<int> fill(vertex_elem_offset_.begin(), vertex_elem_offset_.end() - 1);
  for (int k = 0; k < ne; ++k)
  {
    for (int v : triangles_[k])
    {
      vertex_elem_[fill[v]++] = k;
    }
  }

  if (!parent_map_.empty())
  {
    if (static_cast<int>(parent_map_.size()) != ne)
    {
      throw HierarchyMismatch("parent map size differs from element count");
    }
    const int np = *std::max_element(parent_map_.begin(), parent_map_.end()) + 1;
    std::vector<int> children(np, 0);
    for (int p : parent_map_)
    {
      if (p < 0)
      {
        throw HierarchyMismatch("negative parent index");
      }
      ++children[p];
    }
    if (std::any_of(children.begin(), children.end(), [](int c) { return c != 4; }))
    {
      throw HierarchyMismatch("parent map must assign exactly four children to each parent");
    }
    num_parents_ = np;
  }
}

Point TriMesh::centroid(int k) const
{
  const auto &t = triangles_[k];
  return (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0;
}

double TriMesh::total_area() const
{
  double a = 0.0;
  for (double x : area_)
  {
    a += x;
  }
  return a;
}

std::vector<std::array<int, 2>> TriMesh::edges() const
{
  std::vector<std::uint64_t> keys;
  keys.reserve(3 * triangles_.size());
  for (const auto &t : triangles_)
  {
    for (int i = 0; i < 3; ++i)
    {
      keys.push_back(edge_key(t[i], t[(i + 1) % 3]));
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<std::array<int, 2>> out;
  out.reserve(keys.size());
  for (auto key : keys)
  {
    out.push_back({static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu)});
  }
  return out;
}

TriMesh build_structured_mesh(double width_m, double height_m, double h_target)
{
  if (!(width_m > 0.0) || !(height_m > 0.0) || !(h_target > 0.0))
  {
    throw InvalidArgument("structured mesh dimensions and cell size must be positive");
  }
  const int nx = std::max(1, static_cast<int>(std::lround(width_m / h_target)));
  const int ny = std::max(1, static_cast<int>(std::lround(height_m / h_target)));
  const double dx = width_m / nx;
  const double dy = height_m / ny;

  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
  {
    for (int i = 0; i <= nx; ++i)
    {
      // Pin the far sides so the domain is exact.
      const double x = (i == nx) ? width_m : i * dx;
      const double y = (j == ny) ? height_m : j * dy;
      pts.emplace_back(x, y);
    }
  }
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };

  std::vector<Triangle> tris;
  tris.reserve(2 * static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
  {
    for (int i = 0; i < nx; ++i)
    {
      const int p00 = id(i, j), p10 = id(i + 1, j), p11 = id(i + 1, j + 1), p01 = id(i, j + 1);
      if (2 * i + 1 <= nx)
      {
        tris.push_back({p00, p10, p11});
        tris.push_back({p00, p11, p01});
      }
      else
      {
        tris.push_back({p00, p10, p01});
        tris.push_back({p10, p11, p01});
      }
    }
  }

  std::vector<BoundaryEdge> bnd;
  for (int i = 0; i < nx; ++i)
  {
    bnd.push_back({id(i, 0), id(i + 1, 0), marker::wall});
    bnd.push_back({id(i + 1, ny), id(i, ny), marker::wall});
  }
  for (int j = 0; j < ny; ++j)
  {
    bnd.push_back({id(0, j + 1), id(0, j), marker::inflow});
    bnd.push_back({id(nx, j), id(nx, j + 1), marker::outflow});
  }
  return TriMesh(std::move(pts), std::move(tris), std::move(bnd));
}

TriMesh uniform_refine(const TriMesh &mesh)
{
  refine_calls.fetch_add(1, std::memory_order_relaxed);

  const auto edges = mesh.edges();
  std::vector<std::uint64_t> keys(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e)
  {
    keys[e] = edge_key(edges[e][0], edges[e][1]);
  }
  const int nv = mesh.num_vertices();
  auto midpoint = [&](int a, int b) {
    const auto it = std::lower_bound(keys.begin(), keys.end(), edge_key(a, b));
    return nv + static_cast<int>(it - keys.begin());
  };

  std::vector<Point> pts(mesh.vertices());
  pts.reserve(nv + edges.size());
  for (const auto &e : edges)
  {
    pts.push_back(0.5 * (mesh.vertex(e[0]) + mesh.vertex(e[1])));
  }

  std::vector<Triangle> tris;
  std::vector<int> parents;
  tris.reserve(4 * mesh.triangles().size());
  parents.reserve(4 * mesh.triangles().size());
  for (int k = 0; k < mesh.num_elements(); ++k)
  {
    const auto [a, b, c] = mesh.triangle(k);
    const int mab = midpoint(a, b), mbc = midpoint(b, c), mca = midpoint(c, a);
    tris.push_back({a, mab, mca});
    tris.push_back({mab, b, mbc});
    tris.push_back({mca, mbc, c});
    tris.push_back({mab, mbc, mca});
    parents.insert(parents.end(), 4, k);
  }

  std::vector<BoundaryEdge> bnd;
  bnd.reserve(2 * mesh.boundary_edges().size());
  for (const auto &e : mesh.boundary_edges())
  {
    const int m = midpoint(e.v0, e.v1);
    bnd.push_back({e.v0, m, e.marker});
    bnd.push_back({m, e.v1, e.marker});
  }
  return TriMesh(std::move(pts), std::move(tris), std::move(bnd), std::move(parents));
}

std::size_t uniform_refine_count()
{
  return refine_calls.load(std::memory_order_relaxed);
}

ElementGeometry element_geometry(const std::array<Point, 3> &v, double boundary_length)
{
  Eigen::Matrix2d jac;
  jac.col(0) = v[1] - v[0];
  jac.col(1) = v[2] - v[0];
  const double det = jac.determinant();
  const double scale = std::max({jac.col(0).squaredNorm(), jac.col(1).squaredNorm(),
                                 std::numeric_limits<double>::min()});
  if (!(std::abs(det) > 1e-14 * scale))
  {
    throw DegenerateElement("zero-area triangle");
  }
  const Eigen::Matrix2d jtj = jac.transpose() * jac;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig;
  eig.computeDirect(jtj);
  const Eigen::Vector2d lambda = eig.eigenvalues();  // ascending
  Eigen::Vector2d first = eig.eigenvectors().col(0);
  if (first.x() < 0.0 || (first.x() == 0.0 && first.y() < 0.0))
  {
    first = -first;
  }
  double theta = std::atan2(first.y(), first.x());
  if (theta < 0.0)
  {
    theta += 2.0 * std::numbers::pi;
  }

  ElementGeometry g{};
  g.h1 = 1.0 / std::sqrt(lambda[0]);
  g.h2 = 1.0 / std::sqrt(lambda[1]);
  g.theta = theta;
  g.d = g.h1 * g.h2;
  g.s = g.h1 / g.h2;
  g.area = reference_area * std::abs(det);
  g.boundary_length = boundary_length;
  return g;
}

ElementGeometry element_geometry(const TriMesh &mesh, int k)
{
  if (k < 0 || k >= mesh.num_elements())
  {
    throw InvalidArgument("element index out of range");
  }
  const auto &t = mesh.triangle(k);
  return element_geometry({mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2])},
                          mesh.boundary_length(k));
}

TriMesh mirror_x(const TriMesh &mesh, double width)
{
  std::vector<Point> pts;
  pts.reserve(mesh.num_vertices());
  for (const auto &p : mesh.vertices())
  {
    pts.emplace_back(width - p.x(), p.y());
  }
  std::vector<Triangle> tris;
  tris.reserve(mesh.num_elements());
  for (const auto &t : mesh.triangles())
  {
    tris.push_back({t[0], t[2], t[1]});
  }
  return TriMesh(std::move(pts), std::move(tris), mesh.boundary_edges(), mesh.parent_map());
}

TriMesh swap_markers(const TriMesh &mesh, int a, int b)
{
  auto bnd = mesh.boundary_edges();
  for (auto &e : bnd)
  {
    if (e.marker == a)
    {
      e.marker = b;
    }
    else if (e.marker == b)
    {
      e.marker = a;
    }
  }
  return TriMesh(mesh.vertices(), mesh.triangles(), std::move(bnd), mesh.parent_map());
}

TriMesh with_uniform_marker(const TriMesh &mesh, int m)
{
  auto bnd = mesh.boundary_edges();
  for (auto &e : bnd)
  {
    e.marker = m;
  }
  return TriMesh(mesh.vertices(), mesh.triangles(), std::move(bnd), mesh.parent_map());
}

void write_mesh(std::ostream &out, const TriMesh &mesh)
{
  out << "E2NMESH 1\n" << mesh.num_vertices() << '\n';
  for (const auto &p : mesh.vertices())
  {
    out << io::format_double(p.x()) << ' ' << io::format_double(p.y()) << '\n';
  }
  out << mesh.num_elements() << '\n';
  for (const auto &t : mesh.triangles())
  {
    out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  out << mesh.boundary_edges().size() << '\n';
  for (const auto &e : mesh.boundary_edges())
  {
    out << e.v0 << ' ' << e.v1 << ' ' << e.marker << '\n';
  }
}

TriMesh read_mesh(std::istream &in)
{
  io::LineReader reader(in);
  reader.expect_header("E2NMESH", 1);

  const int nv = reader.read_count();
  std::vector<Point> pts;
  pts.reserve(nv);
  for (int i = 0; i < nv; ++i)
  {
    const auto f = reader.read_doubles(2);
    pts.emplace_back(f[0], f[1]);
  }
  const int ne = reader.read_count();
  std::vector<Triangle> tris;
  tris.reserve(ne);
  for (int i = 0; i < ne; ++i)
  {
    const auto f = reader.read_ints(3);
    tris.push_back({f[0], f[1], f[2]});
  }
  const int nb = reader.read_count();
  std::vector<BoundaryEdge> bnd;
  bnd.reserve(nb);
  for (int i = 0; i < nb; ++i)
  {
    const auto f = reader.read_ints(3);
    bnd.push_back({f[0], f[1], f[2]});
  }
  try
  {
    return TriMesh(std::move(pts), std::move(tris), std::move(bnd));
  }
  catch (const Error &e)
  {
    throw ParseError(std::string("invalid mesh: ") + e.what(), reader.line());
  }
}

}  // namespace e2n::mesh

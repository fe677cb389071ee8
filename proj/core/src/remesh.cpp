#include "e2n/remesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/LU>

#include "e2n/errors.hpp"
#include "point_locator.hpp"

namespace e2n::remesh
{

using mesh::Point;
using metric::Tensor;

namespace
{

std::uint64_t edge_key(int a, int b)
{
  if (a > b)
  {
    std::swap(a, b);
  }
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double length_in(const Tensor &m, const Eigen::Vector2d &e)
{
  return std::sqrt(std::max(0.0, e.dot(m * e)));
}

// Background metric lookup.
class Locator
{
public:
  explicit Locator(const metric::MetricField &metric) : metric_(metric), points_(metric.mesh()) {}
  const Tensor &at(const Point &p) const { return metric_[points_.locate(p)]; }

private:
  const metric::MetricField &metric_;
  mesh::PointLocator points_;
};

// Pairs whose worst quality is already above this are left alone.
constexpr double flip_quality = 0.4;

struct EdgeInfo
{
  int a;
  int b;
  int t0;
  int t1;  // -1 on the boundary
};

class Remesher
{
public:
  Remesher(const mesh::TriMesh &m, const metric::MetricField &metric, const RemeshConfig &cfg)
    : locator_(metric), cfg_(cfg), pts_(m.vertices()), tris_(m.triangles())
  {
    alive_.assign(tris_.size(), 1);
    tensor_.resize(tris_.size());
    for (std::size_t k = 0; k < tris_.size(); ++k)
    {
      tensor_[k] = locator_.at(centroid(static_cast<int>(k)));
    }
    for (const auto &e : m.boundary_edges())
    {
      boundary_[edge_key(e.v0, e.v1)] = e.marker;
    }
    classify_boundary();
  }

  RemeshStats run()
  {
    RemeshStats stats;
    for (int pass = 0; pass < cfg_.max_passes; ++pass)
    {
      int changes = 0;
      for (int sweep = 0; sweep < 6; ++sweep)
      {
        const int n = split_sweep();
        stats.splits += n;
        changes += n;
        if (n == 0)
        {
          break;
        }
      }
      for (int sweep = 0; sweep < 6; ++sweep)
      {
        const int n = collapse_sweep();
        stats.collapses += n;
        changes += n;
        if (n == 0)
        {
          break;
        }
      }
      for (int sweep = 0; sweep < 3; ++sweep)
      {
        const int n = flip_sweep();
        stats.flips += n;
        changes += n;
        if (n == 0)
        {
          break;
        }
      }
      for (int s = 0; s < cfg_.smoothing_steps; ++s)
      {
        stats.moves += smooth();
      }
      check_orientation();
      ++stats.passes;
      if (changes < cfg_.stop_fraction * static_cast<double>(edge_count()))
      {
        break;
      }
    }
    return stats;
  }

  mesh::TriMesh result() const
  {
    std::vector<int> renum(pts_.size(), -1);
    std::vector<Point> pts;
    std::vector<mesh::Triangle> tris;
    for (std::size_t k = 0; k < tris_.size(); ++k)
    {
      if (!alive_[k])
      {
        continue;
      }
      for (int v : tris_[k])
      {
        if (renum[v] < 0)
        {
          renum[v] = 0;
        }
      }
    }
    for (std::size_t v = 0; v < pts_.size(); ++v)
    {
      if (renum[v] == 0)
      {
        renum[v] = static_cast<int>(pts.size());
        pts.push_back(pts_[v]);
      }
    }
    for (std::size_t k = 0; k < tris_.size(); ++k)
    {
      if (alive_[k])
      {
        tris.push_back({renum[tris_[k][0]], renum[tris_[k][1]], renum[tris_[k][2]]});
      }
    }
    std::vector<std::pair<std::uint64_t, int>> be(boundary_.begin(), boundary_.end());
    std::sort(be.begin(), be.end());
    std::vector<mesh::BoundaryEdge> edges;
    for (const auto &[key, marker] : be)
    {
      const int a = static_cast<int>(key >> 32);
      const int b = static_cast<int>(key & 0xffffffffu);
      edges.push_back({renum[a], renum[b], marker});
    }
    try
    {
      return mesh::TriMesh(std::move(pts), std::move(tris), std::move(edges));
    }
    catch (const Error &e)
    {
      throw RemeshFailure(std::string("adapted mesh failed validation: ") + e.what());
    }
  }

private:
  Point centroid(int k) const
  {
    const auto &t = tris_[k];
    return (pts_[t[0]] + pts_[t[1]] + pts_[t[2]]) / 3.0;
  }

  double area_of(const mesh::Triangle &t) const
  {
    return mesh::signed_area(pts_[t[0]], pts_[t[1]], pts_[t[2]]);
  }

  bool positive(const mesh::Triangle &t) const
  {
    const Point &a = pts_[t[0]], &b = pts_[t[1]], &c = pts_[t[2]];
    const double scale = (b - a).squaredNorm() + (c - b).squaredNorm() + (a - c).squaredNorm();
    return mesh::signed_area(a, b, c) > 1e-10 * scale;
  }

  double quality(const mesh::Triangle &t, const Tensor &m) const
  {
    return metric_quality({pts_[t[0]], pts_[t[1]], pts_[t[2]]}, m);
  }

  void classify_boundary()
  {
    on_boundary_.assign(pts_.size(), 0);
    fixed_.assign(pts_.size(), 0);
    dir_.assign(pts_.size(), Eigen::Vector2d::Zero());
    std::vector<std::vector<std::pair<int, int>>> inc(pts_.size());
    for (const auto &[key, marker] : boundary_)
    {
      const int a = static_cast<int>(key >> 32);
      const int b = static_cast<int>(key & 0xffffffffu);
      inc[a].push_back({b, marker});
      inc[b].push_back({a, marker});
    }
    for (std::size_t v = 0; v < pts_.size(); ++v)
    {
      if (inc[v].empty())
      {
        continue;
      }
      on_boundary_[v] = 1;
      if (inc[v].size() != 2 || inc[v][0].second != inc[v][1].second)
      {
        fixed_[v] = 1;
        continue;
      }
      const Eigen::Vector2d e0 = pts_[inc[v][0].first] - pts_[v];
      const Eigen::Vector2d e1 = pts_[inc[v][1].first] - pts_[v];
      const double cross = e0.x() * e1.y() - e0.y() * e1.x();
      if (std::abs(cross) > 1e-10 * e0.norm() * e1.norm() || e0.dot(e1) >= 0.0)
      {
        fixed_[v] = 1;
        continue;
      }
      dir_[v] = (e1 - e0).normalized();
    }
  }

  void add_vertex(const Point &p, bool boundary, const Eigen::Vector2d &dir)
  {
    pts_.push_back(p);
    on_boundary_.push_back(boundary ? 1 : 0);
    fixed_.push_back(0);
    dir_.push_back(dir);
  }

  int add_triangle(const mesh::Triangle &t)
  {
    tris_.push_back(t);
    alive_.push_back(1);
    tensor_.push_back(locator_.at(centroid(static_cast<int>(tris_.size()) - 1)));
    return static_cast<int>(tris_.size()) - 1;
  }

  std::size_t edge_count() const
  {
    const auto alive = static_cast<std::size_t>(std::count(alive_.begin(), alive_.end(), 1));
    return (3 * alive + boundary_.size()) / 2;
  }

  // Edges ordered by (lower vertex, higher vertex).
  std::vector<EdgeInfo> build_edges() const
  {
    std::vector<int> offset, items;
    build_vertex_map(offset, items);
    std::vector<EdgeInfo> edges;
    edges.reserve(items.size() / 2 + pts_.size());
    std::vector<std::pair<int, int>> local;
    for (int a = 0; a < static_cast<int>(pts_.size()); ++a)
    {
      local.clear();
      for (int q = offset[a]; q < offset[a + 1]; ++q)
      {
        for (int b : tris_[items[q]])
        {
          if (b > a)
          {
            local.push_back({b, items[q]});
          }
        }
      }
      std::sort(local.begin(), local.end());
      for (std::size_t i = 0; i < local.size();)
      {
        EdgeInfo e{a, local[i].first, local[i].second, -1};
        if (i + 1 < local.size() && local[i + 1].first == e.b)
        {
          e.t1 = local[i + 1].second;
          i += 2;
        }
        else
        {
          i += 1;
        }
        edges.push_back(e);
      }
    }
    return edges;
  }

  double edge_length(const EdgeInfo &e) const
  {
    Tensor m = tensor_[e.t0];
    if (e.t1 >= 0)
    {
      m = 0.5 * (m + tensor_[e.t1]);
    }
    return length_in(m, pts_[e.b] - pts_[e.a]);
  }

  // Vertex -> alive triangles, as CSR.
  void build_vertex_map(std::vector<int> &offset, std::vector<int> &items) const
  {
    offset.assign(pts_.size() + 1, 0);
    for (std::size_t k = 0; k < tris_.size(); ++k)
    {
      if (alive_[k])
      {
        for (int v : tris_[k])
        {
          ++offset[v + 1];
        }
      }
    }
    std::partial_sum(offset.begin(), offset.end(), offset.begin());
    items.resize(offset.back());
    std::vector<int> fill(offset.begin(), offset.end() - 1);
    for (std::size_t k = 0; k < tris_.size(); ++k)
    {
      if (alive_[k])
      {
        for (int v : tris_[k])
        {
          items[fill[v]++] = static_cast<int>(k);
        }
      }
    }
  }

  int split_sweep()
  {
    const auto edges = build_edges();
    std::vector<std::pair<double, int>> cand;
    for (std::size_t i = 0; i < edges.size(); ++i)
    {
      const double l = edge_length(edges[i]);
      if (l > cfg_.split_length * (1.0 + 1e-9))
      {
        cand.push_back({-l, static_cast<int>(i)});
      }
    }
    std::sort(cand.begin(), cand.end());
    std::vector<char> touched(tris_.size(), 0);
    int count = 0;
    for (const auto &[neg, idx] : cand)
    {
      const auto &e = edges[idx];
      if (touched[e.t0] || (e.t1 >= 0 && touched[e.t1]))
      {
        continue;
      }
      const auto key = edge_key(e.a, e.b);
      const auto bit = boundary_.find(key);
      const bool boundary = bit != boundary_.end();
      const int m = static_cast<int>(pts_.size());
      add_vertex(0.5 * (pts_[e.a] + pts_[e.b]), boundary,
                 boundary ? Eigen::Vector2d((pts_[e.b] - pts_[e.a]).normalized())
                          : Eigen::Vector2d::Zero());
      for (int t : {e.t0, e.t1})
      {
        if (t < 0)
        {
          continue;
        }
        const auto tri = tris_[t];
        int i = 0;
        while (!((tri[i] == e.a && tri[(i + 1) % 3] == e.b) ||
                 (tri[i] == e.b && tri[(i + 1) % 3] == e.a)))
        {
          ++i;
        }
        const int x = tri[i], y = tri[(i + 1) % 3], opp = tri[(i + 2) % 3];
        tris_[t] = {x, m, opp};
        tensor_[t] = locator_.at(centroid(t));
        touched[t] = 1;
        add_triangle({m, y, opp});
        touched.push_back(1);
      }
      if (boundary)
      {
        const int marker = bit->second;
        boundary_.erase(bit);
        boundary_[edge_key(e.a, m)] = marker;
        boundary_[edge_key(m, e.b)] = marker;
      }
      ++count;
    }
    return count;
  }

  int collapse_sweep()
  {
    const auto edges = build_edges();
    std::vector<int> offset, items;
    build_vertex_map(offset, items);
    std::vector<std::pair<double, int>> cand;
    for (std::size_t i = 0; i < edges.size(); ++i)
    {
      const double l = edge_length(edges[i]);
      if (l < cfg_.collapse_length)
      {
        cand.push_back({l, static_cast<int>(i)});
      }
    }
    std::sort(cand.begin(), cand.end());
    std::vector<char> locked(pts_.size(), 0);
    int count = 0;
    for (const auto &[len, idx] : cand)
    {
      const auto &e = edges[idx];
      if (locked[e.a] || locked[e.b])
      {
        continue;
      }
      if (try_collapse(e.a, e.b, offset, items, locked) ||
          try_collapse(e.b, e.a, offset, items, locked))
      {
        ++count;
      }
    }
    return count;
  }

  std::vector<int> neighbours(int v, const std::vector<int> &offset,
                              const std::vector<int> &items) const
  {
    std::vector<int> out;
    for (int q = offset[v]; q < offset[v + 1]; ++q)
    {
      for (int w : tris_[items[q]])
      {
        if (w != v)
        {
          out.push_back(w);
        }
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  // Removes vertex r by merging it into k.
  bool try_collapse(int r, int k, const std::vector<int> &offset, const std::vector<int> &items,
                    std::vector<char> &locked)
  {
    if (fixed_[r])
    {
      return false;
    }
    const auto key = edge_key(r, k);
    if (on_boundary_[r] && !boundary_.contains(key))
    {
      return false;
    }
    std::vector<int> &removed = scratch_removed_, &kept = scratch_kept_;
    std::vector<int> &opposite = scratch_opposite_;
    std::vector<mesh::Triangle> &updated = scratch_updated_;
    removed.clear();
    kept.clear();
    opposite.clear();
    updated.clear();
    for (int q = offset[r]; q < offset[r + 1]; ++q)
    {
      const int t = items[q];
      const auto &tri = tris_[t];
      if (tri[0] == k || tri[1] == k || tri[2] == k)
      {
        removed.push_back(t);
        for (int w : tri)
        {
          if (w != r && w != k)
          {
            opposite.push_back(w);
          }
        }
        continue;
      }
      auto moved = tri;
      for (auto &w : moved)
      {
        if (w == r)
        {
          w = k;
        }
      }
      if (!positive(moved))
      {
        return false;
      }
      const Tensor &m = tensor_[t];
      if (quality(moved, m) < cfg_.quality_floor)
      {
        return false;
      }
      for (int i = 0; i < 3; ++i)
      {
        if (length_in(m, pts_[moved[(i + 1) % 3]] - pts_[moved[i]]) > cfg_.split_length)
        {
          return false;
        }
      }
      kept.push_back(t);
      updated.push_back(moved);
    }
    if (kept.empty())
    {
      return false;
    }
    // Link condition: the only common neighbours are the vertices opposite the edge.
    const auto nr = neighbours(r, offset, items);
    const auto nk = neighbours(k, offset, items);
    std::vector<int> common;
    std::set_intersection(nr.begin(), nr.end(), nk.begin(), nk.end(), std::back_inserter(common));
    std::sort(opposite.begin(), opposite.end());
    if (common != opposite)
    {
      return false;
    }

    for (int t : removed)
    {
      alive_[t] = 0;
    }
    for (std::size_t i = 0; i < kept.size(); ++i)
    {
      tris_[kept[i]] = updated[i];
      tensor_[kept[i]] = locator_.at(centroid(kept[i]));
    }
    if (on_boundary_[r])
    {
      int marker = boundary_.at(key);
      boundary_.erase(key);
      for (int w : nr)
      {
        const auto it = boundary_.find(edge_key(w, r));
        if (it != boundary_.end())
        {
          marker = it->second;
          boundary_.erase(it);
          boundary_[edge_key(w, k)] = marker;
          break;
        }
      }
    }
    locked[r] = locked[k] = 1;
    for (int w : nr)
    {
      locked[w] = 1;
    }
    return true;
  }

  int flip_sweep()
  {
    const auto edges = build_edges();
    std::vector<std::uint64_t> keys(edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i)
    {
      keys[i] = edge_key(edges[i].a, edges[i].b);
    }
    std::vector<char> removed(edges.size(), 0);
    std::unordered_set<std::uint64_t> added;
    auto exists = [&](std::uint64_t key) {
      const auto it = std::lower_bound(keys.begin(), keys.end(), key);
      if (it != keys.end() && *it == key && !removed[it - keys.begin()])
      {
        return true;
      }
      return added.contains(key);
    };
    std::vector<char> touched(tris_.size(), 0);
    int count = 0;
    for (std::size_t ei = 0; ei < edges.size(); ++ei)
    {
      const auto &e = edges[ei];
      if (e.t1 < 0 || touched[e.t0] || touched[e.t1])
      {
        continue;
      }
      // Orient so that t0 = (a, b, c) and t1 = (b, a, d).
      auto t0 = tris_[e.t0];
      int i = 0;
      while (!((t0[i] == e.a && t0[(i + 1) % 3] == e.b) ||
               (t0[i] == e.b && t0[(i + 1) % 3] == e.a)))
      {
        ++i;
      }
      const int a = t0[i], b = t0[(i + 1) % 3], c = t0[(i + 2) % 3];
      const auto &t1 = tris_[e.t1];
      int d = -1;
      for (int w : t1)
      {
        if (w != a && w != b)
        {
          d = w;
        }
      }
      if (d < 0 || d == c || exists(edge_key(c, d)))
      {
        continue;
      }
      const mesh::Triangle n0{a, d, c}, n1{d, b, c};
      if (!positive(n0) || !positive(n1))
      {
        continue;
      }
      const Tensor m = 0.5 * (tensor_[e.t0] + tensor_[e.t1]);
      const double before = std::min(quality(tris_[e.t0], m), quality(t1, m));
      const double after = std::min(quality(n0, m), quality(n1, m));
      // A margin stops pairs flipping back once their tensors are re-sampled.
      if (before >= flip_quality || after <= before * 1.02)
      {
        continue;
      }
      tris_[e.t0] = n0;
      tris_[e.t1] = n1;
      tensor_[e.t0] = locator_.at(centroid(e.t0));
      tensor_[e.t1] = locator_.at(centroid(e.t1));
      touched[e.t0] = touched[e.t1] = 1;
      removed[ei] = 1;
      added.insert(edge_key(c, d));
      ++count;
    }
    return count;
  }

  int smooth()
  {
    std::vector<int> offset, items;
    build_vertex_map(offset, items);
    int moved = 0;
    for (std::size_t vi = 0; vi < pts_.size(); ++vi)
    {
      const int v = static_cast<int>(vi);
      if (offset[v] == offset[v + 1] || fixed_[v])
      {
        continue;
      }
      // Each neighbour proposes the point at unit metric distance along the current edge, using
      // the mean tensor of the triangles sharing that edge.
      auto &ring = scratch_ring_;
      ring.clear();
      for (int q = offset[v]; q < offset[v + 1]; ++q)
      {
        for (int w : tris_[items[q]])
        {
          if (w == v)
          {
            continue;
          }
          auto it = std::find_if(ring.begin(), ring.end(),
                                 [w](const RingEntry &e) { return e.vertex == w; });
          if (it == ring.end())
          {
            ring.push_back({w, Tensor::Zero(), 0});
            it = ring.end() - 1;
          }
          it->tensor += tensor_[items[q]];
          ++it->count;
        }
      }
      Eigen::Vector2d target = Eigen::Vector2d::Zero();
      int n = 0;
      for (const auto &e : ring)
      {
        const Eigen::Vector2d d = pts_[v] - pts_[e.vertex];
        const double l = length_in(e.tensor / e.count, d);
        if (l <= 0.0)
        {
          continue;
        }
        target += pts_[e.vertex] + d / l;
        ++n;
      }
      if (n == 0)
      {
        continue;
      }
      Eigen::Vector2d delta = 0.5 * (target / n - pts_[v]);
      if (on_boundary_[v])
      {
        delta = dir_[v] * dir_[v].dot(delta);
      }
      double before = std::numeric_limits<double>::infinity();
      for (int q = offset[v]; q < offset[v + 1]; ++q)
      {
        before = std::min(before, quality(tris_[items[q]], tensor_[items[q]]));
      }
      const Point old = pts_[v];
      bool accepted = false;
      for (int attempt = 0; attempt < 2 && !accepted; ++attempt, delta *= 0.5)
      {
        pts_[v] = old + delta;
        if (on_boundary_[v])
        {
          // Keep the coordinate across the segment exactly.
          if (std::abs(dir_[v].x()) < 1e-12)
          {
            pts_[v].x() = old.x();
          }
          if (std::abs(dir_[v].y()) < 1e-12)
          {
            pts_[v].y() = old.y();
          }
        }
        double after = std::numeric_limits<double>::infinity();
        bool valid = true;
        for (int q = offset[v]; q < offset[v + 1] && valid; ++q)
        {
          valid = positive(tris_[items[q]]);
          after = std::min(after, quality(tris_[items[q]], tensor_[items[q]]));
        }
        accepted = valid && after >= before;
      }
      if (!accepted)
      {
        pts_[v] = old;
      }
      else
      {
        for (int q = offset[v]; q < offset[v + 1]; ++q)
        {
          tensor_[items[q]] = locator_.at(centroid(items[q]));
        }
        ++moved;
      }
    }
    return moved;
  }

  void check_orientation() const
  {
    for (std::size_t k = 0; k < tris_.size(); ++k)
    {
      if (alive_[k] && !(area_of(tris_[k]) > 0.0))
      {
        throw RemeshFailure("remeshing produced an inverted element (" + std::to_string(k) + ")");
      }
    }
  }

  Locator locator_;
  RemeshConfig cfg_;
  std::vector<Point> pts_;
  std::vector<mesh::Triangle> tris_;
  std::vector<char> alive_;
  std::vector<Tensor> tensor_;
  std::unordered_map<std::uint64_t, int> boundary_;
  std::vector<char> on_boundary_;
  std::vector<char> fixed_;
  std::vector<Eigen::Vector2d> dir_;
  std::vector<int> scratch_removed_, scratch_kept_, scratch_opposite_;
  std::vector<mesh::Triangle> scratch_updated_;
  struct RingEntry
  {
    int vertex;
    Tensor tensor;
    int count;
  };
  std::vector<RingEntry> scratch_ring_;
};

}  // namespace

double metric_edge_length(const metric::MetricField &metric, const mesh::TriMesh &mesh,
                          const std::array<int, 2> &edge)
{
  const auto [a, b] = edge;
  if (a < 0 || b < 0 || a >= mesh.num_vertices() || b >= mesh.num_vertices() || a == b)
  {
    throw InvalidArgument("invalid edge");
  }
  if (&metric.mesh() != &mesh)
  {
    throw InvalidArgument("metric is defined on a different mesh");
  }
  Tensor m = Tensor::Zero();
  int n = 0;
  for (int k : mesh.vertex_elements(a))
  {
    const auto &t = mesh.triangle(k);
    if (t[0] == b || t[1] == b || t[2] == b)
    {
      m += metric[k];
      ++n;
    }
  }
  if (n == 0)
  {
    throw InvalidArgument("vertices do not share an edge");
  }
  return length_in(m / n, mesh.vertex(b) - mesh.vertex(a));
}

double metric_quality(const std::array<Point, 3> &tri, const Tensor &m)
{
  const double area = mesh::signed_area(tri[0], tri[1], tri[2]) * std::sqrt(m.determinant());
  double sum = 0.0;
  for (int i = 0; i < 3; ++i)
  {
    const Eigen::Vector2d e = tri[(i + 1) % 3] - tri[i];
    sum += e.dot(m * e);
  }
  return 4.0 * std::sqrt(3.0) * area / sum;
}

metric::MetricField transfer_metric(const metric::MetricField &metric, mesh::MeshPtr target)
{
  const Locator locator(metric);
  std::vector<Tensor> t(target->num_elements());
  for (int k = 0; k < target->num_elements(); ++k)
  {
    t[k] = locator.at(target->centroid(k));
  }
  return metric::MetricField(std::move(target), std::move(t));
}

mesh::TriMesh adapt_mesh(const mesh::TriMesh &mesh, const metric::MetricField &metric,
                         const RemeshConfig &config, RemeshStats *stats)
{
  if (!(config.split_length > 1.0 && config.collapse_length > 0.0 &&
        config.collapse_length < 1.0 && config.max_passes >= 0 && config.smoothing_steps >= 0))
  {
    throw InvalidArgument("remesh thresholds must satisfy split > 1 > collapse > 0");
  }
  if (metric.size() != mesh.num_elements() ||
      metric.mesh().num_vertices() != mesh.num_vertices())
  {
    throw InvalidArgument("metric is defined on a different mesh");
  }
  for (const auto &t : metric.tensors())
  {
    if (!metric::is_spd(t))
    {
      throw InvalidMetric("remeshing requires a symmetric positive definite metric");
    }
  }
  Remesher r(mesh, metric, config);
  const auto s = r.run();
  if (stats)
  {
    *stats = s;
  }
  return r.result();
}

}  // namespace e2n::remesh

#pragma once

// Point location on a triangle mesh: a quadtree over element bounding boxes for the
// common case, and a bucket grid ring search for points outside every element.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "e2n/mesh.hpp"

namespace e2n::mesh
{

class PointLocator
{
public:
  explicit PointLocator(const TriMesh &mesh) : mesh_(mesh)
  {
    lo_ = hi_ = mesh_.vertex(0);
    for (const auto &p : mesh_.vertices())
    {
      lo_ = lo_.cwiseMin(p);
      hi_ = hi_.cwiseMax(p);
    }
    const double span = std::max(hi_.x() - lo_.x(), hi_.y() - lo_.y());
    const double cell = std::max(std::sqrt(2.0 * mesh_.total_area() / mesh_.num_elements()),
                                 1e-12 * std::max(span, 1.0));
    nx_ = std::clamp(static_cast<int>(std::ceil((hi_.x() - lo_.x()) / cell)), 1, 4096);
    ny_ = std::clamp(static_cast<int>(std::ceil((hi_.y() - lo_.y()) / cell)), 1, 4096);
    cw_ = std::max((hi_.x() - lo_.x()) / nx_, 1e-300);
    ch_ = std::max((hi_.y() - lo_.y()) / ny_, 1e-300);

    offset_.assign(static_cast<std::size_t>(nx_) * ny_ + 1, 0);
    for (int k = 0; k < mesh_.num_elements(); ++k)
    {
      for_cells(k, [&](int c) { ++offset_[c + 1]; });
    }
    std::partial_sum(offset_.begin(), offset_.end(), offset_.begin());
    items_.resize(offset_.back());
    std::vector<int> fill(offset_.begin(), offset_.end() - 1);
    for (int k = 0; k < mesh_.num_elements(); ++k)
    {
      for_cells(k, [&](int c) { items_[fill[c]++] = k; });
    }

    boxes_.resize(mesh_.num_elements());
    std::vector<int> all(mesh_.num_elements());
    for (int k = 0; k < mesh_.num_elements(); ++k)
    {
      const auto &t = mesh_.triangle(k);
      Point a = mesh_.vertex(t[0]), b = a;
      for (int i = 1; i < 3; ++i)
      {
        a = a.cwiseMin(mesh_.vertex(t[i]));
        b = b.cwiseMax(mesh_.vertex(t[i]));
      }
      boxes_[k] = {a, b};
      all[k] = k;
    }
    nodes_.push_back({lo_, hi_, -1, 0, 0});
    build(0, all, 0);
  }

  /// Element containing p, or the element closest to containing it when p lies outside.
  int locate(const Point &p) const
  {
    if (p.x() >= lo_.x() && p.y() >= lo_.y() && p.x() <= hi_.x() && p.y() <= hi_.y())
    {
      int n = 0;
      while (nodes_[n].child >= 0)
      {
        const auto &node = nodes_[n];
        const Point mid = 0.5 * (node.lo + node.hi);
        n = node.child + (p.x() >= mid.x() ? 1 : 0) + (p.y() >= mid.y() ? 2 : 0);
      }
      for (int q = nodes_[n].begin; q < nodes_[n].end; ++q)
      {
        const auto l = barycentric(tree_items_[q], p);
        if (std::min({l[0], l[1], l[2]}) >= -1e-10)
        {
          return tree_items_[q];
        }
      }
    }
    return nearest(p);
  }

  std::array<double, 3> barycentric(int k, const Point &p) const
  {
    const auto &t = mesh_.triangle(k);
    const Point &a = mesh_.vertex(t[0]);
    const Point &b = mesh_.vertex(t[1]);
    const Point &c = mesh_.vertex(t[2]);
    const double area = signed_area(a, b, c);
    const double l0 = signed_area(p, b, c) / area;
    const double l1 = signed_area(a, p, c) / area;
    return {l0, l1, 1.0 - l0 - l1};
  }

private:
  struct Box
  {
    Point lo, hi;
  };
  struct Node
  {
    Point lo, hi;
    int child;  // first of four children, -1 for a leaf
    int begin, end;
  };

  static constexpr std::size_t leaf_size = 8;
  static constexpr int max_depth = 20;

  void build(int n, const std::vector<int> &elements, int depth)
  {
    if (elements.size() <= leaf_size || depth >= max_depth)
    {
      nodes_[n].begin = static_cast<int>(tree_items_.size());
      tree_items_.insert(tree_items_.end(), elements.begin(), elements.end());
      nodes_[n].end = static_cast<int>(tree_items_.size());
      return;
    }
    const Point lo = nodes_[n].lo, hi = nodes_[n].hi, mid = 0.5 * (lo + hi);
    std::array<std::vector<int>, 4> sub;
    std::array<Box, 4> quads;
    std::size_t total = 0;
    for (int c = 0; c < 4; ++c)
    {
      quads[c] = {Point((c & 1) ? mid.x() : lo.x(), (c & 2) ? mid.y() : lo.y()),
                  Point((c & 1) ? hi.x() : mid.x(), (c & 2) ? hi.y() : mid.y())};
      for (int k : elements)
      {
        const auto &b = boxes_[k];
        if (b.lo.x() <= quads[c].hi.x() && b.hi.x() >= quads[c].lo.x() &&
            b.lo.y() <= quads[c].hi.y() && b.hi.y() >= quads[c].lo.y())
        {
          sub[c].push_back(k);
        }
      }
      total += sub[c].size();
    }
    // Elements large compared with the node (e.g. a vertex star) would be copied into
    // every descendant; keep them in this leaf instead.
    if (total > 2 * elements.size())
    {
      build(n, elements, max_depth);
      return;
    }
    const int first = static_cast<int>(nodes_.size());
    nodes_[n].child = first;
    for (int c = 0; c < 4; ++c)
    {
      nodes_.push_back({quads[c].lo, quads[c].hi, -1, 0, 0});
    }
    for (int c = 0; c < 4; ++c)
    {
      build(first + c, sub[c], depth + 1);
    }
  }

  // Ring search over the bucket grid; also finds the closest element for outside points.
  int nearest(const Point &p) const
  {
    const int i = cx(p.x()), j = cy(p.y());
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int ring = 0; ring <= std::max(nx_, ny_); ++ring)
    {
      for (int jj = j - ring; jj <= j + ring; ++jj)
      {
        for (int ii = i - ring; ii <= i + ring; ++ii)
        {
          if (ii < 0 || jj < 0 || ii >= nx_ || jj >= ny_ ||
              (std::abs(ii - i) != ring && std::abs(jj - j) != ring))
          {
            continue;
          }
          const int c = jj * nx_ + ii;
          for (int q = offset_[c]; q < offset_[c + 1]; ++q)
          {
            const int k = items_[q];
            const auto l = barycentric(k, p);
            const double s = std::min({l[0], l[1], l[2]});
            if (s >= -1e-10)
            {
              return k;
            }
            if (s > best_score)
            {
              best_score = s;
              best = k;
            }
          }
        }
      }
      if (best >= 0 && ring >= 1)
      {
        return best;
      }
    }
    return best;
  }

  int cx(double x) const { return std::clamp(static_cast<int>((x - lo_.x()) / cw_), 0, nx_ - 1); }
  int cy(double y) const { return std::clamp(static_cast<int>((y - lo_.y()) / ch_), 0, ny_ - 1); }

  template <class Fn>
  void for_cells(int k, Fn &&fn) const
  {
    const auto &t = mesh_.triangle(k);
    Point a = mesh_.vertex(t[0]), b = a;
    for (int i = 1; i < 3; ++i)
    {
      a = a.cwiseMin(mesh_.vertex(t[i]));
      b = b.cwiseMax(mesh_.vertex(t[i]));
    }
    for (int j = cy(a.y()); j <= cy(b.y()); ++j)
    {
      for (int i = cx(a.x()); i <= cx(b.x()); ++i)
      {
        fn(j * nx_ + i);
      }
    }
  }

  const TriMesh &mesh_;
  Point lo_, hi_;
  int nx_ = 1, ny_ = 1;
  double cw_ = 1.0, ch_ = 1.0;
  std::vector<int> offset_;
  std::vector<int> items_;
  std::vector<Box> boxes_;
  std::vector<Node> nodes_;
  std::vector<int> tree_items_;
};

}  // namespace e2n::mesh

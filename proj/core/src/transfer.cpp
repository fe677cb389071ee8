#include "e2n/transfer.hpp"

#include <algorithm>

#include "e2n/errors.hpp"
#include "point_locator.hpp"

namespace e2n::mesh
{

namespace
{

void check_hierarchy(const TriMesh &coarse, const TriMesh &fine)
{
  if (!fine.has_parent_map() || fine.num_parents() != coarse.num_elements())
  {
    throw HierarchyMismatch("fine mesh is not a refinement of the coarse mesh");
  }
  if (fine.num_vertices() != coarse.num_vertices() + coarse.num_edges())
  {
    throw HierarchyMismatch("fine vertex count is inconsistent with red refinement");
  }
}

}  // namespace

fem::Field prolong(const fem::Field &coarse, const MeshPtr &fine_mesh)
{
  const TriMesh &cm = coarse.mesh();
  const TriMesh &fm = *fine_mesh;
  check_hierarchy(cm, fm);
  const auto &parents = fm.parent_map();

  if (coarse.space() == fem::Space::p0)
  {
    std::vector<double> v(fm.num_elements());
    for (int k = 0; k < fm.num_elements(); ++k)
    {
      v[k] = coarse[parents[k]];
    }
    return fem::Field(fine_mesh, fem::Space::p0, std::move(v));
  }

  const int nc = coarse.components();
  std::vector<double> v(static_cast<std::size_t>(nc) * fm.num_vertices(), 0.0);
  std::vector<char> done(fm.num_vertices(), 0);
  for (int i = 0; i < cm.num_vertices(); ++i)
  {
    if ((fm.vertex(i) - cm.vertex(i)).squaredNorm() != 0.0)
    {
      throw HierarchyMismatch("coarse vertex numbering is not preserved on the fine mesh");
    }
    for (int c = 0; c < nc; ++c)
    {
      v[nc * i + c] = coarse[nc * i + c];
    }
    done[i] = 1;
  }
  // Children of parent k: (a, mab, mca), (mab, b, mbc), (mca, mbc, c), (mab, mbc, mca).
  for (int k = 0; k < cm.num_elements(); ++k)
  {
    const auto [a, b, c] = cm.triangle(k);
    const auto &c0 = fm.triangle(4 * k);
    const auto &c1 = fm.triangle(4 * k + 1);
    if (parents[4 * k] != k || c0[0] != a || c1[1] != b)
    {
      throw HierarchyMismatch("fine element ordering does not follow red refinement");
    }
    const int mids[3] = {c0[1], c1[2], c0[2]};
    const int ends[3][2] = {{a, b}, {b, c}, {c, a}};
    for (int e = 0; e < 3; ++e)
    {
      const int m = mids[e];
      if (done[m])
      {
        continue;
      }
      for (int comp = 0; comp < nc; ++comp)
      {
        v[nc * m + comp] = 0.5 * (coarse[nc * ends[e][0] + comp] + coarse[nc * ends[e][1] + comp]);
      }
      done[m] = 1;
    }
  }
  return fem::Field(fine_mesh, coarse.space(), std::move(v));
}

fem::Field project_indicator(const fem::Field &fine, const MeshPtr &coarse_mesh)
{
  if (fine.space() != fem::Space::p0)
  {
    throw InvalidArgument("indicator projection expects a P0 field");
  }
  const TriMesh &fm = fine.mesh();
  if (!fm.has_parent_map() || fm.num_parents() != coarse_mesh->num_elements())
  {
    throw HierarchyMismatch("indicator mesh has no parent map onto the coarse mesh");
  }
  std::vector<double> v(coarse_mesh->num_elements(), 0.0);
  const auto &parents = fm.parent_map();
  for (int k = 0; k < fm.num_elements(); ++k)
  {
    v[parents[k]] += fine[k];
  }
  return fem::Field(coarse_mesh, fem::Space::p0, std::move(v));
}

fem::Field interpolate(const fem::Field &source, const MeshPtr &target)
{
  if (source.space() == fem::Space::p0)
  {
    throw InvalidArgument("interpolate expects a P1 field");
  }
  const TriMesh &sm = source.mesh();
  const int nc = source.components();
  const PointLocator locator(sm);
  std::vector<double> v(static_cast<std::size_t>(target->num_vertices()) * nc);
  for (int i = 0; i < target->num_vertices(); ++i)
  {
    const int k = locator.locate(target->vertex(i));
    auto l = locator.barycentric(k, target->vertex(i));
    double sum = 0.0;
    for (auto &x : l)
    {
      x = std::max(x, 0.0);
      sum += x;
    }
    const auto &t = sm.triangle(k);
    for (int c = 0; c < nc; ++c)
    {
      double value = 0.0;
      for (int a = 0; a < 3; ++a)
      {
        value += l[a] / sum * source[static_cast<std::size_t>(t[a]) * nc + c];
      }
      v[static_cast<std::size_t>(i) * nc + c] = value;
    }
  }
  return fem::Field(target, source.space(), std::move(v));
}

}  // namespace e2n::mesh

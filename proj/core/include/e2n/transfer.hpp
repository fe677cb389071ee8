#pragma once

#include "e2n/field.hpp"
#include "e2n/mesh.hpp"

namespace e2n::mesh
{

/// Transfer a coarse P0/P1 field onto a mesh produced by uniform_refine of its mesh.
/// Lagrange fields are reproduced exactly; P0 children inherit the parent value.
fem::Field prolong(const fem::Field &coarse, const MeshPtr &fine_mesh);

/// Sum-preserving transfer of per-element contributions from the refined mesh to its parent:
/// each parent receives the sum of its four children.
fem::Field project_indicator(const fem::Field &fine, const MeshPtr &coarse_mesh);

/// Evaluate a P1 field at the vertices of an unrelated mesh of the same domain. Points outside
/// the source mesh take the value at the nearest element's closest barycentric point.
fem::Field interpolate(const fem::Field &source, const MeshPtr &target);

}  // namespace e2n::mesh

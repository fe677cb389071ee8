#pragma once

#include <memory>
#include <random>

#include "e2n/mesh.hpp"
#include "e2n/model.hpp"

namespace e2n::testing
{

/// Small channel with one turbine; coarse enough for sub-second solves.
inline model::Scenario small_scenario(double mesh_size = 20.0)
{
  model::Scenario s;
  s.name = "small";
  s.width = 300.0;
  s.height = 120.0;
  s.mesh_size = mesh_size;
  model::Turbine t;
  t.center = {140.0, 60.0};
  s.turbines = {t};
  s.inflow_speed = 2.0;
  return s;
}

inline mesh::MeshPtr unit_square(int n)
{
  return std::make_shared<const mesh::TriMesh>(mesh::build_structured_mesh(1.0, 1.0, 1.0 / n));
}

inline mesh::MeshPtr share(mesh::TriMesh m)
{
  return std::make_shared<const mesh::TriMesh>(std::move(m));
}

}  // namespace e2n::testing

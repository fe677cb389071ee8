#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "e2n/mesh.hpp"

namespace e2n::fem
{

enum class Space
{
  p0,         ///< one value per element
  p1,         ///< one value per vertex
  p1_vector,  ///< two interleaved values per vertex: (u0, v0, u1, v1, ...)
};

std::string_view to_string(Space space);

/// Number of coefficients for `space` on `mesh`.
int space_dimension(const mesh::TriMesh &mesh, Space space);

/// Coefficient vector over a function space on a shared, immutable mesh.
class Field
{
public:
  Field(mesh::MeshPtr mesh, Space space, std::vector<double> values);

  static Field zeros(mesh::MeshPtr mesh, Space space);

  const mesh::TriMesh &mesh() const { return *mesh_; }
  const mesh::MeshPtr &mesh_ptr() const { return mesh_; }
  Space space() const { return space_; }
  int components() const { return space_ == Space::p1_vector ? 2 : 1; }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  Field scaled(double factor) const;

private:
  mesh::MeshPtr mesh_;
  Space space_;
  std::vector<double> values_;
};

}  // namespace e2n::fem

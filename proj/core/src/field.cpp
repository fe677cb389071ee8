#include "e2n/field.hpp"

#include <cmath>
#include <string>

#include "e2n/errors.hpp"

namespace e2n::fem
{

std::string_view to_string(Space space)
{
  switch (space)
  {
    case Space::p0:
      return "P0";
    case Space::p1:
      return "P1";
    case Space::p1_vector:
      return "P1x2";
  }
  return "?";
}

int space_dimension(const mesh::TriMesh &mesh, Space space)
{
  switch (space)
  {
    case Space::p0:
      return mesh.num_elements();
    case Space::p1:
      return mesh.num_vertices();
    case Space::p1_vector:
      return 2 * mesh.num_vertices();
  }
  return 0;
}

Field::Field(mesh::MeshPtr mesh, Space space, std::vector<double> values)
  : mesh_(std::move(mesh)), space_(space), values_(std::move(values))
{
  if (!mesh_)
  {
    throw InvalidArgument("field requires a mesh");
  }
  const int n = space_dimension(*mesh_, space_);
  if (static_cast<int>(values_.size()) != n)
  {
    throw InvalidArgument(std::string(to_string(space_)) + " field expects " +
                          std::to_string(n) + " values, got " +
                          std::to_string(values_.size()));
  }
  for (double v : values_)
  {
    if (!std::isfinite(v))
    {
      throw InvalidArgument("field values must be finite");
    }
  }
}

Field Field::zeros(mesh::MeshPtr mesh, Space space)
{
  const int n = space_dimension(*mesh, space);
  return Field(std::move(mesh), space, std::vector<double>(n, 0.0));
}

Field Field::scaled(double factor) const
{
  std::vector<double> v(values_);
  for (auto &x : v)
  {
    x *= factor;
  }
  return Field(mesh_, space_, std::move(v));
}

}  // namespace e2n::fem

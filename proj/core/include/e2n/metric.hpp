#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "e2n/dwr.hpp"
#include "e2n/field.hpp"
#include "e2n/mesh.hpp"

namespace e2n::metric
{

using Tensor = Eigen::Matrix2d;

/// Area-weighted patch average of element values onto vertices. `values` holds
/// `components` entries per element; the result holds as many per vertex.
std::vector<double> clement_average(const mesh::TriMesh &mesh, std::span<const double> values,
                                    int components);

/// Clement interpolant of a scalar P0 field.
fem::Field clement_interpolate(const fem::Field &p0);

/// Constant gradient of component `component` of a P1 field on each element.
std::vector<Eigen::Vector2d> element_gradients(const fem::Field &p1, int component = 0);

/// Vertex gradients: Clement interpolant of the element gradients.
std::vector<Eigen::Vector2d> recover_gradient(const fem::Field &p1, int component = 0);

/// Vertex Hessians: gradient recovery applied twice, then symmetrised.
std::vector<Tensor> recover_hessian(const fem::Field &p1, int component = 0);

/// Mean of the three vertex tensors of each element.
std::vector<Tensor> centroid_values(const mesh::TriMesh &mesh, const std::vector<Tensor> &vertex);

/// Piecewise-constant SPD tensor field.
class MetricField
{
public:
  MetricField(mesh::MeshPtr mesh, std::vector<Tensor> tensors);

  const mesh::TriMesh &mesh() const { return *mesh_; }
  const mesh::MeshPtr &mesh_ptr() const { return mesh_; }
  const Tensor &operator[](int k) const { return tensors_[k]; }
  const std::vector<Tensor> &tensors() const { return tensors_; }
  int size() const { return static_cast<int>(tensors_.size()); }

private:
  mesh::MeshPtr mesh_;
  std::vector<Tensor> tensors_;
};

/// True if the tensor is finite, symmetric and positive definite.
bool is_spd(const Tensor &m);

struct MetricOptions
{
  double alpha = 1.0;
  double max_stretch = 10.0;
  /// Floor applied to |indicator| before scaling.
  double indicator_floor = 1e-30;
};

/// Goal-oriented anisotropic metric: size from the indicators, shape and orientation from
/// the mean recovered Hessian of the velocity components, globally rescaled to the target
/// complexity.
MetricField build_metric(const dwr::IndicatorField &indicators, const fem::Field &u_h,
                         double target_complexity, const MetricOptions &options = {});

/// Stretching factor sqrt(|lambda_2 / lambda_1|), clamped to [1, max_stretch].
double stretching_factor(const Tensor &hessian, double max_stretch = 10.0);

/// Integral of sqrt(det M).
double complexity(const MetricField &metric);

/// Ramp 1/4, 1/2, 1, 1, ... of the target complexity.
double complexity_schedule(int iteration, double target);

void write_metric(std::ostream &out, const MetricField &metric);
MetricField read_metric(std::istream &in, mesh::MeshPtr mesh);

}  // namespace e2n::metric

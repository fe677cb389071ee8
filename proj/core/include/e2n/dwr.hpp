#pragma once

#include "e2n/fem.hpp"
#include "e2n/field.hpp"
#include "e2n/model.hpp"

namespace e2n::dwr
{

/// Per-element error contributions (P0) with their cached sum.
class IndicatorField
{
public:
  explicit IndicatorField(fem::Field values);

  const fem::Field &field() const { return field_; }
  const mesh::TriMesh &mesh() const { return field_.mesh(); }
  const mesh::MeshPtr &mesh_ptr() const { return field_.mesh_ptr(); }
  std::span<const double> values() const { return field_.values(); }
  double operator[](std::size_t k) const { return field_[k]; }
  std::size_t size() const { return field_.size(); }

  double total() const { return total_; }
  double abs_total() const;

private:
  fem::Field field_;
  double total_;
};

/// rho(u_h, u*_h) restricted to each element, with rho(u, v) = -(weak residual of u tested
/// with v), so that the sum approximates J(u) - J(u_h).
IndicatorField coarse_indicator(const model::FlowProblem &problem, const fem::Field &u_h,
                                const fem::Field &u_star_h);

struct EnrichedResult
{
  IndicatorField indicator;
  double estimator;
};

/// Enrichment by one uniform refinement: the fine adjoint is linearised about the prolonged
/// forward state and the residual is weighted with u*_{h/2} - P[u*_h]. Fine contributions are
/// summed onto their parents.
EnrichedResult enriched_indicator(const model::FlowProblem &problem, const fem::Field &u_h,
                                  const fem::Field &u_star_h);

struct Effectivity
{
  double estimator;
  double base_qoi;
  double reference_qoi;
  double effectivity;
};

/// Estimator over true error J(u_ref) - J(u_h), with u_ref solved `reference_levels` uniform
/// refinements beyond the base mesh.
Effectivity estimator_effectivity(const model::FlowProblem &problem, int reference_levels,
                                  const fem::NewtonOptions &options = {});

}  // namespace e2n::dwr

#pragma once

#include <array>
#include <string>

#include "e2n/mesh.hpp"
#include "e2n/metric.hpp"

namespace e2n::remesh
{

struct RemeshConfig
{
  double split_length = 1.4142135623730951;
  double collapse_length = 0.7071067811865476;
  int max_passes = 20;
  int smoothing_steps = 1;
  /// Minimum metric quality accepted for triangles created by collapses.
  double quality_floor = 0.1;
  /// A pass changing fewer than this fraction of edges ends the adaptation.
  double stop_fraction = 0.01;
};

/// sqrt(e^T M e) with M the mean of the tensors of the elements adjacent to the edge.
double metric_edge_length(const metric::MetricField &metric, const mesh::TriMesh &mesh,
                          const std::array<int, 2> &edge);

/// Metric quality 4 sqrt(3) |K|_M / sum of squared metric edge lengths (1 for a unit
/// equilateral triangle).
double metric_quality(const std::array<mesh::Point, 3> &tri, const metric::Tensor &m);

/// Piecewise-constant metric sampled at the element centroids of another mesh covering the
/// same domain.
metric::MetricField transfer_metric(const metric::MetricField &metric, mesh::MeshPtr target);

struct RemeshStats
{
  int passes = 0;
  int splits = 0;
  int collapses = 0;
  int flips = 0;
  int moves = 0;
};

/// Local remeshing towards a unit mesh in the metric: edge splits, collapses, flips and
/// smoothing, repeated until a pass changes few edges. Boundary vertices only slide along
/// their straight boundary segment; marker transitions and corners are kept.
mesh::TriMesh adapt_mesh(const mesh::TriMesh &mesh, const metric::MetricField &metric,
                         const RemeshConfig &config = {}, RemeshStats *stats = nullptr);

}  // namespace e2n::remesh

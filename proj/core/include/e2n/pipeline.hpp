#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "e2n/features.hpp"
#include "e2n/fem.hpp"
#include "e2n/metric.hpp"
#include "e2n/model.hpp"
#include "e2n/network.hpp"
#include "e2n/remesh.hpp"

namespace e2n::pipeline
{

enum class Estimator
{
  standard,  ///< enrichment by uniform refinement
  coarse,    ///< adjoint weights taken on the same mesh
  e2n,       ///< network surrogate of the standard indicator
};

std::string_view to_string(Estimator estimator);
/// Throws InvalidArgument for unknown names.
Estimator parse_estimator(std::string_view name);

struct AdaptConfig
{
  double target_complexity = 3200.0;
  int min_iterations = 3;
  int max_iterations = 35;
  double qoi_tolerance = 0.005;
  double element_tolerance = 0.01;
  Estimator estimator = Estimator::standard;
  /// Network checkpoint read when estimator is e2n and `network` is empty.
  std::string checkpoint;
  std::shared_ptr<const net::Mlp> network;
  metric::MetricOptions metric;
  remesh::RemeshConfig remesh;
  fem::NewtonOptions newton;
};

void validate(const AdaptConfig &config);

struct Timings
{
  double forward = 0.0;
  double adjoint = 0.0;
  double estimation = 0.0;
  double metric = 0.0;
  double adapt = 0.0;

  double total() const { return forward + adjoint + estimation + metric + adapt; }
  Timings &operator+=(const Timings &o);
};

struct IterationRecord
{
  int iteration = 0;
  int dofs = 0;
  int elements = 0;
  double qoi = 0.0;
  Timings timings;
};

struct RunRecord
{
  Estimator estimator = Estimator::standard;
  std::vector<IterationRecord> iterations;
  double final_qoi = 0.0;
  int final_dofs = 0;
  bool converged = false;
  /// Uniform refinements performed while estimating errors.
  std::size_t uniform_refinements = 0;
  mesh::MeshPtr final_mesh;

  Timings total_timings() const;
};

/// Raised when a solve or remesh fails inside the loop; carries the iterations completed so far.
class AdaptationFailure : public Error
{
public:
  AdaptationFailure(const std::string &what, RunRecord partial, bool nonconvergence)
    : Error(what), partial_(std::move(partial)), nonconvergence_(nonconvergence)
  {
  }
  const RunRecord &partial() const { return partial_; }
  /// True when the underlying cause was a Newton nonconvergence.
  bool nonconvergence() const { return nonconvergence_; }

private:
  RunRecord partial_;
  bool nonconvergence_;
};

/// Error indicator for the configured estimator.
dwr::IndicatorField estimate(const model::FlowProblem &problem, const fem::Field &u_h,
                             const fem::Field &u_star_h, Estimator estimator,
                             const net::Mlp *network = nullptr);

/// Solve, adjoint, indicate, build metric, remesh; repeated until the QoI and the element
/// count settle (not checked before `min_iterations`) or `max_iterations` is reached.
RunRecord fixed_point_adapt(const model::Scenario &scenario, const AdaptConfig &config);

/// Random training scenarios: 1-8 turbines at least 50 m apart, random depth, inflow and
/// viscosity.
std::vector<model::Scenario> generate_scenarios(int n, std::uint64_t seed);

struct HarvestOptions
{
  int iterations = 3;
  double target_complexity = 3200.0;
  metric::MetricOptions metric;
  remesh::RemeshConfig remesh;
  fem::NewtonOptions newton;
};

struct HarvestResult
{
  features::Dataset data;
  int skipped = 0;
  std::vector<std::string> warnings;
};

/// Runs the standard loop for a few iterations per scenario and records one row (features,
/// enriched indicator) per element of every mesh visited.
HarvestResult harvest_dataset(const std::vector<model::Scenario> &scenarios,
                              const HarvestOptions &options = {});

/// Named test cases: aligned, offset, reversed, trench.
model::Scenario preset_scenario(std::string_view name);

/// Solutions on the initial mesh and `levels` uniform refinements of it; each level starts
/// Newton from the prolonged coarser solution.
struct UniformLevel
{
  int level;
  int dofs;
  int elements;
  double qoi;
  double seconds;
};
std::vector<UniformLevel> uniform_sequence(const model::Scenario &scenario, int levels,
                                           const fem::NewtonOptions &options = {});

struct StudyRow
{
  std::string method;
  double parameter;  ///< refinement level or target complexity
  int dofs;
  int elements;
  double qoi;
  double relative_error;
  double seconds;
};

struct StudyConfig
{
  std::vector<double> complexities{800.0, 1600.0, 3200.0};
  int uniform_levels = 3;
  std::vector<Estimator> estimators{Estimator::standard};
  AdaptConfig adapt;
};

/// Uniform refinement and adaptive runs measured against the finest uniform level.
std::vector<StudyRow> convergence_study(const model::Scenario &scenario,
                                        const StudyConfig &config);
void write_study(std::ostream &out, const std::vector<StudyRow> &rows);

struct BenchmarkResult
{
  RunRecord run;
  Timings components;
  double wall_seconds = 0.0;
};

BenchmarkResult benchmark(const model::Scenario &scenario, const AdaptConfig &config);
/// Columns: component,seconds,fraction.
void write_benchmark(std::ostream &out, const BenchmarkResult &result);
/// Columns: iteration,dofs,elements,qoi,forward,adjoint,estimation,metric,adapt.
void write_run(std::ostream &out, const RunRecord &run);

}  // namespace e2n::pipeline

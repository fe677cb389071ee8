#include "e2n/dwr.hpp"

#include <cmath>

#include "e2n/errors.hpp"
#include "e2n/transfer.hpp"

namespace e2n::dwr
{

namespace
{

double sum(std::span<const double> v)
{
  double s = 0.0;
  for (double x : v)
  {
    s += x;
  }
  return s;
}

void check_pair(const model::FlowProblem &problem, const fem::Field &u, const fem::Field &z)
{
  if (&u.mesh() != &problem.mesh() || &z.mesh() != &problem.mesh())
  {
    throw InvalidArgument("forward and adjoint fields must live on the problem mesh");
  }
  if (u.space() != fem::Space::p1_vector || z.space() != fem::Space::p1_vector)
  {
    throw InvalidArgument("forward and adjoint fields must be vector P1");
  }
}

// Element-wise -R_K(u) . z_K.
std::vector<double> weighted_residuals(const model::FlowProblem &problem, const fem::Field &u,
                                       std::span<const double> weight)
{
  const auto r = fem::element_residuals(problem, u);
  const auto &m = problem.mesh();
  std::vector<double> out(m.num_elements());
  for (int k = 0; k < m.num_elements(); ++k)
  {
    const auto &t = m.triangle(k);
    double s = 0.0;
    for (int a = 0; a < 3; ++a)
    {
      for (int c = 0; c < 2; ++c)
      {
        s += r[6 * k + 2 * a + c] * weight[2 * t[a] + c];
      }
    }
    out[k] = -s;
  }
  return out;
}

}  // namespace

IndicatorField::IndicatorField(fem::Field values)
  : field_(std::move(values)), total_(sum(field_.values()))
{
  if (field_.space() != fem::Space::p0)
  {
    throw InvalidArgument("indicators are piecewise constant");
  }
}

double IndicatorField::abs_total() const
{
  double s = 0.0;
  for (double x : field_.values())
  {
    s += std::abs(x);
  }
  return s;
}

IndicatorField coarse_indicator(const model::FlowProblem &problem, const fem::Field &u_h,
                                const fem::Field &u_star_h)
{
  check_pair(problem, u_h, u_star_h);
  return IndicatorField(fem::Field(problem.mesh_ptr(), fem::Space::p0,
                                   weighted_residuals(problem, u_h, u_star_h.values())));
}

EnrichedResult enriched_indicator(const model::FlowProblem &problem, const fem::Field &u_h,
                                  const fem::Field &u_star_h)
{
  check_pair(problem, u_h, u_star_h);
  auto fine = std::make_shared<const mesh::TriMesh>(mesh::uniform_refine(problem.mesh()));
  const model::FlowProblem fine_problem = problem.refined(fine);
  const fem::Field u_fine = mesh::prolong(u_h, fine);
  const fem::Field z_fine = model::adjoint_solve(fine_problem, u_fine);
  const fem::Field z_prolonged = mesh::prolong(u_star_h, fine);

  std::vector<double> weight(z_fine.size());
  for (std::size_t i = 0; i < weight.size(); ++i)
  {
    weight[i] = z_fine[i] - z_prolonged[i];
  }
  fem::Field fine_indicator(fine, fem::Space::p0,
                            weighted_residuals(fine_problem, u_fine, weight));
  IndicatorField base(mesh::project_indicator(fine_indicator, problem.mesh_ptr()));
  const double estimator = base.total();
  return {std::move(base), estimator};
}

Effectivity estimator_effectivity(const model::FlowProblem &problem, int reference_levels,
                                  const fem::NewtonOptions &options)
{
  if (reference_levels < 0)
  {
    throw InvalidArgument("reference levels must be non-negative");
  }
  const auto base = model::solve_forward(problem, options);
  const double j_h = problem.qoi(base.solution);
  const fem::Field z = model::adjoint_solve(problem, base.solution);
  const double estimator = enriched_indicator(problem, base.solution, z).estimator;

  model::FlowProblem ref = problem;
  fem::Field u_ref = base.solution;
  for (int l = 0; l < reference_levels; ++l)
  {
    auto fine = std::make_shared<const mesh::TriMesh>(mesh::uniform_refine(ref.mesh()));
    ref = ref.refined(fine);
    u_ref = fem::newton_solve(ref, mesh::prolong(u_ref, fine), options).solution;
  }
  const double j_ref = ref.qoi(u_ref);
  const double error = j_ref - j_h;
  if (std::abs(error) <= 1e-14 * std::abs(j_ref))
  {
    throw IllConditionedEffectivity("reference and base QoI agree; effectivity is undefined");
  }
  return {estimator, j_h, j_ref, estimator / error};
}

}  // namespace e2n::dwr

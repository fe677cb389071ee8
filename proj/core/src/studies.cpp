#include <chrono>
#include <cmath>
#include <ostream>

#include "e2n/errors.hpp"
#include "e2n/pipeline.hpp"
#include "e2n/transfer.hpp"
#include "text_io.hpp"

namespace e2n::pipeline
{

namespace
{

double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<UniformLevel> uniform_sequence(const model::Scenario &scenario, int levels,
                                           const fem::NewtonOptions &options)
{
  if (levels < 0)
  {
    throw InvalidArgument("uniform level count must be non-negative");
  }
  std::vector<UniformLevel> out;
  mesh::MeshPtr m = model::initial_mesh(scenario);
  std::optional<fem::Field> previous;
  for (int l = 0; l <= levels; ++l)
  {
    const auto t0 = std::chrono::steady_clock::now();
    if (l > 0)
    {
      m = std::make_shared<const mesh::TriMesh>(mesh::uniform_refine(*m));
    }
    const model::FlowProblem problem(scenario, m);
    const auto guess = previous ? mesh::prolong(*previous, m) : problem.initial_guess();
    auto u = fem::newton_solve(problem, guess, options).solution;
    out.push_back({l, problem.num_dofs(), m->num_elements(), problem.qoi(u), seconds_since(t0)});
    previous = std::move(u);
  }
  return out;
}

std::vector<StudyRow> convergence_study(const model::Scenario &scenario,
                                        const StudyConfig &config)
{
  if (config.complexities.empty())
  {
    throw InvalidArgument("convergence study needs at least one complexity");
  }
  std::vector<StudyRow> rows;
  for (const auto &l : uniform_sequence(scenario, config.uniform_levels, config.adapt.newton))
  {
    rows.push_back({"uniform", static_cast<double>(l.level), l.dofs, l.elements, l.qoi, 0.0,
                    l.seconds});
  }
  const double benchmark = rows.back().qoi;

  for (const auto estimator : config.estimators)
  {
    for (const double c : config.complexities)
    {
      auto adapt = config.adapt;
      adapt.estimator = estimator;
      adapt.target_complexity = c;
      const auto t0 = std::chrono::steady_clock::now();
      const auto run = fixed_point_adapt(scenario, adapt);
      rows.push_back({std::string(to_string(estimator)), c, run.final_dofs,
                      run.final_mesh->num_elements(), run.final_qoi, 0.0, seconds_since(t0)});
    }
  }
  for (auto &r : rows)
  {
    r.relative_error = std::abs(r.qoi - benchmark) / std::abs(benchmark);
  }
  return rows;
}

void write_study(std::ostream &out, const std::vector<StudyRow> &rows)
{
  using io::format_double;
  out << "method,parameter,dofs,elements,qoi,relative_error,cpu_seconds\n";
  for (const auto &r : rows)
  {
    out << r.method << ',' << format_double(r.parameter) << ',' << r.dofs << ',' << r.elements
        << ',' << format_double(r.qoi) << ',' << format_double(r.relative_error) << ','
        << format_double(r.seconds) << '\n';
  }
}

BenchmarkResult benchmark(const model::Scenario &scenario, const AdaptConfig &config)
{
  BenchmarkResult result;
  const auto t0 = std::chrono::steady_clock::now();
  result.run = fixed_point_adapt(scenario, config);
  result.wall_seconds = seconds_since(t0);
  result.components = result.run.total_timings();
  return result;
}

void write_benchmark(std::ostream &out, const BenchmarkResult &result)
{
  using io::format_double;
  const auto &c = result.components;
  const double total = c.total();
  out << "component,seconds,fraction\n";
  const std::pair<const char *, double> parts[] = {{"forward", c.forward},
                                                   {"adjoint", c.adjoint},
                                                   {"estimation", c.estimation},
                                                   {"metric", c.metric},
                                                   {"adapt", c.adapt}};
  for (const auto &[name, s] : parts)
  {
    out << name << ',' << format_double(s) << ','
        << format_double(total > 0.0 ? s / total : 0.0) << '\n';
  }
  out << "total," << format_double(total) << ",1\n";
}

void write_run(std::ostream &out, const RunRecord &run)
{
  using io::format_double;
  out << "iteration,dofs,elements,qoi,forward,adjoint,estimation,metric,adapt\n";
  for (const auto &it : run.iterations)
  {
    const auto &t = it.timings;
    out << it.iteration << ',' << it.dofs << ',' << it.elements << ',' << format_double(it.qoi)
        << ',' << format_double(t.forward) << ',' << format_double(t.adjoint) << ','
        << format_double(t.estimation) << ',' << format_double(t.metric) << ','
        << format_double(t.adapt) << '\n';
  }
}

}  // namespace e2n::pipeline

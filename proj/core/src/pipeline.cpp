#include "e2n/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "e2n/dwr.hpp"
#include "e2n/errors.hpp"
#include "e2n/transfer.hpp"

namespace e2n::pipeline
{

namespace
{

class Stopwatch
{
public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double lap()
  {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

private:
  std::chrono::steady_clock::time_point start_;
};

bool settled(double current, double previous, double tolerance)
{
  return std::abs(current - previous) <= tolerance * std::abs(previous);
}

// Previous solution interpolated onto the new mesh, with the boundary data re-imposed.
fem::Field warm_start(const model::FlowProblem &problem, const std::optional<fem::Field> &previous)
{
  if (!previous)
  {
    return problem.initial_guess();
  }
  const auto guess = mesh::interpolate(*previous, problem.mesh_ptr());
  std::vector<double> v(guess.values().begin(), guess.values().end());
  for (const auto &d : problem.dirichlet())
  {
    v[d.dof] = d.value;
  }
  return fem::Field(problem.mesh_ptr(), guess.space(), std::move(v));
}

}  // namespace

std::string_view to_string(Estimator estimator)
{
  switch (estimator)
  {
  case Estimator::standard:
    return "standard";
  case Estimator::coarse:
    return "coarse";
  case Estimator::e2n:
    return "e2n";
  }
  return "unknown";
}

Estimator parse_estimator(std::string_view name)
{
  if (name == "standard")
    return Estimator::standard;
  if (name == "coarse")
    return Estimator::coarse;
  if (name == "e2n")
    return Estimator::e2n;
  throw InvalidArgument("unknown estimator '" + std::string(name) + "'");
}

void validate(const AdaptConfig &c)
{
  if (!(c.target_complexity > 0.0))
  {
    throw InvalidArgument("target complexity must be positive");
  }
  if (c.min_iterations < 0 || c.min_iterations > c.max_iterations)
  {
    throw InvalidArgument("iteration bounds must satisfy 0 <= min <= max");
  }
  if (!(c.qoi_tolerance > 0.0) || !(c.element_tolerance > 0.0))
  {
    throw InvalidArgument("convergence tolerances must be positive");
  }
  if (c.estimator == Estimator::e2n && !c.network && c.checkpoint.empty())
  {
    throw InvalidArgument("the e2n estimator needs a network checkpoint");
  }
}

Timings &Timings::operator+=(const Timings &o)
{
  forward += o.forward;
  adjoint += o.adjoint;
  estimation += o.estimation;
  metric += o.metric;
  adapt += o.adapt;
  return *this;
}

Timings RunRecord::total_timings() const
{
  Timings t;
  for (const auto &it : iterations)
  {
    t += it.timings;
  }
  return t;
}

dwr::IndicatorField estimate(const model::FlowProblem &problem, const fem::Field &u_h,
                             const fem::Field &u_star_h, Estimator estimator,
                             const net::Mlp *network)
{
  switch (estimator)
  {
  case Estimator::standard:
    return dwr::enriched_indicator(problem, u_h, u_star_h).indicator;
  case Estimator::coarse:
    return dwr::coarse_indicator(problem, u_h, u_star_h);
  case Estimator::e2n:
    if (!network)
    {
      throw InvalidArgument("the e2n estimator needs a network");
    }
    return net::predict_indicator(*network, problem, u_h, u_star_h);
  }
  throw InvalidArgument("unknown estimator");
}

RunRecord fixed_point_adapt(const model::Scenario &scenario, const AdaptConfig &config)
{
  validate(config);
  model::validate(scenario);
  std::shared_ptr<const net::Mlp> network = config.network;
  if (config.estimator == Estimator::e2n && !network)
  {
    network = std::make_shared<const net::Mlp>(net::load(config.checkpoint));
  }

  RunRecord record;
  record.estimator = config.estimator;
  const std::size_t refinements_before = mesh::uniform_refine_count();
  mesh::MeshPtr current = model::initial_mesh(scenario);

  auto fail = [&](const std::string &stage, const Error &e, bool nonconvergence) {
    record.uniform_refinements = mesh::uniform_refine_count() - refinements_before;
    record.final_mesh = current;
    return AdaptationFailure(stage + " failed at iteration " +
                               std::to_string(record.iterations.size()) + ": " + e.what(),
                             record, nonconvergence);
  };

  std::optional<fem::Field> previous;
  for (int i = 0; i < config.max_iterations; ++i)
  {
    IterationRecord it;
    it.iteration = i;
    it.elements = current->num_elements();
    Stopwatch clock;

    const model::FlowProblem problem(scenario, current);
    std::optional<fem::Field> u;
    try
    {
      u = fem::newton_solve(problem, warm_start(problem, previous), config.newton).solution;
    }
    catch (const fem::NonConvergence &e)
    {
      throw fail("forward solve", e, true);
    }
    catch (const Error &e)
    {
      throw fail("forward solve", e, false);
    }
    previous = u;
    it.qoi = problem.qoi(*u);
    it.dofs = problem.num_dofs();
    it.timings.forward = clock.lap();

    const bool qoi_converged = i >= config.min_iterations && !record.iterations.empty() &&
                               settled(it.qoi, record.iterations.back().qoi,
                                       config.qoi_tolerance);
    record.iterations.push_back(it);
    record.final_qoi = it.qoi;
    record.final_dofs = it.dofs;
    record.final_mesh = current;
    if (qoi_converged)
    {
      record.converged = true;
      break;
    }
    auto &rec = record.iterations.back();

    mesh::MeshPtr next;
    try
    {
      const auto z = model::adjoint_solve(problem, *u);
      rec.timings.adjoint = clock.lap();
      const auto indicator = estimate(problem, *u, z, config.estimator, network.get());
      rec.timings.estimation = clock.lap();
      const auto m = metric::build_metric(
        indicator, *u, metric::complexity_schedule(i, config.target_complexity), config.metric);
      rec.timings.metric = clock.lap();
      next = std::make_shared<const mesh::TriMesh>(remesh::adapt_mesh(*current, m, config.remesh));
      rec.timings.adapt = clock.lap();
    }
    catch (const Error &e)
    {
      throw fail("error estimation or adaptation", e, false);
    }

    const bool mesh_converged = i >= config.min_iterations &&
                                settled(next->num_elements(), current->num_elements(),
                                        config.element_tolerance);
    if (mesh_converged)
    {
      record.converged = true;
      break;
    }
    current = next;
  }
  record.uniform_refinements = mesh::uniform_refine_count() - refinements_before;
  return record;
}

std::vector<model::Scenario> generate_scenarios(int n, std::uint64_t seed)
{
  if (n < 1)
  {
    throw InvalidArgument("scenario count must be at least 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(1, 8);
  std::uniform_real_distribution<double> ux(50.0, 1150.0), uy(50.0, 450.0);
  std::uniform_real_distribution<double> depth(20.0, 100.0), inflow(0.5, 6.0), nu(0.1, 1.0);

  std::vector<model::Scenario> out;
  out.reserve(n);
  for (int s = 0; s < n; ++s)
  {
    model::Scenario sc;
    sc.name = "random-" + std::to_string(seed) + "-" + std::to_string(s);
    const int turbines = count(rng);
    while (static_cast<int>(sc.turbines.size()) < turbines)
    {
      const model::Point p(ux(rng), uy(rng));
      bool clear = true;
      for (const auto &t : sc.turbines)
      {
        clear = clear && (t.center - p).norm() >= model::turbine_clearance;
      }
      if (clear)
      {
        model::Turbine t;
        t.center = p;
        sc.turbines.push_back(t);
      }
    }
    sc.bathymetry = model::Bathymetry::constant(depth(rng));
    sc.inflow_speed = inflow(rng);
    sc.viscosity = nu(rng);
    out.push_back(std::move(sc));
  }
  return out;
}

HarvestResult harvest_dataset(const std::vector<model::Scenario> &scenarios,
                              const HarvestOptions &options)
{
  if (options.iterations < 1 || !(options.target_complexity > 0.0))
  {
    throw InvalidArgument("harvest needs at least one iteration and a positive complexity");
  }
  HarvestResult result;
  for (std::size_t s = 0; s < scenarios.size(); ++s)
  {
    std::vector<features::DatasetRow> rows;
    try
    {
      mesh::MeshPtr current = model::initial_mesh(scenarios[s]);
      for (int i = 0; i < options.iterations; ++i)
      {
        const model::FlowProblem problem(scenarios[s], current);
        const auto u = fem::newton_solve(problem, problem.initial_guess(), options.newton).solution;
        const auto z = model::adjoint_solve(problem, u);
        const auto coarse = dwr::coarse_indicator(problem, u, z);
        const auto enriched = dwr::enriched_indicator(problem, u, z);
        const auto f = features::extract_features(scenarios[s], u, z, coarse);
        for (std::size_t k = 0; k < f.size(); ++k)
        {
          rows.push_back({static_cast<int>(s), i, f[k], enriched.indicator[k]});
        }
        if (i + 1 < options.iterations)
        {
          const auto m = metric::build_metric(
            enriched.indicator, u, metric::complexity_schedule(i, options.target_complexity),
            options.metric);
          current =
            std::make_shared<const mesh::TriMesh>(remesh::adapt_mesh(*current, m, options.remesh));
        }
      }
    }
    catch (const Error &e)
    {
      ++result.skipped;
      result.warnings.push_back("skipped scenario " + std::to_string(s) + " (" +
                                scenarios[s].name + "): " + e.what());
      continue;
    }
    result.data.rows.insert(result.data.rows.end(), rows.begin(), rows.end());
  }
  return result;
}

model::Scenario preset_scenario(std::string_view name)
{
  model::Scenario s;
  s.name = std::string(name);
  s.viscosity = 0.5;
  s.bathymetry = model::Bathymetry::constant(40.0);
  s.inflow_speed = 5.0;
  auto place = [&](double y0, double y1) {
    s.turbines.clear();
    model::Turbine a, b;
    a.center = {456.0, y0};
    b.center = {744.0, y1};
    s.turbines = {a, b};
  };
  if (name == "aligned")
  {
    place(250.0, 250.0);
  }
  else if (name == "offset")
  {
    place(232.0, 268.0);
  }
  else if (name == "reversed")
  {
    place(250.0, 250.0);
    s.inflow_speed = -5.0;
  }
  else if (name == "trench")
  {
    place(232.0, 268.0);
    s.viscosity = 2.0;
    s.inflow_speed = 10.0;
    s.bathymetry = model::Bathymetry::trench(160.0, 40.0);
  }
  else
  {
    throw InvalidArgument("unknown preset '" + std::string(name) +
                          "' (expected aligned, offset, reversed or trench)");
  }
  model::validate(s);
  return s;
}

}  // namespace e2n::pipeline

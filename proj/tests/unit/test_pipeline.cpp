#include <doctest.h>

#include <set>
#include <sstream>

#include "e2n/dwr.hpp"
#include "e2n/errors.hpp"
#include "e2n/pipeline.hpp"
#include "helpers.hpp"

using namespace e2n;

namespace
{

pipeline::AdaptConfig small_config()
{
  pipeline::AdaptConfig c;
  c.target_complexity = 400.0;
  c.max_iterations = 8;
  return c;
}

}  // namespace

TEST_SUITE("pipeline")
{
  TEST_CASE("estimator names")
  {
    for (auto e : {pipeline::Estimator::standard, pipeline::Estimator::coarse,
                   pipeline::Estimator::e2n})
      CHECK(pipeline::parse_estimator(pipeline::to_string(e)) == e);
    CHECK_THROWS_AS(pipeline::parse_estimator("fancy"), InvalidArgument);
  }

  TEST_CASE("configuration validation")
  {
    auto c = small_config();
    CHECK_NOTHROW(pipeline::validate(c));
    c.target_complexity = 0.0;
    CHECK_THROWS_AS(pipeline::validate(c), InvalidArgument);
    c = small_config();
    c.min_iterations = 9;
    CHECK_THROWS_AS(pipeline::validate(c), InvalidArgument);
    c = small_config();
    c.qoi_tolerance = 0.0;
    CHECK_THROWS_AS(pipeline::validate(c), InvalidArgument);
    c = small_config();
    c.estimator = pipeline::Estimator::e2n;
    CHECK_THROWS_AS(pipeline::validate(c), InvalidArgument);
    c.checkpoint = "/nonexistent/net.ckpt";
    CHECK_NOTHROW(pipeline::validate(c));
    CHECK_THROWS_AS(pipeline::fixed_point_adapt(testing::small_scenario(), c), InvalidArgument);
  }

  TEST_CASE("fixed-point loop with the standard estimator")
  {
    const auto run = pipeline::fixed_point_adapt(testing::small_scenario(10.0), small_config());
    REQUIRE_FALSE(run.iterations.empty());
    CHECK(run.converged);
    CHECK(static_cast<int>(run.iterations.size()) >= small_config().min_iterations + 1);
    for (std::size_t i = 0; i < run.iterations.size(); ++i)
    {
      const auto &it = run.iterations[i];
      CHECK(it.iteration == static_cast<int>(i));
      CHECK(it.dofs > 0);
      CHECK(it.qoi > 0.0);
      CHECK(it.timings.forward > 0.0);
      CHECK(it.timings.adjoint >= 0.0);
    }
    // One enrichment per estimated iteration.
    int estimated = 0;
    for (const auto &it : run.iterations)
      estimated += it.timings.estimation > 0.0 ? 1 : 0;
    CHECK(run.uniform_refinements == static_cast<std::size_t>(estimated));
    CHECK(run.final_qoi == run.iterations.back().qoi);
    CHECK(run.final_dofs == run.iterations.back().dofs);
    CHECK(run.final_mesh->num_elements() == run.iterations.back().elements);
    const auto t = run.total_timings();
    CHECK(t.total() == doctest::Approx(t.forward + t.adjoint + t.estimation + t.metric + t.adapt));
  }

  TEST_CASE("convergence is never declared before the minimum iteration count")
  {
    for (int min_it : {0, 2, 5})
    {
      auto c = small_config();
      c.min_iterations = min_it;
      c.max_iterations = 10;
      c.qoi_tolerance = 0.5;
      c.estimator = pipeline::Estimator::coarse;
      const auto run = pipeline::fixed_point_adapt(testing::small_scenario(10.0), c);
      CHECK(run.converged);
      CHECK(static_cast<int>(run.iterations.size()) >= min_it + 1);
      CHECK(run.uniform_refinements == 0);
    }
    auto c = small_config();
    c.min_iterations = 0;
    c.max_iterations = 2;
    c.qoi_tolerance = 1e-12;
    c.element_tolerance = 1e-12;
    const auto run = pipeline::fixed_point_adapt(testing::small_scenario(10.0), c);
    CHECK_FALSE(run.converged);
    CHECK(run.iterations.size() == 2);
  }

  TEST_CASE("network estimator performs no refinement")
  {
    auto c = small_config();
    c.estimator = pipeline::Estimator::e2n;
    c.network = std::make_shared<const net::Mlp>(net::init(1));
    c.max_iterations = 3;
    c.min_iterations = 3;
    const auto run = pipeline::fixed_point_adapt(testing::small_scenario(10.0), c);
    CHECK(run.uniform_refinements == 0);
    CHECK(run.iterations.size() == 3);
  }

  TEST_CASE("solver failures carry the partial run")
  {
    auto c = small_config();
    c.newton.max_iter = 1;
    try
    {
      pipeline::fixed_point_adapt(testing::small_scenario(10.0), c);
      FAIL("expected AdaptationFailure");
    }
    catch (const pipeline::AdaptationFailure &e)
    {
      CHECK(e.nonconvergence());
      CHECK(e.partial().iterations.empty());
      CHECK(e.partial().final_mesh != nullptr);
    }
  }

  TEST_CASE("scenario generation")
  {
    const auto a = pipeline::generate_scenarios(40, 17);
    const auto b = pipeline::generate_scenarios(40, 17);
    const auto c = pipeline::generate_scenarios(40, 18);
    REQUIRE(a.size() == 40);
    std::set<std::size_t> counts;
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
      CHECK_NOTHROW(model::validate(a[i]));
      CHECK(a[i].turbines.size() >= 1);
      CHECK(a[i].turbines.size() <= 8);
      counts.insert(a[i].turbines.size());
      CHECK(a[i].width == 1200.0);
      CHECK(a[i].height == 500.0);
      CHECK(a[i].bathymetry.depth >= 20.0);
      CHECK(a[i].bathymetry.depth <= 100.0);
      CHECK(a[i].inflow_speed >= 0.5);
      CHECK(a[i].inflow_speed <= 6.0);
      CHECK(a[i].viscosity >= 0.1);
      CHECK(a[i].viscosity <= 1.0);
      REQUIRE(a[i].turbines.size() == b[i].turbines.size());
      for (std::size_t t = 0; t < a[i].turbines.size(); ++t)
      {
        CHECK(a[i].turbines[t].center == b[i].turbines[t].center);
        for (std::size_t u = 0; u < t; ++u)
          CHECK((a[i].turbines[t].center - a[i].turbines[u].center).norm() >=
                model::turbine_clearance);
      }
      differs = differs || a[i].viscosity != c[i].viscosity;
    }
    CHECK(counts.size() >= 5);
    CHECK(differs);
    CHECK_THROWS_AS(pipeline::generate_scenarios(0, 1), InvalidArgument);
  }

  TEST_CASE("presets")
  {
    for (const char *name : {"aligned", "offset", "reversed", "trench"})
    {
      const auto s = pipeline::preset_scenario(name);
      CHECK_NOTHROW(model::validate(s));
      CHECK(s.turbines.size() == 2);
    }
    CHECK(pipeline::preset_scenario("reversed").inflow_speed < 0.0);
    CHECK(pipeline::preset_scenario("trench").bathymetry.profile ==
          model::Bathymetry::Profile::trench);
    CHECK_THROWS_AS(pipeline::preset_scenario("atlantis"), InvalidArgument);
  }

  TEST_CASE("harvested targets are the enriched indicators")
  {
    auto scenarios = pipeline::generate_scenarios(2, 3);
    auto broken = scenarios[0];
    broken.viscosity = -1.0;
    scenarios.push_back(broken);
    pipeline::HarvestOptions opts;
    opts.iterations = 2;
    opts.target_complexity = 800.0;
    const auto h = pipeline::harvest_dataset(scenarios, opts);
    CHECK(h.skipped == 1);
    CHECK(h.warnings.size() == 1);

    // Recompute scenario 0, iteration 0 independently.
    const auto &s = scenarios[0];
    const model::FlowProblem problem(s, model::initial_mesh(s));
    const auto u = model::solve_forward(problem).solution;
    const auto z = model::adjoint_solve(problem, u);
    const auto enriched = dwr::enriched_indicator(problem, u, z).indicator;
    const auto f = features::extract_features(s, u, z, dwr::coarse_indicator(problem, u, z));
    std::vector<const features::DatasetRow *> first;
    std::set<std::pair<int, int>> keys;
    for (const auto &r : h.data.rows)
    {
      keys.insert({r.scenario, r.iteration});
      if (r.scenario == 0 && r.iteration == 0)
        first.push_back(&r);
    }
    CHECK(keys == std::set<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    REQUIRE(first.size() == enriched.size());
    for (std::size_t k = 0; k < first.size(); ++k)
    {
      CHECK(first[k]->target == doctest::Approx(enriched[k]).epsilon(1e-9));
      CHECK(first[k]->features[0] == doctest::Approx(f[k][0]).epsilon(1e-9));
      CHECK(first[k]->features[4] == f[k][4]);
    }
    CHECK_THROWS_AS(pipeline::harvest_dataset(scenarios, {0}), InvalidArgument);
  }

  TEST_CASE("uniform sequence and study tables")
  {
    const auto s = testing::small_scenario(20.0);
    const auto levels = pipeline::uniform_sequence(s, 2);
    REQUIRE(levels.size() == 3);
    CHECK(levels[1].elements == 4 * levels[0].elements);
    CHECK(levels[2].elements == 4 * levels[1].elements);

    pipeline::StudyConfig cfg;
    cfg.uniform_levels = 2;
    cfg.complexities = {300.0};
    cfg.estimators = {pipeline::Estimator::coarse};
    const auto rows = pipeline::convergence_study(s, cfg);
    REQUIRE(rows.size() == 4);
    CHECK(rows[2].relative_error == 0.0);
    CHECK(rows[3].method == "coarse");
    std::stringstream out;
    pipeline::write_study(out, rows);
    CHECK(out.str().rfind("method,parameter,dofs,elements,qoi,relative_error,cpu_seconds\n", 0) ==
          0);

    auto ac = small_config();
    ac.estimator = pipeline::Estimator::coarse;
    const auto bench = pipeline::benchmark(s, ac);
    CHECK(bench.wall_seconds >= bench.components.total());
    std::stringstream b;
    pipeline::write_benchmark(b, bench);
    CHECK(b.str().rfind("component,seconds,fraction\nforward,", 0) == 0);
    std::stringstream r;
    pipeline::write_run(r, bench.run);
    std::string line;
    int lines = 0;
    while (std::getline(r, line))
      ++lines;
    CHECK(lines == static_cast<int>(bench.run.iterations.size()) + 1);
  }
}

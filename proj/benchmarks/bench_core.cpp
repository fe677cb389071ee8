#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "e2n/dwr.hpp"
#include "e2n/features.hpp"
#include "e2n/metric.hpp"
#include "e2n/model.hpp"
#include "e2n/network.hpp"
#include "e2n/pipeline.hpp"
#include "e2n/remesh.hpp"

using namespace e2n;

namespace
{

struct Fixture
{
  model::Scenario scenario;
  std::shared_ptr<model::FlowProblem> problem;
  fem::Field u;
  fem::Field z;
  dwr::IndicatorField enriched;
};

const Fixture &aligned()
{
  static const Fixture f = [] {
    const auto s = pipeline::preset_scenario("aligned");
    auto p = std::make_shared<model::FlowProblem>(s, model::initial_mesh(s));
    auto u = model::solve_forward(*p).solution;
    auto z = model::adjoint_solve(*p, u);
    auto e = dwr::enriched_indicator(*p, u, z).indicator;
    return Fixture{s, p, u, z, e};
  }();
  return f;
}

void BM_Assemble(benchmark::State &state)
{
  const auto &f = aligned();
  for (auto _ : state)
    benchmark::DoNotOptimize(fem::assemble(*f.problem, f.u));
}
BENCHMARK(BM_Assemble)->Unit(benchmark::kMillisecond);

void BM_ForwardSolve(benchmark::State &state)
{
  const auto &f = aligned();
  for (auto _ : state)
    benchmark::DoNotOptimize(model::solve_forward(*f.problem));
}
BENCHMARK(BM_ForwardSolve)->Unit(benchmark::kMillisecond);

void BM_AdjointSolve(benchmark::State &state)
{
  const auto &f = aligned();
  for (auto _ : state)
    benchmark::DoNotOptimize(model::adjoint_solve(*f.problem, f.u));
}
BENCHMARK(BM_AdjointSolve)->Unit(benchmark::kMillisecond);

void BM_EnrichedIndicator(benchmark::State &state)
{
  const auto &f = aligned();
  for (auto _ : state)
    benchmark::DoNotOptimize(dwr::enriched_indicator(*f.problem, f.u, f.z));
}
BENCHMARK(BM_EnrichedIndicator)->Unit(benchmark::kMillisecond);

void BM_NetworkIndicator(benchmark::State &state)
{
  const auto &f = aligned();
  const auto mlp = net::init(0);
  for (auto _ : state)
    benchmark::DoNotOptimize(net::predict_indicator(mlp, *f.problem, f.u, f.z));
}
BENCHMARK(BM_NetworkIndicator)->Unit(benchmark::kMillisecond);

void BM_BuildMetric(benchmark::State &state)
{
  const auto &f = aligned();
  for (auto _ : state)
    benchmark::DoNotOptimize(metric::build_metric(f.enriched, f.u, 3200.0));
}
BENCHMARK(BM_BuildMetric)->Unit(benchmark::kMillisecond);

void BM_AdaptMesh(benchmark::State &state)
{
  const auto &f = aligned();
  const auto m = metric::build_metric(f.enriched, f.u, static_cast<double>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(remesh::adapt_mesh(f.problem->mesh(), m));
}
BENCHMARK(BM_AdaptMesh)->Arg(800)->Arg(3200)->Unit(benchmark::kMillisecond);

void BM_NetworkGradient(benchmark::State &state)
{
  const auto mlp = net::init(1);
  const int rows = static_cast<int>(state.range(0));
  std::mt19937 rng(2);
  std::normal_distribution<double> g;
  std::vector<double> x(static_cast<std::size_t>(rows) * features::num_features), t(rows);
  for (auto &v : x)
    v = g(rng);
  for (auto &v : t)
    v = g(rng);
  for (auto _ : state)
    benchmark::DoNotOptimize(net::gradient(mlp, x, t));
  state.SetItemsProcessed(state.iterations() * rows);
}
BENCHMARK(BM_NetworkGradient)->Arg(500)->Arg(5000);

}  // namespace

BENCHMARK_MAIN();

// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "e2n/dwr.hpp"
#include "e2n/errors.hpp"
#include "e2n/features.hpp"
#include "e2n/metric.hpp"
#include "e2n/model.hpp"
#include "e2n/network.hpp"
#include "e2n/pipeline.hpp"
#include "e2n/remesh.hpp"
#include "e2n/transfer.hpp"

using namespace e2n;
using mesh::Point;

namespace
{

struct Outcome
{
  bool pass = false;
  std::string detail;
};

struct Criterion
{
  int id;
  std::string name;
  double limit_seconds;
  std::function<Outcome()> run;
};

std::string fmt(double x, int digits = 4)
{
  std::ostringstream o;
  o << std::setprecision(digits) << x;
  return o.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Solved
{
  std::shared_ptr<model::FlowProblem> problem;
  fem::Field u;
  fem::Field z;
};

Solved solve(const model::Scenario &s, mesh::MeshPtr m = nullptr)
{
  auto p = std::make_shared<model::FlowProblem>(s, m ? m : model::initial_mesh(s));
  auto u = model::solve_forward(*p).solution;
  auto z = model::adjoint_solve(*p, u);
  return {p, std::move(u), std::move(z)};
}

const std::vector<std::string> presets{"aligned", "offset", "reversed", "trench"};

// ---------------------------------------------------------------------------

Outcome galerkin_orthogonality()
{
  double worst = 0.0;
  int cases = 0;
  auto check = [&](const Solved &sv) {
    const auto ind = dwr::coarse_indicator(*sv.problem, sv.u, sv.z);
    worst = std::max(worst, std::abs(ind.total()) / ind.abs_total());
    ++cases;
  };
  for (const auto &name : presets)
  {
    const auto s = pipeline::preset_scenario(name);
    const auto sv = solve(s);
    check(sv);
    // Also on an adapted mesh.
    const auto ind = dwr::coarse_indicator(*sv.problem, sv.u, sv.z);
    const auto m = metric::build_metric(ind, sv.u, 1600.0);
    check(solve(s, std::make_shared<const mesh::TriMesh>(
                     remesh::adapt_mesh(sv.problem->mesh(), m))));
  }
  return {worst <= 1e-8, "max |sum|/sum|.| = " + fmt(worst) + " over " +
                           std::to_string(cases) + " converged solutions"};
}

double flow_jacobian_error()
{
  model::Scenario s;
  s.width = 300.0;
  s.height = 120.0;
  s.mesh_size = 30.0;
  s.viscosity = 0.3;
  s.inflow_speed = 2.0;
  model::Turbine t;
  t.center = {140.0, 60.0};
  s.turbines = {t};
  const model::FlowProblem problem(s, model::initial_mesh(s));
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> noise(-0.3, 0.3);
  const auto base = problem.initial_guess();
  std::vector<double> v(base.values().begin(), base.values().end());
  for (auto &x : v)
    x += noise(rng);
  const fem::Field state(problem.mesh_ptr(), base.space(), v);
  const Eigen::MatrixXd exact(fem::assemble(problem, state).jacobian);
  Eigen::MatrixXd fd(exact.rows(), exact.cols());
  for (int j = 0; j < static_cast<int>(v.size()); ++j)
  {
    const double h = 1e-6 * std::max(1.0, std::abs(v[j]));
    const double keep = v[j];
    v[j] = keep + h;
    const auto rp = fem::assemble_residual(problem, fem::Field(state.mesh_ptr(), state.space(), v));
    v[j] = keep - h;
    const auto rm = fem::assemble_residual(problem, fem::Field(state.mesh_ptr(), state.space(), v));
    v[j] = keep;
    fd.col(j) = (rp - rm) / (2.0 * h);
  }
  return (fd - exact).norm() / exact.norm();
}

double network_gradient_error()
{
  auto mlp = net::init(2024, net::Dims{32, 64, 1});
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto &p : mlp.parameters())
    p += 0.2 * u(rng);
  std::vector<double> x(16 * 32), t(16);
  for (auto &a : x)
    a = 1.5 * u(rng);
  for (auto &a : t)
    a = u(rng);
  const auto g = net::gradient(mlp, x, t);
  auto params = mlp.parameters();
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i)
  {
    const double keep = params[i];
    const double h = 1e-6;
    params[i] = keep + h;
    const double lp = net::mse(mlp, x, t);
    params[i] = keep - h;
    const double lm = net::mse(mlp, x, t);
    params[i] = keep;
    const double fd = (lp - lm) / (2.0 * h);
    err += (fd - g.gradient[i]) * (fd - g.gradient[i]);
    ref += g.gradient[i] * g.gradient[i];
  }
  return std::sqrt(err / ref);
}

Outcome gradient_checks()
{
  const double jac = flow_jacobian_error();
  const double mlp = network_gradient_error();
  return {jac < 1e-5 && mlp < 1e-6,
          "PDE Jacobian rel. error " + fmt(jac) + ", MLP gradient rel. error " + fmt(mlp)};
}

Outcome recovery()
{
  const auto m = std::make_shared<const mesh::TriMesh>(mesh::build_structured_mesh(1.0, 1.0, 0.05));
  std::vector<double> lin, quad;
  for (const auto &p : m->vertices())
  {
    lin.push_back(0.7 - 3.0 * p.x() + 2.0 * p.y());
    quad.push_back(p.x() * p.x());
  }
  double grad_err = 0.0;
  for (const auto &g : metric::recover_gradient(fem::Field(m, fem::Space::p1, lin)))
    grad_err = std::max(grad_err, (g - Eigen::Vector2d(-3.0, 2.0)).norm());
  const auto h = metric::recover_hessian(fem::Field(m, fem::Space::p1, quad));
  double hess_err = 0.0;
  int interior = 0;
  for (int v = 0; v < m->num_vertices(); ++v)
  {
    const Point &p = m->vertex(v);
    // Two rings away from the boundary, where both recovery passes see full patches.
    if (std::min({p.x(), p.y(), 1.0 - p.x(), 1.0 - p.y()}) < 0.1 - 1e-9)
      continue;
    metric::Tensor exact;
    exact << 2.0, 0.0, 0.0, 0.0;
    hess_err = std::max(hess_err, (h[v] - exact).cwiseAbs().maxCoeff() / 2.0);
    ++interior;
  }
  return {grad_err < 1e-12 && hess_err <= 1e-6,
          "linear gradient error " + fmt(grad_err) + ", x^2 Hessian rel. error " + fmt(hess_err) +
            " at " + std::to_string(interior) + " interior vertices"};
}

Outcome effectivity()
{
  // Linearised surrogate: advection and drag frozen at the inflow state.
  model::Scenario s;
  s.name = "linear-surrogate";
  s.width = 576.0;
  s.height = 252.0;
  s.mesh_size = 18.0;
  model::Turbine t;
  t.center = {207.0, 135.0};
  s.turbines = {t};
  auto m = model::initial_mesh(s);
  model::FlowOptions opts;
  opts.frozen_advection = model::FlowProblem(s, m).initial_guess();
  bool ok = true;
  std::string detail = "effectivities";
  for (int level = 0; level < 3; ++level)
  {
    const model::FlowProblem problem(s, m, opts);
    const auto e = dwr::estimator_effectivity(problem, 2);
    ok = ok && e.effectivity >= 0.5 && e.effectivity <= 1.1;
    detail += " " + fmt(e.effectivity);
    m = std::make_shared<const mesh::TriMesh>(mesh::uniform_refine(*m));
    opts.frozen_advection = mesh::prolong(*opts.frozen_advection, m);
  }
  return {ok, detail + " (band [0.5, 1.1])"};
}

Outcome metric_contract()
{
  bool spd = true;
  double complexity_err = 0.0, scale_err = 0.0;
  int built = 0;
  for (const auto &name : presets)
  {
    const auto sv = solve(pipeline::preset_scenario(name));
    const auto ind = dwr::enriched_indicator(*sv.problem, sv.u, sv.z).indicator;
    for (double target : {800.0, 1600.0, 3200.0})
    {
      const auto m = metric::build_metric(ind, sv.u, target);
      ++built;
      for (const auto &t : m.tensors())
        spd = spd && metric::is_spd(t);
      complexity_err = std::max(complexity_err, std::abs(metric::complexity(m) - target) / target);
      for (double factor : {1e-8, 37.0})
      {
        const auto b =
          metric::build_metric(dwr::IndicatorField(ind.field().scaled(factor)), sv.u, target);
        for (int k = 0; k < m.size(); ++k)
          scale_err = std::max(scale_err, (m[k] - b[k]).norm() / m[k].norm());
      }
    }
  }
  return {spd && complexity_err <= 1e-6 && scale_err <= 1e-10,
          std::to_string(built) + " metrics, SPD " + (spd ? "yes" : "no") +
            ", complexity rel. error " + fmt(complexity_err) + ", scale invariance " +
            fmt(scale_err)};
}

double band_fraction(const mesh::TriMesh &out, const metric::MetricField &background)
{
  const auto mp = std::make_shared<const mesh::TriMesh>(out);
  const auto m = remesh::transfer_metric(background, mp);
  const auto edges = mp->edges();
  int good = 0;
  for (const auto &e : edges)
  {
    const double l = remesh::metric_edge_length(m, *mp, e);
    good += (l >= 0.5 && l <= 2.0) ? 1 : 0;
  }
  return static_cast<double>(good) / edges.size();
}

Outcome remesher_quality()
{
  double worst_band = 1.0;
  bool valid = true;
  std::string counts;
  auto check_valid = [&](const mesh::TriMesh &in, const mesh::TriMesh &out) {
    valid = valid && std::abs(out.total_area() - in.total_area()) <= 1e-9 * in.total_area();
  };
  for (const auto &name : {"aligned", "trench"})
  {
    const auto sv = solve(pipeline::preset_scenario(name));
    const auto ind = dwr::enriched_indicator(*sv.problem, sv.u, sv.z).indicator;
    for (double target : {800.0, 3200.0})
    {
      const auto m = metric::build_metric(ind, sv.u, target);
      const auto out = remesh::adapt_mesh(sv.problem->mesh(), m);
      check_valid(sv.problem->mesh(), out);
      worst_band = std::min(worst_band, band_fraction(out, m));
    }
  }
  bool count_ok = true;
  const auto base = std::make_shared<const mesh::TriMesh>(mesh::build_structured_mesh(1200.0, 500.0, 18.0));
  for (double h : {9.0, 36.0})
  {
    const metric::MetricField m(
      base, std::vector<metric::Tensor>(base->num_elements(), metric::Tensor::Identity() / (h * h)));
    const double c = metric::complexity(m);
    const auto out = remesh::adapt_mesh(*base, m);
    check_valid(*base, out);
    worst_band = std::min(worst_band, band_fraction(out, m));
    const double ratio = out.num_vertices() / c;
    count_ok = count_ok && ratio >= 0.5 && ratio <= 2.0;
    counts += " " + fmt(ratio, 3);
  }
  return {valid && worst_band >= 0.9 && count_ok,
          "min fraction of edges in [0.5, 2] " + fmt(worst_band) + ", valid " +
            (valid ? "yes" : "no") + ", isotropic vertices/complexity" + counts};
}

// Shared training state for criteria 7-11.
struct Training
{
  features::Dataset data;
  net::TrainResult result;
  std::shared_ptr<const net::Mlp> network;
};

struct Options
{
  std::string work_dir = "acceptance_work";
  int scenarios = 20;
  std::uint64_t seed = 0;
  int epochs = 2000;
};

std::optional<Training> training;
Options options;

Training &trained()
{
  if (!training)
  {
    Training t;
    pipeline::HarvestOptions h;
    const auto harvest =
      pipeline::harvest_dataset(pipeline::generate_scenarios(options.scenarios, options.seed), h);
    for (const auto &w : harvest.warnings)
      std::cerr << "warning: " << w << '\n';
    t.data = harvest.data;
    net::TrainConfig cfg;
    cfg.epochs = options.epochs;
    cfg.seed = options.seed;
    t.result = net::train(t.data, cfg);
    t.network = std::make_shared<const net::Mlp>(t.result.model);
    std::filesystem::create_directories(options.work_dir);
    features::save_dataset(options.work_dir + "/dataset.csv", t.data);
    net::save(options.work_dir + "/e2n.ckpt", t.result.model);
    training = std::move(t);
  }
  return *training;
}

Outcome training_criterion()
{
  const auto &t = trained();
  const double first = t.result.validation_loss.front();
  const double last = t.result.validation_loss.back();
  return {last <= 0.5 * first, std::to_string(t.data.size()) + " rows, validation MSE " +
                                  fmt(first) + " -> " + fmt(last) + " (ratio " +
                                  fmt(last / first) + ") after " +
                                  std::to_string(t.result.validation_loss.size() - 1) + " epochs"};
}

Outcome fidelity()
{
  const auto &t = trained();
  std::vector<features::FeatureVector> rows;
  std::vector<double> targets;
  for (auto r : t.result.validation_rows)
  {
    rows.push_back(t.data.rows[r].features);
    targets.push_back(t.data.rows[r].target);
  }
  const auto pred = net::predict(*t.network, rows);
  const double rho = net::spearman(pred, targets);
  // Reported alongside, not used for the verdict: agreement of the magnitudes the metric uses.
  std::vector<double> abs_pred(pred.size()), abs_targets(targets.size());
  std::transform(pred.begin(), pred.end(), abs_pred.begin(), [](double v) { return std::abs(v); });
  std::transform(targets.begin(), targets.end(), abs_targets.begin(),
                 [](double v) { return std::abs(v); });
  const double rho_abs = net::spearman(abs_pred, abs_targets);
  return {rho >= 0.8, "Spearman " + fmt(rho) + " on " + std::to_string(rows.size()) +
                        " held-out elements (targets " +
                        std::string(net::to_string(t.network->targets())) +
                        "; magnitudes " + fmt(rho_abs) + ")"};
}

struct StudySummary
{
  bool pass = true;
  std::string detail;
};

// Adaptive runs beat uniform refinement if, for some uniform level below the benchmark
// level, an adaptive run is at least as accurate with at most `fraction` of its DoFs.
StudySummary dof_efficiency(const std::string &preset, double fraction,
                            std::vector<pipeline::StudyRow> *out_rows = nullptr,
                            bool require_convergence = false)
{
  pipeline::StudyConfig cfg;
  cfg.estimators = {pipeline::Estimator::standard, pipeline::Estimator::e2n};
  cfg.adapt.network = trained().network;
  const auto scenario = pipeline::preset_scenario(preset);
  const auto rows = pipeline::convergence_study(scenario, cfg);
  if (out_rows)
    *out_rows = rows;
  std::ofstream csv(options.work_dir + "/convergence_" + preset + ".csv");
  pipeline::write_study(csv, rows);

  StudySummary s;
  s.detail = preset + ":";
  for (const auto estimator : cfg.estimators)
  {
    const std::string name(pipeline::to_string(estimator));
    std::string best;
    for (const auto &u : rows)
    {
      if (u.method != "uniform" || u.parameter >= cfg.uniform_levels)
        continue;
      for (const auto &a : rows)
      {
        if (a.method == name && a.relative_error <= u.relative_error &&
            a.dofs <= fraction * u.dofs)
        {
          best = " " + name + " C=" + fmt(a.parameter) + " err " + fmt(a.relative_error, 3) +
                 " with " + std::to_string(a.dofs) + " dofs vs uniform L" + fmt(u.parameter) +
                 " err " + fmt(u.relative_error, 3) + " with " + std::to_string(u.dofs);
          break;
        }
      }
      if (!best.empty())
        break;
    }
    if (best.empty())
    {
      s.pass = false;
      best = " " + name + " never matched uniform accuracy within the DoF budget";
    }
    s.detail += best + ";";
  }
  if (require_convergence)
  {
    for (const auto estimator : cfg.estimators)
    {
      auto ac = cfg.adapt;
      ac.estimator = estimator;
      const auto run = pipeline::fixed_point_adapt(scenario, ac);
      s.pass = s.pass && run.converged;
      s.detail += " " + std::string(pipeline::to_string(estimator)) +
                  (run.converged ? " converged in " : " did not converge in ") +
                  std::to_string(run.iterations.size()) + " iterations;";
    }
  }
  return s;
}

Outcome dof_criterion()
{
  const auto a = dof_efficiency("aligned", 0.25);
  const auto b = dof_efficiency("offset", 0.25);
  return {a.pass && b.pass, a.detail + " " + b.detail};
}

Outcome acceleration()
{
  pipeline::AdaptConfig cfg;
  cfg.target_complexity = 3200.0;
  const auto scenario = pipeline::preset_scenario("aligned");
  const auto standard = pipeline::benchmark(scenario, cfg);
  cfg.estimator = pipeline::Estimator::e2n;
  cfg.network = trained().network;
  const auto e2n = pipeline::benchmark(scenario, cfg);
  for (const auto &[name, b] : {std::pair{"standard", &standard}, std::pair{"e2n", &e2n}})
  {
    std::ofstream out(options.work_dir + "/bench_" + name + ".csv");
    pipeline::write_benchmark(out, *b);
  }

  auto per_call = [](const pipeline::BenchmarkResult &b) {
    int calls = 0;
    for (const auto &it : b.run.iterations)
      calls += it.timings.estimation > 0.0 ? 1 : 0;
    return calls ? b.components.estimation / calls : 0.0;
  };
  const double s_call = per_call(standard), e_call = per_call(e2n);
  const double share = standard.components.estimation / standard.components.total();
  return {e_call <= 0.5 * s_call && share >= 0.35,
          "estimation per iteration: e2n " + fmt(e_call) + " s vs standard " + fmt(s_call) +
            " s (ratio " + fmt(e_call / s_call) + "); standard estimation share " + fmt(share) +
            " of " + fmt(standard.components.total()) + " s loop"};
}

Outcome generalisation()
{
  pipeline::AdaptConfig cfg;
  const auto aligned = pipeline::fixed_point_adapt(pipeline::preset_scenario("aligned"), cfg);
  const auto reversed = pipeline::fixed_point_adapt(pipeline::preset_scenario("reversed"), cfg);
  const double mirror = std::abs(reversed.final_qoi - aligned.final_qoi) / aligned.final_qoi;
  const auto trench = dof_efficiency("trench", 1.0, nullptr, true);
  return {mirror <= 0.01 && trench.pass,
          "reversed vs aligned QoI difference " + fmt(mirror) + "; " + trench.detail};
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--work-dir", options.work_dir, "Directory for datasets, checkpoints and CSVs")
    ->capture_default_str();
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--scenarios", options.scenarios, "Training scenarios")->capture_default_str();
  app.add_option("--epochs", options.epochs, "Training epochs")->capture_default_str();
  app.add_option("--seed", options.seed, "Scenario and training seed")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  std::filesystem::create_directories(options.work_dir);

  const std::vector<Criterion> criteria{
    {1, "Galerkin orthogonality", 10.0, galerkin_orthogonality},
    {2, "Jacobian and network gradient checks", 30.0, gradient_checks},
    {3, "Clement/Hessian recovery", 5.0, recovery},
    {4, "DWR effectivity (linear oracle)", 120.0, effectivity},
    {5, "Metric contract", 10.0, metric_contract},
    {6, "Remesher quality", 60.0, remesher_quality},
    {7, "Training", 900.0, training_criterion},
    {8, "Surrogate fidelity", 60.0, fidelity},
    {9, "DoF efficiency", 1200.0, dof_criterion},
    {10, "Acceleration", 600.0, acceleration},
    {11, "Generalisation presets", 1200.0, generalisation},
  };

  int failures = 0;
  for (const auto &c : criteria)
  {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end())
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try
    {
      o = c.run();
    }
    catch (const std::exception &e)
    {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double t = seconds_since(t0);
    const bool in_time = t <= c.limit_seconds;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << c.id << "  "
              << c.name << ": " << o.detail << " [" << fmt(t, 3) << " s, limit "
              << fmt(c.limit_seconds, 4) << " s" << (in_time ? "" : ", over time") << "]"
              << std::endl;
  }
  std::cout << (failures == 0 ? "all selected criteria passed"
                              : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}

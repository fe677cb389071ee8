// e2n command-line driver.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "e2n/errors.hpp"
#include "e2n/features.hpp"
#include "e2n/model.hpp"
#include "e2n/network.hpp"
#include "e2n/pipeline.hpp"

using namespace e2n;

namespace
{

constexpr int exit_ok = 0;
constexpr int exit_error = 1;
constexpr int exit_nonconvergence = 2;

std::string io_format(double x)
{
  std::ostringstream o;
  o.precision(10);
  o << x;
  return o.str();
}

struct ScenarioSource
{
  std::string preset = "aligned";
  std::string file;

  void add_to(CLI::App *cmd)
  {
    cmd->add_option("--preset", preset, "Named test case: aligned, offset, reversed, trench")
      ->capture_default_str();
    cmd->add_option("--scenario", file, "Scenario file; overrides --preset");
  }

  model::Scenario load() const
  {
    return file.empty() ? pipeline::preset_scenario(preset) : model::load_scenario(file);
  }
};

std::ofstream open_out(const std::string &path)
{
  std::ofstream out(path);
  if (!out)
  {
    throw InvalidArgument("cannot write '" + path + "'");
  }
  return out;
}

// Writes to `path`, or stdout when it is empty or "-".
template <class Fn>
void emit(const std::string &path, Fn &&fn)
{
  if (path.empty() || path == "-")
  {
    fn(std::cout);
    return;
  }
  auto out = open_out(path);
  fn(out);
}

struct AdaptOptions
{
  std::string estimator = "standard";
  double complexity = 3200.0;
  std::uint64_t seed = 0;
  std::string checkpoint;
  int min_iterations = 3;
  int max_iterations = 35;
  double qoi_tolerance = 0.005;
  double element_tolerance = 0.01;

  void add_to(CLI::App *cmd)
  {
    cmd->add_option("--estimator", estimator, "standard, coarse or e2n")
      ->check(CLI::IsMember({"standard", "coarse", "e2n"}))
      ->capture_default_str();
    cmd->add_option("--complexity", complexity, "Target metric complexity")->capture_default_str();
    cmd->add_option("--seed", seed, "Seed (the loop itself is deterministic)")->capture_default_str();
    cmd->add_option("--checkpoint", checkpoint, "Network checkpoint for --estimator e2n");
    cmd->add_option("--min-iterations", min_iterations)->capture_default_str();
    cmd->add_option("--max-iterations", max_iterations)->capture_default_str();
    cmd->add_option("--qoi-tol", qoi_tolerance)->capture_default_str();
    cmd->add_option("--element-tol", element_tolerance)->capture_default_str();
  }

  pipeline::AdaptConfig config() const
  {
    pipeline::AdaptConfig c;
    c.estimator = pipeline::parse_estimator(estimator);
    c.target_complexity = complexity;
    c.checkpoint = checkpoint;
    c.min_iterations = min_iterations;
    c.max_iterations = max_iterations;
    c.qoi_tolerance = qoi_tolerance;
    c.element_tolerance = element_tolerance;
    return c;
  }
};

std::vector<double> parse_list(const std::string &text)
{
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
  {
    if (!item.empty())
    {
      out.push_back(std::stod(item));
    }
  }
  return out;
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Goal-oriented mesh adaptation for tidal turbine arrays"};
  app.set_config("--config", "", "Read options from a TOML/INI file")->expected(1);
  app.require_subcommand(1);

  // mesh-init
  ScenarioSource mesh_src;
  std::string mesh_out;
  auto *mesh_cmd = app.add_subcommand("mesh-init", "Write the initial structured mesh");
  mesh_src.add_to(mesh_cmd);
  mesh_cmd->add_option("--out", mesh_out, "Mesh file (stdout if omitted)");

  // solve
  ScenarioSource solve_src;
  std::string solve_mesh, solve_out;
  auto *solve_cmd = app.add_subcommand("solve", "Forward solve and power output");
  solve_src.add_to(solve_cmd);
  solve_cmd->add_option("--mesh", solve_mesh, "Mesh file (default: initial mesh)");
  solve_cmd->add_option("--out", solve_out, "Vertex velocities as CSV x,y,u,v");

  // adapt
  ScenarioSource adapt_src;
  AdaptOptions adapt_opts;
  std::string adapt_out, adapt_mesh_out;
  auto *adapt_cmd = app.add_subcommand("adapt", "Fixed-point goal-oriented adaptation");
  adapt_src.add_to(adapt_cmd);
  adapt_opts.add_to(adapt_cmd);
  adapt_cmd->add_option("--out", adapt_out, "Per-iteration CSV (stdout if omitted)");
  adapt_cmd->add_option("--mesh-out", adapt_mesh_out, "Final mesh file");

  // datagen
  int gen_scenarios = 20;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "data";
  int gen_iterations = 3;
  double gen_complexity = 3200.0;
  auto *gen_cmd = app.add_subcommand("datagen", "Harvest a training dataset");
  gen_cmd->add_option("--scenarios", gen_scenarios)->capture_default_str();
  gen_cmd->add_option("--seed", gen_seed)->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "Output directory")->capture_default_str();
  gen_cmd->add_option("--iterations", gen_iterations)->capture_default_str();
  gen_cmd->add_option("--complexity", gen_complexity)->capture_default_str();

  // train
  std::string train_data, train_out = "e2n.ckpt", train_loss;
  net::TrainConfig train_cfg;
  std::string train_targets(net::to_string(train_cfg.targets));
  auto *train_cmd = app.add_subcommand("train", "Train the indicator network");
  train_cmd->add_option("--data", train_data, "Dataset CSV")->required();
  train_cmd->add_option("--out", train_out, "Checkpoint path")->capture_default_str();
  train_cmd->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  train_cmd->add_option("--seed", train_cfg.seed)->capture_default_str();
  train_cmd->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--batch", train_cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--hidden", train_cfg.hidden)->capture_default_str();
  train_cmd->add_option("--train-fraction", train_cfg.train_fraction)->capture_default_str();
  train_cmd->add_option("--targets", train_targets, "Target transform")
    ->check(CLI::IsMember({"log_magnitude", "arctan", "none"}))
    ->capture_default_str();
  train_cmd->add_option("--loss-out", train_loss, "Loss history CSV epoch,train,validation");

  // convergence
  ScenarioSource conv_src;
  std::string conv_out, conv_complexities = "800,1600,3200", conv_estimators = "standard";
  std::string conv_checkpoint;
  int conv_levels = 3;
  auto *conv_cmd = app.add_subcommand("convergence", "QoI convergence study");
  conv_src.add_to(conv_cmd);
  conv_cmd->add_option("--out", conv_out, "CSV output (stdout if omitted)");
  conv_cmd->add_option("--levels", conv_levels, "Uniform refinement levels")->capture_default_str();
  conv_cmd->add_option("--complexities", conv_complexities, "Comma-separated targets")
    ->capture_default_str();
  conv_cmd->add_option("--estimators", conv_estimators, "Comma-separated estimators")
    ->capture_default_str();
  conv_cmd->add_option("--checkpoint", conv_checkpoint, "Network checkpoint for e2n");

  // bench
  ScenarioSource bench_src;
  AdaptOptions bench_opts;
  std::string bench_out;
  auto *bench_cmd = app.add_subcommand("bench", "Per-component timings of one adaptation run");
  bench_src.add_to(bench_cmd);
  bench_opts.add_to(bench_cmd);
  bench_cmd->add_option("--out", bench_out, "CSV output (stdout if omitted)");

  // Allow a config file to select the subcommand through its section.
  for (auto *sub : app.get_subcommands([](CLI::App *) { return true; }))
    sub->configurable();

  CLI11_PARSE(app, argc, argv);

  try
  {
    if (*mesh_cmd)
    {
      const auto m = model::initial_mesh(mesh_src.load());
      emit(mesh_out, [&](std::ostream &o) { mesh::write_mesh(o, *m); });
    }
    else if (*solve_cmd)
    {
      const auto scenario = solve_src.load();
      mesh::MeshPtr m;
      if (solve_mesh.empty())
      {
        m = model::initial_mesh(scenario);
      }
      else
      {
        std::ifstream in(solve_mesh);
        if (!in)
        {
          throw InvalidArgument("cannot open mesh file '" + solve_mesh + "'");
        }
        m = std::make_shared<const mesh::TriMesh>(mesh::read_mesh(in));
      }
      const model::FlowProblem problem(scenario, m);
      const auto result = model::solve_forward(problem);
      std::cout << "qoi,dofs,elements,newton_iterations\n"
                << io_format(problem.qoi(result.solution)) << ',' << problem.num_dofs() << ','
                << m->num_elements() << ',' << result.iterations << '\n';
      if (!solve_out.empty())
      {
        auto out = open_out(solve_out);
        out << "x,y,u,v\n";
        out.precision(17);
        for (int v = 0; v < m->num_vertices(); ++v)
        {
          out << m->vertex(v).x() << ',' << m->vertex(v).y() << ',' << result.solution[2 * v]
              << ',' << result.solution[2 * v + 1] << '\n';
        }
      }
    }
    else if (*adapt_cmd)
    {
      const auto run = pipeline::fixed_point_adapt(adapt_src.load(), adapt_opts.config());
      emit(adapt_out, [&](std::ostream &o) { pipeline::write_run(o, run); });
      if (!adapt_mesh_out.empty())
      {
        auto out = open_out(adapt_mesh_out);
        mesh::write_mesh(out, *run.final_mesh);
      }
      std::cerr << "final qoi " << io_format(run.final_qoi) << ", "
                << (run.converged ? "converged" : "not converged") << " after "
                << run.iterations.size() << " iterations\n";
      return run.converged ? exit_ok : exit_nonconvergence;
    }
    else if (*gen_cmd)
    {
      const auto scenarios = pipeline::generate_scenarios(gen_scenarios, gen_seed);
      pipeline::HarvestOptions options;
      options.iterations = gen_iterations;
      options.target_complexity = gen_complexity;
      const auto harvest = pipeline::harvest_dataset(scenarios, options);
      std::filesystem::create_directories(gen_out);
      for (std::size_t i = 0; i < scenarios.size(); ++i)
      {
        model::save_scenario((std::filesystem::path(gen_out) /
                              ("scenario_" + std::to_string(i) + ".cfg"))
                               .string(),
                             scenarios[i]);
      }
      features::save_dataset((std::filesystem::path(gen_out) / "dataset.csv").string(),
                             harvest.data);
      for (const auto &w : harvest.warnings)
      {
        std::cerr << "warning: " << w << '\n';
      }
      std::cerr << harvest.data.size() << " rows from " << scenarios.size() - harvest.skipped
                << " scenarios, " << harvest.skipped << " skipped\n";
    }
    else if (*train_cmd)
    {
      train_cfg.targets = net::parse_target_transform(train_targets);
      const auto data = features::load_dataset(train_data);
      const auto result = net::train(data, train_cfg);
      net::save(train_out, result.model);
      if (!train_loss.empty())
      {
        auto out = open_out(train_loss);
        out << "epoch,train,validation\n";
        for (std::size_t e = 0; e < result.train_loss.size(); ++e)
        {
          out << e << ',' << io_format(result.train_loss[e]) << ','
              << io_format(result.validation_loss[e]) << '\n';
        }
      }
      std::cerr << "validation loss " << io_format(result.validation_loss.front()) << " -> "
                << io_format(result.validation_loss.back()) << '\n';
    }
    else if (*conv_cmd)
    {
      pipeline::StudyConfig config;
      config.uniform_levels = conv_levels;
      config.complexities = parse_list(conv_complexities);
      config.estimators.clear();
      std::stringstream ss(conv_estimators);
      std::string item;
      while (std::getline(ss, item, ','))
      {
        config.estimators.push_back(pipeline::parse_estimator(item));
      }
      config.adapt.checkpoint = conv_checkpoint;
      const auto rows = pipeline::convergence_study(conv_src.load(), config);
      emit(conv_out, [&](std::ostream &o) { pipeline::write_study(o, rows); });
    }
    else if (*bench_cmd)
    {
      const auto result = pipeline::benchmark(bench_src.load(), bench_opts.config());
      emit(bench_out, [&](std::ostream &o) { pipeline::write_benchmark(o, result); });
      return result.run.converged ? exit_ok : exit_nonconvergence;
    }
  }
  catch (const pipeline::AdaptationFailure &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return e.nonconvergence() ? exit_nonconvergence : exit_error;
  }
  catch (const fem::NonConvergence &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return exit_nonconvergence;
  }
  catch (const std::exception &e)
  {
    std::cerr << "error: " << e.what() << '\n';
    return exit_error;
  }
  return exit_ok;
}

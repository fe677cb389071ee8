#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "e2n/errors.hpp"
#include "e2n/fem.hpp"
#include "e2n/model.hpp"
#include "helpers.hpp"

using namespace e2n;
using mesh::Point;

namespace
{

double factorial(int n)
{
  return std::tgamma(n + 1.0);
}

fem::Field perturbed_state(const model::FlowProblem &problem, double amplitude, unsigned seed)
{
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> noise(-amplitude, amplitude);
  const auto base = problem.initial_guess();
  std::vector<double> v(base.values().begin(), base.values().end());
  for (auto &x : v)
  {
    x += noise(rng);
  }
  return fem::Field(problem.mesh_ptr(), base.space(), std::move(v));
}

// Central-difference Jacobian of the assembled residual, compared entry by entry.
double jacobian_fd_error(const model::FlowProblem &problem, const fem::Field &state)
{
  const auto a = fem::assemble(problem, state);
  const Eigen::MatrixXd exact = Eigen::MatrixXd(a.jacobian);
  Eigen::MatrixXd fd(exact.rows(), exact.cols());
  std::vector<double> v(state.values().begin(), state.values().end());
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

}  // namespace

TEST_SUITE("fem")
{
  TEST_CASE("triangle rules integrate monomials exactly")
  {
    for (int degree = 1; degree <= 5; ++degree)
    {
      const auto &rule = fem::triangle_rule(degree);
      double weights = 0.0;
      for (const auto &q : rule)
      {
        weights += q.weight;
        CHECK(q.xi >= -1e-15);
        CHECK(q.eta >= -1e-15);
        CHECK(q.xi + q.eta <= 1.0 + 1e-15);
      }
      CHECK(weights == doctest::Approx(0.5).epsilon(1e-14));
      for (int a = 0; a <= degree; ++a)
      {
        for (int b = 0; a + b <= degree; ++b)
        {
          double sum = 0.0;
          for (const auto &q : rule)
          {
            sum += q.weight * std::pow(q.xi, a) * std::pow(q.eta, b);
          }
          const double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
          INFO("degree " << degree << " monomial x^" << a << " y^" << b);
          CHECK(sum == doctest::Approx(exact).epsilon(1e-13));
        }
      }
    }
    CHECK_THROWS_AS(fem::triangle_rule(0), InvalidArgument);
    CHECK_THROWS_AS(fem::triangle_rule(6), InvalidArgument);
  }

  TEST_CASE("P1 gradients reproduce linear functions")
  {
    const Point a(0.3, -0.2), b(2.0, 0.1), c(0.7, 1.9);
    const auto g = fem::p1_gradients(a, b, c);
    CHECK((g[0] + g[1] + g[2]).norm() < 1e-14);
    auto f = [](const Point &p) { return 2.0 * p.x() - 5.0 * p.y() + 1.0; };
    const Eigen::Vector2d grad = f(a) * g[0] + f(b) * g[1] + f(c) * g[2];
    CHECK(grad.x() == doctest::Approx(2.0));
    CHECK(grad.y() == doctest::Approx(-5.0));
    // Kronecker property along edges: gradient of phi_a is orthogonal to edge bc.
    CHECK(std::abs(g[0].dot(c - b)) < 1e-14);
  }

  TEST_CASE("sparse LU agrees with dense LU")
  {
    const int n = 60;
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
    {
      dense(i, i) = 6.0 + u(rng);
      dense(i, (i + 1) % n) = u(rng);
      dense(i, (i + 7) % n) = u(rng);
      dense((i + 3) % n, i) = u(rng);
    }
    const fem::SparseMatrix sparse = dense.sparseView();
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i)
      b[i] = u(rng);
    const Eigen::VectorXd x = fem::solve_linear(sparse, b);
    const Eigen::VectorXd ref = dense.partialPivLu().solve(b);
    CHECK((x - ref).norm() < 1e-12 * ref.norm());

    fem::LinearSolver solver;
    solver.factorize(sparse);
    CHECK((solver.solve(b) - ref).norm() < 1e-12 * ref.norm());
    // Same pattern, new values.
    const fem::SparseMatrix twice = 2.0 * sparse;
    solver.factorize(twice);
    CHECK((solver.solve(b) - 0.5 * ref).norm() < 1e-12 * ref.norm());
  }

  TEST_CASE("singular systems are reported")
  {
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(3, 3);
    dense(0, 0) = 1.0;
    dense(1, 1) = 1.0;
    const fem::SparseMatrix sparse = dense.sparseView();
    CHECK_THROWS_AS(fem::solve_linear(sparse, Eigen::VectorXd::Ones(3)), SingularSystem);
  }

  TEST_CASE("assembled Jacobian matches central differences")
  {
    auto s = testing::small_scenario(30.0);
    s.viscosity = 0.3;
    const auto m = model::initial_mesh(s);
    const model::FlowProblem problem(s, m);
    CHECK(jacobian_fd_error(problem, perturbed_state(problem, 0.3, 1)) < 1e-5);

    model::FlowOptions plain;
    plain.stabilise = false;
    const model::FlowProblem galerkin(s, m, plain);
    CHECK(jacobian_fd_error(galerkin, perturbed_state(galerkin, 0.3, 2)) < 1e-5);
  }

  TEST_CASE("Dirichlet rows of the assembled system")
  {
    const auto s = testing::small_scenario(30.0);
    const model::FlowProblem problem(s, model::initial_mesh(s));
    const auto state = perturbed_state(problem, 0.1, 3);
    const auto a = fem::assemble(problem, state);
    for (const auto &d : problem.dirichlet())
    {
      CHECK(a.residual[d.dof] == doctest::Approx(state[d.dof] - d.value));
      CHECK(a.jacobian.coeff(d.dof, d.dof) == 1.0);
      CHECK(a.jacobian.row(d.dof).cwiseAbs().sum() == 1.0);
    }
  }

  TEST_CASE("Newton converges and reports failure on a tight budget")
  {
    const auto s = testing::small_scenario(25.0);
    const model::FlowProblem problem(s, model::initial_mesh(s));
    const auto result = model::solve_forward(problem);
    CHECK(result.iterations <= 10);
    CHECK(result.residual_norm <= 1e-8);
    CHECK(fem::assemble_residual(problem, result.solution).lpNorm<Eigen::Infinity>() <= 1e-8);

    fem::NewtonOptions tight;
    tight.max_iter = 1;
    try
    {
      fem::newton_solve(problem, problem.initial_guess(), tight);
      FAIL("expected NonConvergence");
    }
    catch (const fem::NonConvergence &e)
    {
      CHECK(e.iterations() == 1);
      CHECK(e.last_iterate().size() == static_cast<std::size_t>(problem.num_dofs()));
    }
  }

  TEST_CASE("manufactured solution converges at second order")
  {
    // u = 1 + cos(pi x / W) cos(pi y / H), v = 0 satisfies the natural conditions on the
    // outflow and the walls; advection is frozen at (1, 0).
    const double W = 2.0, H = 1.0, nu = 1.0;
    const double kx = std::numbers::pi / W, ky = std::numbers::pi / H;
    auto exact = [&](const Point &p) { return 1.0 + std::cos(kx * p.x()) * std::cos(ky * p.y()); };

    std::vector<double> errors, sizes;
    for (int n : {4, 8, 16, 32})
    {
      model::Scenario s;
      s.width = W;
      s.height = H;
      s.mesh_size = H / n;
      s.viscosity = nu;
      const double sigma = s.background_drag / s.bathymetry.depth;
      const auto m = model::initial_mesh(s);

      model::FlowOptions opts;
      opts.stabilise = false;
      std::vector<double> a(2 * m->num_vertices(), 0.0);
      for (int v = 0; v < m->num_vertices(); ++v)
        a[2 * v] = 1.0;
      opts.frozen_advection = fem::Field(m, fem::Space::p1_vector, a);
      opts.boundary_velocity = [&](const Point &p) { return Eigen::Vector2d(exact(p), 0.0); };
      opts.forcing = [&](const Point &p) {
        const double c = std::cos(kx * p.x()) * std::cos(ky * p.y());
        const double dudx = -kx * std::sin(kx * p.x()) * std::cos(ky * p.y());
        return Eigen::Vector2d(dudx + sigma * (1.0 + c) + nu * (kx * kx + ky * ky) * c, 0.0);
      };
      const model::FlowProblem problem(s, m, opts);
      const auto u = model::solve_forward(problem).solution;

      double err2 = 0.0;
      for (int k = 0; k < m->num_elements(); ++k)
      {
        const auto &t = m->triangle(k);
        const Point p0 = m->vertex(t[0]), p1 = m->vertex(t[1]), p2 = m->vertex(t[2]);
        for (const auto &q : fem::triangle_rule(5))
        {
          const double l0 = 1.0 - q.xi - q.eta;
          const Point x = l0 * p0 + q.xi * p1 + q.eta * p2;
          const double uh = l0 * u[2 * t[0]] + q.xi * u[2 * t[1]] + q.eta * u[2 * t[2]];
          const double vh = l0 * u[2 * t[0] + 1] + q.xi * u[2 * t[1] + 1] + q.eta * u[2 * t[2] + 1];
          err2 += 2.0 * m->area(k) * q.weight * ((uh - exact(x)) * (uh - exact(x)) + vh * vh);
        }
      }
      errors.push_back(std::sqrt(err2));
      sizes.push_back(H / n);
    }
    for (std::size_t i = 1; i < errors.size(); ++i)
    {
      const double rate = std::log(errors[i - 1] / errors[i]) / std::log(sizes[i - 1] / sizes[i]);
      INFO("level " << i << " error " << errors[i] << " rate " << rate);
      CHECK(rate > 1.85);
    }
  }

  TEST_CASE("centroid evaluation")
  {
    const auto m = testing::unit_square(2);
    std::vector<double> v;
    for (const auto &p : m->vertices())
      v.push_back(p.x() + p.y());
    const fem::Field f(m, fem::Space::p1, v);
    for (int k = 0; k < m->num_elements(); ++k)
    {
      const auto c = m->centroid(k);
      CHECK(fem::centroid_eval(f, k)[0] == doctest::Approx(c.x() + c.y()));
    }
    CHECK_THROWS_AS(fem::Field(m, fem::Space::p1, {1.0}), InvalidArgument);
  }
}

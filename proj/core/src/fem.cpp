#include "e2n/fem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>

namespace e2n::fem
{

namespace
{

std::vector<QuadPoint> symmetric_rule(double centroid_weight,
                                      std::initializer_list<std::pair<double, double>> orbits)
{
  std::vector<QuadPoint> rule;
  if (centroid_weight > 0.0)
  {
    rule.push_back({1.0 / 3.0, 1.0 / 3.0, 0.5 * centroid_weight});
  }
  for (const auto &[b, w] : orbits)
  {
    const double a = 1.0 - 2.0 * b;
    rule.push_back({b, b, 0.5 * w});
    rule.push_back({a, b, 0.5 * w});
    rule.push_back({b, a, 0.5 * w});
  }
  return rule;
}

}  // namespace

const std::vector<QuadPoint> &triangle_rule(int degree)
{
  static const std::vector<QuadPoint> deg1 = {{1.0 / 3.0, 1.0 / 3.0, 0.5}};
  static const std::vector<QuadPoint> deg2 = symmetric_rule(0.0, {{1.0 / 6.0, 1.0 / 3.0}});
  // Dunavant rules.
  static const std::vector<QuadPoint> deg4 =
    symmetric_rule(0.0, {{0.44594849091596488632, 0.22338158967801146570},
                         {0.09157621350977074346, 0.10995174365532186764}});
  static const std::vector<QuadPoint> deg5 =
    symmetric_rule(0.225, {{0.47014206410511508977, 0.13239415278850618074},
                           {0.10128650732345633880, 0.12593918054482715260}});
  switch (degree)
  {
    case 1:
      return deg1;
    case 2:
      return deg2;
    case 3:
    case 4:
      return deg4;
    case 5:
      return deg5;
    default:
      throw InvalidArgument("quadrature degree must be in 1..5");
  }
}

std::array<Eigen::Vector2d, 3> p1_gradients(const mesh::Point &a, const mesh::Point &b,
                                            const mesh::Point &c)
{
  const double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
  return {Eigen::Vector2d(b.y() - c.y(), c.x() - b.x()) / det,
          Eigen::Vector2d(c.y() - a.y(), a.x() - c.x()) / det,
          Eigen::Vector2d(a.y() - b.y(), b.x() - a.x()) / det};
}

void gather_local(const NonlinearProblem &problem, int k, std::span<const double> global,
                  std::span<double> local)
{
  const int nc = problem.components();
  const auto &t = problem.mesh().triangle(k);
  for (int a = 0; a < 3; ++a)
  {
    for (int c = 0; c < nc; ++c)
    {
      local[nc * a + c] = global[nc * t[a] + c];
    }
  }
}

namespace
{

void check_state(const NonlinearProblem &problem, const Field &state)
{
  if (state.mesh_ptr() != problem.mesh_ptr() && &state.mesh() != &problem.mesh())
  {
    throw InvalidArgument("state lives on a different mesh than the problem");
  }
  if (state.space() != problem.space())
  {
    throw InvalidArgument("state space does not match the problem's trial space");
  }
}

std::vector<char> dirichlet_mask(const NonlinearProblem &problem,
                                 const std::vector<DirichletCondition> &bcs)
{
  std::vector<char> mask(problem.num_dofs(), 0);
  for (const auto &bc : bcs)
  {
    mask[bc.dof] = 1;
  }
  return mask;
}

}  // namespace

Assembly assemble(const NonlinearProblem &problem, const Field &state)
{
  check_state(problem, state);
  const int nc = problem.components();
  const int nloc = 3 * nc;
  const int n = problem.num_dofs();
  const auto &mesh = problem.mesh();
  const auto bcs = problem.dirichlet();
  const auto mask = dirichlet_mask(problem, bcs);

  Assembly out;
  out.residual = Vector::Zero(n);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_elements()) * nloc * nloc + bcs.size());

  std::array<double, 6> local{}, res{};
  std::array<double, 36> jac{};
  std::array<int, 6> dofs{};
  for (int k = 0; k < mesh.num_elements(); ++k)
  {
    gather_local(problem, k, state.values(), local);
    std::fill(res.begin(), res.end(), 0.0);
    std::fill(jac.begin(), jac.end(), 0.0);
    problem.element_residual(k, std::span(local.data(), nloc), std::span(res.data(), nloc),
                             std::span(jac.data(), nloc * nloc));
    const auto &t = mesh.triangle(k);
    for (int a = 0; a < 3; ++a)
    {
      for (int c = 0; c < nc; ++c)
      {
        dofs[nc * a + c] = nc * t[a] + c;
      }
    }
    for (int i = 0; i < nloc; ++i)
    {
      if (mask[dofs[i]])
      {
        continue;
      }
      out.residual[dofs[i]] += res[i];
      for (int j = 0; j < nloc; ++j)
      {
        triplets.emplace_back(dofs[i], dofs[j], jac[nloc * i + j]);
      }
    }
  }
  for (const auto &bc : bcs)
  {
    out.residual[bc.dof] = state[bc.dof] - bc.value;
  }
  for (int i = 0; i < n; ++i)
  {
    if (mask[i])
    {
      triplets.emplace_back(i, i, 1.0);
    }
  }
  out.jacobian.resize(n, n);
  out.jacobian.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

Vector assemble_residual(const NonlinearProblem &problem, const Field &state)
{
  check_state(problem, state);
  const int nc = problem.components();
  const int nloc = 3 * nc;
  const auto &mesh = problem.mesh();
  const auto bcs = problem.dirichlet();

  Vector r = Vector::Zero(problem.num_dofs());
  std::array<double, 6> local{}, res{};
  for (int k = 0; k < mesh.num_elements(); ++k)
  {
    gather_local(problem, k, state.values(), local);
    std::fill(res.begin(), res.end(), 0.0);
    problem.element_residual(k, std::span(local.data(), nloc), std::span(res.data(), nloc), {});
    const auto &t = mesh.triangle(k);
    for (int a = 0; a < 3; ++a)
    {
      for (int c = 0; c < nc; ++c)
      {
        r[nc * t[a] + c] += res[nc * a + c];
      }
    }
  }
  for (const auto &bc : bcs)
  {
    r[bc.dof] = state[bc.dof] - bc.value;
  }
  return r;
}

std::vector<double> element_residuals(const NonlinearProblem &problem, const Field &state)
{
  check_state(problem, state);
  const int nloc = 3 * problem.components();
  const auto &mesh = problem.mesh();
  std::vector<double> out(static_cast<std::size_t>(mesh.num_elements()) * nloc, 0.0);
  std::array<double, 6> local{};
  for (int k = 0; k < mesh.num_elements(); ++k)
  {
    gather_local(problem, k, state.values(), local);
    problem.element_residual(k, std::span(local.data(), nloc),
                             std::span(out.data() + static_cast<std::size_t>(k) * nloc, nloc),
                             {});
  }
  return out;
}

struct LinearSolver::Impl
{
  using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;
  Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu;
  std::vector<int> outer;
  std::vector<int> inner;
  bool analysed = false;
};

LinearSolver::LinearSolver() : impl_(std::make_unique<Impl>()) {}
LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver &&) noexcept = default;
LinearSolver &LinearSolver::operator=(LinearSolver &&) noexcept = default;

void LinearSolver::factorize(const SparseMatrix &a)
{
  if (a.rows() != a.cols())
  {
    throw InvalidArgument("linear system matrix must be square");
  }
  Impl::ColMatrix col(a);
  col.makeCompressed();
  std::vector<int> outer(col.outerIndexPtr(), col.outerIndexPtr() + col.outerSize() + 1);
  std::vector<int> inner(col.innerIndexPtr(), col.innerIndexPtr() + col.nonZeros());
  if (!impl_->analysed || outer != impl_->outer || inner != impl_->inner)
  {
    impl_->lu.analyzePattern(col);
    impl_->outer = std::move(outer);
    impl_->inner = std::move(inner);
    impl_->analysed = true;
  }
  impl_->lu.factorize(col);
  if (impl_->lu.info() != Eigen::Success)
  {
    impl_->analysed = false;
    throw SingularSystem("sparse LU factorisation failed: " + impl_->lu.lastErrorMessage());
  }
}

Vector LinearSolver::solve(const Vector &b) const
{
  Vector x = impl_->lu.solve(b);
  if (impl_->lu.info() != Eigen::Success || !x.allFinite())
  {
    throw SingularSystem("sparse LU solve failed");
  }
  return x;
}

Vector solve_linear(const SparseMatrix &a, const Vector &b)
{
  if (a.rows() != b.size())
  {
    throw InvalidArgument("right-hand side size does not match the matrix");
  }
  LinearSolver solver;
  solver.factorize(a);
  return solver.solve(b);
}

NewtonResult newton_solve(const NonlinearProblem &problem, const Field &initial,
                          const NewtonOptions &options)
{
  check_state(problem, initial);
  Field state = initial;
  Vector r = assemble_residual(problem, state);
  double norm = r.lpNorm<Eigen::Infinity>();
  const double norm0 = norm;
  LinearSolver solver;

  for (int it = 0;; ++it)
  {
    if (norm <= options.abs_tol || norm <= options.rel_tol * norm0)
    {
      return {std::move(state), it, norm};
    }
    if (it >= options.max_iter)
    {
      throw NonConvergence("Newton did not converge in " + std::to_string(options.max_iter) +
                             " iterations (residual " + std::to_string(norm) + ")",
                           std::move(state), it);
    }
    const Assembly sys = assemble(problem, state);
    solver.factorize(sys.jacobian);
    const Vector delta = solver.solve(-sys.residual);

    const auto current = state.values();
    double step = 1.0;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, step *= 0.5)
    {
      std::vector<double> trial(current.begin(), current.end());
      for (std::size_t i = 0; i < trial.size(); ++i)
      {
        trial[i] += step * delta[static_cast<Eigen::Index>(i)];
      }
      Field candidate(state.mesh_ptr(), state.space(), std::move(trial));
      Vector rc = assemble_residual(problem, candidate);
      const double nc = rc.lpNorm<Eigen::Infinity>();
      if (nc < norm)
      {
        state = std::move(candidate);
        r = std::move(rc);
        norm = nc;
        accepted = true;
        break;
      }
    }
    if (!accepted)
    {
      throw NonConvergence("Newton line search stagnated (residual " + std::to_string(norm) + ")",
                           std::move(state), it + 1);
    }
  }
}

std::vector<double> centroid_eval(const Field &field, int k)
{
  const auto &mesh = field.mesh();
  if (k < 0 || k >= mesh.num_elements())
  {
    throw InvalidArgument("element index out of range");
  }
  if (field.space() == Space::p0)
  {
    return {field[k]};
  }
  const int nc = field.components();
  const auto &t = mesh.triangle(k);
  std::vector<double> out(nc, 0.0);
  for (int c = 0; c < nc; ++c)
  {
    out[c] = (field[nc * t[0] + c] + field[nc * t[1] + c] + field[nc * t[2] + c]) / 3.0;
  }
  return out;
}

}  // namespace e2n::fem

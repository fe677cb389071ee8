#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "e2n/errors.hpp"
#include "e2n/field.hpp"
#include "e2n/mesh.hpp"

namespace e2n::fem
{

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Quadrature point on the reference triangle (0,0), (1,0), (0,1); weights sum to 1/2.
struct QuadPoint
{
  double xi;
  double eta;
  double weight;
};

/// Symmetric rule exact for polynomials of total degree <= `degree` (1..5 supported).
const std::vector<QuadPoint> &triangle_rule(int degree);

/// Gradients of the three barycentric (P1) basis functions on a triangle.
std::array<Eigen::Vector2d, 3> p1_gradients(const mesh::Point &a, const mesh::Point &b,
                                            const mesh::Point &c);

struct DirichletCondition
{
  int dof;
  double value;
};

/// Discrete nonlinear problem over P1 (scalar or 2-vector) Lagrange spaces. Element residuals
/// use local numbering `vertex * components + component`.
class NonlinearProblem
{
public:
  virtual ~NonlinearProblem() = default;

  virtual const mesh::MeshPtr &mesh_ptr() const = 0;
  virtual int components() const = 0;

  /// Local residual of element k and, when `jacobian` is non-empty, its row-major derivative.
  virtual void element_residual(int k, std::span<const double> local_state,
                                std::span<double> residual,
                                std::span<double> jacobian) const = 0;

  virtual std::vector<DirichletCondition> dirichlet() const = 0;

  const mesh::TriMesh &mesh() const { return *mesh_ptr(); }
  int num_dofs() const { return components() * mesh().num_vertices(); }
  Space space() const { return components() == 2 ? Space::p1_vector : Space::p1; }
};

/// Gather the element's local state from a global coefficient vector.
void gather_local(const NonlinearProblem &problem, int k, std::span<const double> global,
                  std::span<double> local);

struct Assembly
{
  Vector residual;
  SparseMatrix jacobian;
};

/// Global residual with Dirichlet rows replaced by (state - value) and the exact Jacobian
/// (unit diagonal on Dirichlet rows).
Assembly assemble(const NonlinearProblem &problem, const Field &state);
Vector assemble_residual(const NonlinearProblem &problem, const Field &state);

/// Raw (unconstrained) element residual vectors, concatenated element by element.
std::vector<double> element_residuals(const NonlinearProblem &problem, const Field &state);

/// Sparse direct LU; reuses the symbolic analysis while the sparsity pattern is unchanged.
class LinearSolver
{
public:
  LinearSolver();
  ~LinearSolver();
  LinearSolver(LinearSolver &&) noexcept;
  LinearSolver &operator=(LinearSolver &&) noexcept;

  void factorize(const SparseMatrix &a);
  Vector solve(const Vector &b) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Vector solve_linear(const SparseMatrix &a, const Vector &b);

struct NewtonOptions
{
  double abs_tol = 1e-8;
  double rel_tol = 1e-12;
  int max_iter = 50;
  int max_halvings = 8;
};

struct NewtonResult
{
  Field solution;
  int iterations;
  double residual_norm;
};

/// Thrown when Newton exhausts its iteration budget or the line search stalls.
class NonConvergence : public Error
{
public:
  NonConvergence(const std::string &what, Field last_iterate, int iterations)
    : Error(what), last_(std::move(last_iterate)), iterations_(iterations)
  {
  }

  const Field &last_iterate() const { return last_; }
  int iterations() const { return iterations_; }

private:
  Field last_;
  int iterations_;
};

/// Damped Newton with backtracking (halving) line search on the residual infinity norm.
NewtonResult newton_solve(const NonlinearProblem &problem, const Field &initial,
                          const NewtonOptions &options = {});

/// Value(s) at the centroid of element k: vertex mean for P1 fields, the element value for P0.
std::vector<double> centroid_eval(const Field &field, int k);

}  // namespace e2n::fem

#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "e2n/fem.hpp"
#include "e2n/field.hpp"
#include "e2n/mesh.hpp"

namespace e2n::model
{

using mesh::Point;

inline constexpr double default_background_drag = 0.0025;
inline constexpr double default_density = 1030.0;
inline constexpr double default_diameter = 18.0;
inline constexpr double default_thrust_coefficient = 0.8;
/// Minimum turbine-turbine and turbine-boundary clearance of turbine centres (m).
inline constexpr double turbine_clearance = 50.0;

/// Turbine with a D x D square footprint centred on `center`.
struct Turbine
{
  Point center = Point::Zero();
  double diameter = default_diameter;
  double thrust_coefficient = default_thrust_coefficient;

  double footprint_area() const { return diameter * diameter; }
  double swept_area() const;
  /// C_T = 1/2 (A_swept / A_footprint) c_T.
  double turbine_drag() const;
  bool contains(const Point &p) const;
};

struct Bathymetry
{
  enum class Profile
  {
    constant,
    trench,  ///< base + amplitude * y~ (1 - y~), y~ = y / height
  };

  Profile profile = Profile::constant;
  double depth = 40.0;
  double trench_base = 160.0;
  double trench_amplitude = 40.0;

  static Bathymetry constant(double depth);
  static Bathymetry trench(double base = 160.0, double amplitude = 40.0);

  double at(double y, double height) const;
};

struct Scenario
{
  std::string name = "scenario";
  double width = 1200.0;
  double height = 500.0;
  /// Edge length of the initial structured mesh (m).
  double mesh_size = default_diameter;
  std::vector<Turbine> turbines;
  double viscosity = 0.5;
  Bathymetry bathymetry;
  /// Signed inflow speed; negative values mean the flow enters through the right side.
  double inflow_speed = 5.0;
  double background_drag = default_background_drag;
  double density = default_density;
  /// Not used by the fixed-depth model; kept so scenario files stay self-describing.
  double gravity = 9.81;
};

/// Throws InvalidArgument if the scenario violates a physical or geometric constraint.
void validate(const Scenario &scenario);

double depth_at(const Scenario &scenario, const Point &p);
double drag_coefficient(const Scenario &scenario, const Point &p);

/// Area of the intersection between a triangle and the turbine footprint.
double footprint_overlap(const Turbine &turbine, const std::array<Point, 3> &triangle);

/// Element averages of C_D and b.
double element_mean_drag(const Scenario &scenario, const mesh::TriMesh &mesh, int k);
double element_mean_depth(const Scenario &scenario, const mesh::TriMesh &mesh, int k);

/// Structured initial mesh; inflow and outflow markers are swapped for negative inflow.
mesh::MeshPtr initial_mesh(const Scenario &scenario);

using VectorFunction = std::function<Eigen::Vector2d(const Point &)>;

struct FlowOptions
{
  /// Body force added to the right-hand side; empty means none.
  VectorFunction forcing;
  /// Velocity imposed on inflow edges; empty means (u_in, 0).
  VectorFunction boundary_velocity;
  /// When set, advection and drag use this velocity instead of the unknown, which turns the
  /// model into a linear advection-diffusion-reaction surrogate.
  std::optional<fem::Field> frozen_advection;
  bool stabilise = true;
};

/// Steady fixed-depth momentum balance
///   u.grad(u) + C_D |u| u / b - div(nu grad u) = f
/// with P1 velocity, streamline-diffusion stabilisation, strong inflow data and strong
/// free-slip (v = 0) on the horizontal walls.
class FlowProblem final : public fem::NonlinearProblem
{
public:
  FlowProblem(Scenario scenario, mesh::MeshPtr mesh, FlowOptions options = {});

  const mesh::MeshPtr &mesh_ptr() const override { return mesh_; }
  int components() const override { return 2; }
  void element_residual(int k, std::span<const double> local_state, std::span<double> residual,
                        std::span<double> jacobian) const override;
  std::vector<fem::DirichletCondition> dirichlet() const override { return dirichlet_; }

  const Scenario &scenario() const { return scenario_; }
  const FlowOptions &options() const { return options_; }

  /// Same problem on a uniformly refined mesh (frozen advection is prolonged).
  FlowProblem refined(const mesh::MeshPtr &fine) const;

  /// Power J(u) = sum over turbines of rho C_T |u|^3 integrated over the footprint.
  double qoi(const fem::Field &u) const;
  fem::Vector qoi_gradient(const fem::Field &u) const;

  /// Constant inflow velocity with Dirichlet values applied.
  fem::Field initial_guess() const;

private:
  template <class S>
  void kernel(int k, const S *w, S *r) const;

  struct FootprintPoint
  {
    double l1;
    double l2;
    double weight;  ///< physical quadrature weight
    double turbine_drag;
    double depth;
  };

  Scenario scenario_;
  mesh::MeshPtr mesh_;
  FlowOptions options_;
  std::vector<fem::DirichletCondition> dirichlet_;
  std::vector<int> footprint_offset_;
  std::vector<FootprintPoint> footprint_points_;
};

/// Newton solve from the constant inflow state.
fem::NewtonResult solve_forward(const FlowProblem &problem, const fem::NewtonOptions &options = {});

/// Discrete adjoint: A^T u* = dJ/du with A the Jacobian at `state`; homogeneous on Dirichlet
/// dofs.
fem::Field adjoint_solve(const FlowProblem &problem, const fem::Field &state);
/// Same with a caller-supplied right-hand side.
fem::Field adjoint_solve(const FlowProblem &problem, const fem::Field &state,
                         const fem::Vector &rhs);

double qoi(const Scenario &scenario, const fem::Field &u);

/// Scenario text format: `[domain]`, `[physics]` and repeated `[turbine]` sections of
/// `key = value` lines; `#` starts a comment.
Scenario read_scenario(std::istream &in);
void write_scenario(std::ostream &out, const Scenario &scenario);
Scenario load_scenario(const std::string &path);
void save_scenario(const std::string &path, const Scenario &scenario);

}  // namespace e2n::model

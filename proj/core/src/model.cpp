#include "e2n/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dual.hpp"
#include "e2n/errors.hpp"
#include "e2n/transfer.hpp"

namespace e2n::model
{

double Turbine::swept_area() const
{
  return std::numbers::pi * 0.25 * diameter * diameter;
}

double Turbine::turbine_drag() const
{
  return 0.5 * swept_area() / footprint_area() * thrust_coefficient;
}

bool Turbine::contains(const Point &p) const
{
  const double r = 0.5 * diameter;
  return std::abs(p.x() - center.x()) <= r && std::abs(p.y() - center.y()) <= r;
}

Bathymetry Bathymetry::constant(double depth)
{
  Bathymetry b;
  b.profile = Profile::constant;
  b.depth = depth;
  return b;
}

Bathymetry Bathymetry::trench(double base, double amplitude)
{
  Bathymetry b;
  b.profile = Profile::trench;
  b.trench_base = base;
  b.trench_amplitude = amplitude;
  return b;
}

double Bathymetry::at(double y, double height) const
{
  if (profile == Profile::constant)
  {
    return depth;
  }
  const double t = y / height;
  return trench_base + trench_amplitude * t * (1.0 - t);
}

void validate(const Scenario &s)
{
  auto require = [](bool ok, const std::string &what) {
    if (!ok)
    {
      throw InvalidArgument(what);
    }
  };
  require(s.width > 0.0 && s.height > 0.0, "domain dimensions must be positive");
  require(s.mesh_size > 0.0, "mesh size must be positive");
  require(s.viscosity > 0.0, "viscosity must be positive");
  require(s.background_drag > 0.0, "background drag must be positive");
  require(s.density > 0.0, "density must be positive");
  require(std::isfinite(s.inflow_speed), "inflow speed must be finite");
  if (s.bathymetry.profile == Bathymetry::Profile::constant)
  {
    require(s.bathymetry.depth > 0.0, "bathymetry must be positive");
  }
  else
  {
    const double lowest =
      s.bathymetry.trench_base + std::min(0.0, 0.25 * s.bathymetry.trench_amplitude);
    require(lowest > 0.0, "bathymetry must be positive");
  }
  for (std::size_t i = 0; i < s.turbines.size(); ++i)
  {
    const auto &t = s.turbines[i];
    require(t.diameter > 0.0, "turbine diameter must be positive");
    require(t.thrust_coefficient > 0.0 && t.thrust_coefficient < 1.0,
            "thrust coefficient must lie in (0, 1)");
    const double r = std::max(0.5 * t.diameter, turbine_clearance);
    require(t.center.x() >= r && t.center.x() <= s.width - r && t.center.y() >= r &&
              t.center.y() <= s.height - r,
            "turbine " + std::to_string(i) + " is too close to the domain boundary");
    for (std::size_t j = 0; j < i; ++j)
    {
      require((t.center - s.turbines[j].center).norm() >= turbine_clearance,
              "turbines " + std::to_string(j) + " and " + std::to_string(i) + " are too close");
    }
  }
}

double depth_at(const Scenario &s, const Point &p)
{
  return s.bathymetry.at(p.y(), s.height);
}

double drag_coefficient(const Scenario &s, const Point &p)
{
  double cd = s.background_drag;
  for (const auto &t : s.turbines)
  {
    if (t.contains(p))
    {
      cd += t.turbine_drag();
    }
  }
  return cd;
}

namespace
{

using Polygon = std::vector<Point>;

// Sutherland-Hodgman clip of a convex polygon against the axis-aligned square footprint.
Polygon clip_to_footprint(const Turbine &t, Polygon poly)
{
  const double r = 0.5 * t.diameter;
  const double lo[2] = {t.center.x() - r, t.center.y() - r};
  const double hi[2] = {t.center.x() + r, t.center.y() + r};
  for (int side = 0; side < 4 && !poly.empty(); ++side)
  {
    const int axis = side / 2;
    const bool upper = side % 2 == 1;
    const double bound = upper ? hi[axis] : lo[axis];
    auto inside = [&](const Point &p) { return upper ? p[axis] <= bound : p[axis] >= bound; };
    Polygon out;
    for (std::size_t i = 0; i < poly.size(); ++i)
    {
      const Point &a = poly[i];
      const Point &b = poly[(i + 1) % poly.size()];
      const bool ia = inside(a);
      const bool ib = inside(b);
      if (ia)
      {
        out.push_back(a);
      }
      if (ia != ib)
      {
        const double s = (bound - a[axis]) / (b[axis] - a[axis]);
        Point p = a + s * (b - a);
        p[axis] = bound;
        out.push_back(p);
      }
    }
    poly = std::move(out);
  }
  return poly;
}

bool bbox_overlaps(const Turbine &t, const std::array<Point, 3> &tri)
{
  const double r = 0.5 * t.diameter;
  for (int axis = 0; axis < 2; ++axis)
  {
    const double mn = std::min({tri[0][axis], tri[1][axis], tri[2][axis]});
    const double mx = std::max({tri[0][axis], tri[1][axis], tri[2][axis]});
    if (mx <= t.center[axis] - r || mn >= t.center[axis] + r)
    {
      return false;
    }
  }
  return true;
}

// Triangles of the fan triangulation of tri ∩ footprint; degenerate slivers are dropped.
std::vector<std::array<Point, 3>> footprint_pieces(const Turbine &t,
                                                   const std::array<Point, 3> &tri)
{
  std::vector<std::array<Point, 3>> pieces;
  if (!bbox_overlaps(t, tri))
  {
    return pieces;
  }
  const Polygon poly = clip_to_footprint(t, Polygon(tri.begin(), tri.end()));
  const double scale = std::abs(mesh::signed_area(tri[0], tri[1], tri[2]));
  for (std::size_t i = 1; i + 1 < poly.size(); ++i)
  {
    if (mesh::signed_area(poly[0], poly[i], poly[i + 1]) > 1e-14 * scale)
    {
      pieces.push_back({poly[0], poly[i], poly[i + 1]});
    }
  }
  return pieces;
}

std::array<Point, 3> corners(const mesh::TriMesh &mesh, int k)
{
  const auto &t = mesh.triangle(k);
  return {mesh.vertex(t[0]), mesh.vertex(t[1]), mesh.vertex(t[2])};
}

Point reference_point(const std::array<Point, 3> &tri, double xi, double eta)
{
  return (1.0 - xi - eta) * tri[0] + xi * tri[1] + eta * tri[2];
}

double longest_edge(const std::array<Point, 3> &p)
{
  return std::sqrt(std::max({(p[1] - p[0]).squaredNorm(), (p[2] - p[1]).squaredNorm(),
                             (p[0] - p[2]).squaredNorm()}));
}

}  // namespace

double footprint_overlap(const Turbine &turbine, const std::array<Point, 3> &triangle)
{
  double area = 0.0;
  for (const auto &p : footprint_pieces(turbine, triangle))
  {
    area += mesh::signed_area(p[0], p[1], p[2]);
  }
  return area;
}

double element_mean_drag(const Scenario &s, const mesh::TriMesh &mesh, int k)
{
  const auto tri = corners(mesh, k);
  double cd = s.background_drag;
  for (const auto &t : s.turbines)
  {
    cd += t.turbine_drag() * footprint_overlap(t, tri) / mesh.area(k);
  }
  return cd;
}

double element_mean_depth(const Scenario &s, const mesh::TriMesh &mesh, int k)
{
  // The trench profile is quadratic, so a degree-2 rule gives the exact mean.
  const auto tri = corners(mesh, k);
  double sum = 0.0;
  for (const auto &q : fem::triangle_rule(2))
  {
    sum += 2.0 * q.weight * depth_at(s, reference_point(tri, q.xi, q.eta));
  }
  return sum;
}

mesh::MeshPtr initial_mesh(const Scenario &s)
{
  validate(s);
  auto m = mesh::build_structured_mesh(s.width, s.height, s.mesh_size);
  if (s.inflow_speed < 0.0)
  {
    m = mesh::swap_markers(m, mesh::marker::inflow, mesh::marker::outflow);
  }
  return std::make_shared<const mesh::TriMesh>(std::move(m));
}

FlowProblem::FlowProblem(Scenario scenario, mesh::MeshPtr mesh, FlowOptions options)
  : scenario_(std::move(scenario)), mesh_(std::move(mesh)), options_(std::move(options))
{
  validate(scenario_);
  if (!mesh_)
  {
    throw InvalidArgument("flow problem requires a mesh");
  }
  const auto &m = *mesh_;
  if (options_.frozen_advection)
  {
    const auto &a = *options_.frozen_advection;
    if (a.mesh_ptr() != mesh_ || a.space() != fem::Space::p1_vector)
    {
      throw InvalidArgument("frozen advection must be a vector P1 field on the problem mesh");
    }
  }

  // Strong boundary data: inflow fixes both components, walls fix the normal (y) component.
  std::vector<int> kind(m.num_vertices(), 0);
  for (const auto &e : m.boundary_edges())
  {
    for (int v : {e.v0, e.v1})
    {
      if (e.marker == mesh::marker::inflow)
      {
        kind[v] = 1;
      }
      else if (e.marker == mesh::marker::wall && kind[v] == 0)
      {
        kind[v] = 3;
      }
    }
  }
  for (int v = 0; v < m.num_vertices(); ++v)
  {
    if (kind[v] == 1)
    {
      const Eigen::Vector2d g = options_.boundary_velocity
                                  ? options_.boundary_velocity(m.vertex(v))
                                  : Eigen::Vector2d(scenario_.inflow_speed, 0.0);
      dirichlet_.push_back({2 * v, g.x()});
      dirichlet_.push_back({2 * v + 1, g.y()});
    }
    else if (kind[v] == 3)
    {
      dirichlet_.push_back({2 * v + 1, 0.0});
    }
  }

  // Footprint quadrature: degree-4 rule on the fan triangulation of each clipped footprint.
  const auto &rule = fem::triangle_rule(4);
  footprint_offset_.assign(m.num_elements() + 1, 0);
  for (int k = 0; k < m.num_elements(); ++k)
  {
    const auto tri = corners(m, k);
    const Eigen::Vector2d e1 = tri[1] - tri[0];
    const Eigen::Vector2d e2 = tri[2] - tri[0];
    const double det = e1.x() * e2.y() - e1.y() * e2.x();
    for (const auto &t : scenario_.turbines)
    {
      for (const auto &piece : footprint_pieces(t, tri))
      {
        const double jac = 2.0 * mesh::signed_area(piece[0], piece[1], piece[2]);
        for (const auto &q : rule)
        {
          const Point x = reference_point(piece, q.xi, q.eta);
          const Eigen::Vector2d r = x - tri[0];
          const double l1 = (r.x() * e2.y() - r.y() * e2.x()) / det;
          const double l2 = (e1.x() * r.y() - e1.y() * r.x()) / det;
          footprint_points_.push_back(
            {l1, l2, q.weight * jac, t.turbine_drag(), depth_at(scenario_, x)});
        }
      }
    }
    footprint_offset_[k + 1] = static_cast<int>(footprint_points_.size());
  }
}

template <class S>
void FlowProblem::kernel(int k, const S *w, S *r) const
{
  using std::sqrt;
  using ad::sqrt;
  const auto &m = *mesh_;
  const auto tri = corners(m, k);
  const auto grad = fem::p1_gradients(tri[0], tri[1], tri[2]);
  const double area = m.area(k);
  const double nu = scenario_.viscosity;
  const bool frozen = options_.frozen_advection.has_value();

  // Velocity gradients are constant on the element: gu[c][dim].
  S gu[2][2];
  for (int c = 0; c < 2; ++c)
  {
    for (int dim = 0; dim < 2; ++dim)
    {
      gu[c][dim] = w[c] * grad[0][dim] + w[2 + c] * grad[1][dim] + w[4 + c] * grad[2][dim];
    }
  }

  double frozen_nodes[6] = {};
  if (frozen)
  {
    const auto &t = m.triangle(k);
    const auto &a = *options_.frozen_advection;
    for (int i = 0; i < 3; ++i)
    {
      frozen_nodes[2 * i] = a[2 * t[i]];
      frozen_nodes[2 * i + 1] = a[2 * t[i] + 1];
    }
  }
  auto advection_at = [&](double l0, double l1, double l2, S &ax, S &ay) {
    if (frozen)
    {
      ax = S(l0 * frozen_nodes[0] + l1 * frozen_nodes[2] + l2 * frozen_nodes[4]);
      ay = S(l0 * frozen_nodes[1] + l1 * frozen_nodes[3] + l2 * frozen_nodes[5]);
    }
    else
    {
      ax = l0 * w[0] + l1 * w[2] + l2 * w[4];
      ay = l0 * w[1] + l1 * w[3] + l2 * w[5];
    }
  };

  // Streamline-diffusion parameter from the centroid velocity and the longest edge.
  S tau(0.0);
  if (options_.stabilise)
  {
    S cx, cy;
    advection_at(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, cx, cy);
    const double h = longest_edge(tri);
    const S speed = sqrt(cx * cx + cy * cy);
    const S peclet = speed * (h / (2.0 * nu));
    if (peclet < 3.0)
    {
      tau = S(h * h / (12.0 * nu));
    }
    else
    {
      tau = (0.5 * h) / speed;
    }
  }

  for (int i = 0; i < 6; ++i)
  {
    r[i] = S(0.0);
  }
  // Viscous term.
  for (int a = 0; a < 3; ++a)
  {
    for (int c = 0; c < 2; ++c)
    {
      r[2 * a + c] += (area * nu) * (gu[c][0] * grad[a][0] + gu[c][1] * grad[a][1]);
    }
  }

  auto accumulate = [&](double l1, double l2, double weight, double drag, double depth,
                        bool galerkin_terms, const Point &x) {
    const double l[3] = {1.0 - l1 - l2, l1, l2};
    S ax, ay;
    advection_at(l[0], l[1], l[2], ax, ay);
    const S u[2] = {l[0] * w[0] + l[1] * w[2] + l[2] * w[4],
                    l[0] * w[1] + l[1] * w[3] + l[2] * w[5]};
    const S speed = sqrt(ax * ax + ay * ay);
    const S sigma = speed * (drag / depth);
    S strong[2];
    for (int c = 0; c < 2; ++c)
    {
      strong[c] = sigma * u[c];
      if (galerkin_terms)
      {
        strong[c] += ax * gu[c][0] + ay * gu[c][1];
      }
    }
    if (galerkin_terms && options_.forcing)
    {
      const Eigen::Vector2d f = options_.forcing(x);
      strong[0] -= f.x();
      strong[1] -= f.y();
    }
    for (int a = 0; a < 3; ++a)
    {
      const S test = l[a] + tau * (ax * grad[a][0] + ay * grad[a][1]);
      for (int c = 0; c < 2; ++c)
      {
        r[2 * a + c] += weight * (test * strong[c]);
      }
    }
  };

  for (const auto &q : fem::triangle_rule(4))
  {
    const Point x = reference_point(tri, q.xi, q.eta);
    accumulate(q.xi, q.eta, 2.0 * area * q.weight, scenario_.background_drag,
               depth_at(scenario_, x), true, x);
  }
  for (int p = footprint_offset_[k]; p < footprint_offset_[k + 1]; ++p)
  {
    const auto &fp = footprint_points_[p];
    accumulate(fp.l1, fp.l2, fp.weight, fp.turbine_drag, fp.depth, false, Point::Zero());
  }
}

void FlowProblem::element_residual(int k, std::span<const double> local_state,
                                   std::span<double> residual, std::span<double> jacobian) const
{
  if (jacobian.empty())
  {
    kernel<double>(k, local_state.data(), residual.data());
    return;
  }
  using D = ad::Dual<6>;
  D w[6], r[6];
  for (int i = 0; i < 6; ++i)
  {
    w[i] = D::variable(local_state[i], i);
  }
  kernel<D>(k, w, r);
  for (int i = 0; i < 6; ++i)
  {
    residual[i] = r[i].v;
    for (int j = 0; j < 6; ++j)
    {
      jacobian[6 * i + j] = r[i].d[j];
    }
  }
}

FlowProblem FlowProblem::refined(const mesh::MeshPtr &fine) const
{
  FlowOptions opts = options_;
  if (opts.frozen_advection)
  {
    opts.frozen_advection = mesh::prolong(*opts.frozen_advection, fine);
  }
  return FlowProblem(scenario_, fine, std::move(opts));
}

double FlowProblem::qoi(const fem::Field &u) const
{
  if (&u.mesh() != mesh_.get() || u.space() != fem::Space::p1_vector)
  {
    throw InvalidArgument("QoI expects a vector P1 field on the problem mesh");
  }
  const auto &m = *mesh_;
  double j = 0.0;
  for (int k = 0; k < m.num_elements(); ++k)
  {
    const auto &t = m.triangle(k);
    for (int p = footprint_offset_[k]; p < footprint_offset_[k + 1]; ++p)
    {
      const auto &fp = footprint_points_[p];
      const double l[3] = {1.0 - fp.l1 - fp.l2, fp.l1, fp.l2};
      double ux = 0.0, uy = 0.0;
      for (int a = 0; a < 3; ++a)
      {
        ux += l[a] * u[2 * t[a]];
        uy += l[a] * u[2 * t[a] + 1];
      }
      const double speed = std::hypot(ux, uy);
      j += fp.weight * fp.turbine_drag * speed * speed * speed;
    }
  }
  return scenario_.density * j;
}

fem::Vector FlowProblem::qoi_gradient(const fem::Field &u) const
{
  if (&u.mesh() != mesh_.get() || u.space() != fem::Space::p1_vector)
  {
    throw InvalidArgument("QoI expects a vector P1 field on the problem mesh");
  }
  const auto &m = *mesh_;
  fem::Vector g = fem::Vector::Zero(num_dofs());
  for (int k = 0; k < m.num_elements(); ++k)
  {
    const auto &t = m.triangle(k);
    for (int p = footprint_offset_[k]; p < footprint_offset_[k + 1]; ++p)
    {
      const auto &fp = footprint_points_[p];
      const double l[3] = {1.0 - fp.l1 - fp.l2, fp.l1, fp.l2};
      double ux = 0.0, uy = 0.0;
      for (int a = 0; a < 3; ++a)
      {
        ux += l[a] * u[2 * t[a]];
        uy += l[a] * u[2 * t[a] + 1];
      }
      const double coef =
        3.0 * scenario_.density * fp.weight * fp.turbine_drag * std::hypot(ux, uy);
      for (int a = 0; a < 3; ++a)
      {
        g[2 * t[a]] += coef * ux * l[a];
        g[2 * t[a] + 1] += coef * uy * l[a];
      }
    }
  }
  return g;
}

fem::Field FlowProblem::initial_guess() const
{
  std::vector<double> v(num_dofs());
  for (int i = 0; i < mesh_->num_vertices(); ++i)
  {
    v[2 * i] = scenario_.inflow_speed;
    v[2 * i + 1] = 0.0;
  }
  for (const auto &bc : dirichlet_)
  {
    v[bc.dof] = bc.value;
  }
  return fem::Field(mesh_, fem::Space::p1_vector, std::move(v));
}

fem::NewtonResult solve_forward(const FlowProblem &problem, const fem::NewtonOptions &options)
{
  return fem::newton_solve(problem, problem.initial_guess(), options);
}

fem::Field adjoint_solve(const FlowProblem &problem, const fem::Field &state)
{
  return adjoint_solve(problem, state, problem.qoi_gradient(state));
}

fem::Field adjoint_solve(const FlowProblem &problem, const fem::Field &state,
                         const fem::Vector &rhs)
{
  if (rhs.size() != problem.num_dofs())
  {
    throw InvalidArgument("adjoint right-hand side has the wrong size");
  }
  const fem::Assembly sys = fem::assemble(problem, state);
  fem::SparseMatrix at = sys.jacobian.transpose();
  fem::Vector b = rhs;
  std::vector<char> fixed(problem.num_dofs(), 0);
  for (const auto &bc : problem.dirichlet())
  {
    fixed[bc.dof] = 1;
    b[bc.dof] = 0.0;
  }
  for (int row = 0; row < at.outerSize(); ++row)
  {
    if (!fixed[row])
    {
      continue;
    }
    for (fem::SparseMatrix::InnerIterator it(at, row); it; ++it)
    {
      it.valueRef() = it.col() == row ? 1.0 : 0.0;
    }
  }
  at.prune(0.0);
  const fem::Vector x = fem::solve_linear(at, b);
  return fem::Field(problem.mesh_ptr(), fem::Space::p1_vector,
                    std::vector<double>(x.data(), x.data() + x.size()));
}

double qoi(const Scenario &scenario, const fem::Field &u)
{
  return FlowProblem(scenario, u.mesh_ptr()).qoi(u);
}

}  // namespace e2n::model

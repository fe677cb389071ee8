#include "e2n/metric.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "e2n/errors.hpp"
#include "e2n/fem.hpp"
#include "text_io.hpp"

namespace e2n::metric
{

std::vector<double> clement_average(const mesh::TriMesh &mesh, std::span<const double> values,
                                    int components)
{
  if (values.size() != static_cast<std::size_t>(components) * mesh.num_elements())
  {
    throw InvalidArgument("element value count does not match the mesh");
  }
  std::vector<double> out(static_cast<std::size_t>(components) * mesh.num_vertices(), 0.0);
  for (int v = 0; v < mesh.num_vertices(); ++v)
  {
    double area = 0.0;
    for (int k : mesh.vertex_elements(v))
    {
      area += mesh.area(k);
      for (int c = 0; c < components; ++c)
      {
        out[components * v + c] += mesh.area(k) * values[components * k + c];
      }
    }
    for (int c = 0; c < components; ++c)
    {
      out[components * v + c] /= area;
    }
  }
  return out;
}

fem::Field clement_interpolate(const fem::Field &p0)
{
  if (p0.space() != fem::Space::p0)
  {
    throw InvalidArgument("Clement interpolation expects a P0 field");
  }
  return fem::Field(p0.mesh_ptr(), fem::Space::p1, clement_average(p0.mesh(), p0.values(), 1));
}

std::vector<Eigen::Vector2d> element_gradients(const fem::Field &p1, int component)
{
  if (p1.space() == fem::Space::p0 || component < 0 || component >= p1.components())
  {
    throw InvalidArgument("gradient recovery expects a P1 field and a valid component");
  }
  const auto &m = p1.mesh();
  const int nc = p1.components();
  std::vector<Eigen::Vector2d> g(m.num_elements());
  for (int k = 0; k < m.num_elements(); ++k)
  {
    const auto &t = m.triangle(k);
    const auto grad = fem::p1_gradients(m.vertex(t[0]), m.vertex(t[1]), m.vertex(t[2]));
    g[k] = p1[nc * t[0] + component] * grad[0] + p1[nc * t[1] + component] * grad[1] +
           p1[nc * t[2] + component] * grad[2];
  }
  return g;
}

namespace
{

std::vector<Eigen::Vector2d> average_vectors(const mesh::TriMesh &m,
                                             const std::vector<Eigen::Vector2d> &elem)
{
  std::vector<double> flat(2 * elem.size());
  for (std::size_t k = 0; k < elem.size(); ++k)
  {
    flat[2 * k] = elem[k].x();
    flat[2 * k + 1] = elem[k].y();
  }
  const auto avg = clement_average(m, flat, 2);
  std::vector<Eigen::Vector2d> out(m.num_vertices());
  for (int v = 0; v < m.num_vertices(); ++v)
  {
    out[v] = {avg[2 * v], avg[2 * v + 1]};
  }
  return out;
}

}  // namespace

std::vector<Eigen::Vector2d> recover_gradient(const fem::Field &p1, int component)
{
  return average_vectors(p1.mesh(), element_gradients(p1, component));
}

std::vector<Tensor> recover_hessian(const fem::Field &p1, int component)
{
  const auto &m = p1.mesh();
  const auto grad = recover_gradient(p1, component);
  std::vector<double> g(2 * m.num_vertices());
  for (int v = 0; v < m.num_vertices(); ++v)
  {
    g[2 * v] = grad[v].x();
    g[2 * v + 1] = grad[v].y();
  }
  const fem::Field gf(p1.mesh_ptr(), fem::Space::p1_vector, std::move(g));
  // Row i of the Hessian is the recovered gradient of the i-th gradient component.
  const auto row0 = recover_gradient(gf, 0);
  const auto row1 = recover_gradient(gf, 1);
  std::vector<Tensor> h(m.num_vertices());
  for (int v = 0; v < m.num_vertices(); ++v)
  {
    const double off = 0.5 * (row0[v].y() + row1[v].x());
    h[v] << row0[v].x(), off, off, row1[v].y();
  }
  return h;
}

std::vector<Tensor> centroid_values(const mesh::TriMesh &mesh, const std::vector<Tensor> &vertex)
{
  std::vector<Tensor> out(mesh.num_elements());
  for (int k = 0; k < mesh.num_elements(); ++k)
  {
    const auto &t = mesh.triangle(k);
    out[k] = (vertex[t[0]] + vertex[t[1]] + vertex[t[2]]) / 3.0;
  }
  return out;
}

bool is_spd(const Tensor &m)
{
  if (!m.allFinite() || m(0, 1) != m(1, 0))
  {
    return false;
  }
  Eigen::LLT<Tensor> llt(m);
  return llt.info() == Eigen::Success && m(0, 0) > 0.0 && m.determinant() > 0.0;
}

MetricField::MetricField(mesh::MeshPtr mesh, std::vector<Tensor> tensors)
  : mesh_(std::move(mesh)), tensors_(std::move(tensors))
{
  if (!mesh_ || static_cast<int>(tensors_.size()) != mesh_->num_elements())
  {
    throw InvalidArgument("metric needs one tensor per element");
  }
  for (std::size_t k = 0; k < tensors_.size(); ++k)
  {
    if (!is_spd(tensors_[k]))
    {
      throw InvalidMetric("metric tensor on element " + std::to_string(k) +
                          " is not symmetric positive definite");
    }
  }
}

double stretching_factor(const Tensor &hessian, double max_stretch)
{
  Eigen::SelfAdjointEigenSolver<Tensor> eig;
  eig.computeDirect(hessian);
  double l1 = std::abs(eig.eigenvalues()[0]);
  double l2 = std::abs(eig.eigenvalues()[1]);
  if (l1 > l2)
  {
    std::swap(l1, l2);
  }
  if (l2 == 0.0)
  {
    return 1.0;
  }
  if (l1 == 0.0)
  {
    return max_stretch;
  }
  return std::clamp(std::sqrt(l2 / l1), 1.0, max_stretch);
}

MetricField build_metric(const dwr::IndicatorField &indicators, const fem::Field &u_h,
                         double target_complexity, const MetricOptions &options)
{
  const auto &m = indicators.mesh();
  if (&u_h.mesh() != &m)
  {
    throw InvalidArgument("indicators and solution must share a mesh");
  }
  if (u_h.space() == fem::Space::p0)
  {
    throw InvalidArgument("metric construction needs a P1 solution");
  }
  if (!(target_complexity > 0.0) || !(options.alpha >= 1.0) || !(options.max_stretch >= 1.0))
  {
    throw InvalidArgument("metric needs positive complexity, alpha >= 1 and max_stretch >= 1");
  }
  bool any = false;
  for (double e : indicators.values())
  {
    any = any || e != 0.0;
  }
  if (!any)
  {
    throw DegenerateIndicator("all error indicators are zero");
  }

  // Entry-wise mean of the component Hessians, evaluated at centroids.
  const int nc = u_h.components();
  std::vector<Tensor> hess(m.num_elements(), Tensor::Zero());
  for (int c = 0; c < nc; ++c)
  {
    const auto hc = centroid_values(m, recover_hessian(u_h, c));
    for (int k = 0; k < m.num_elements(); ++k)
    {
      hess[k] += hc[k] / nc;
    }
  }

  const double p = 1.0 / (options.alpha + 1.0);
  std::vector<Tensor> tensors(m.num_elements());
  for (int k = 0; k < m.num_elements(); ++k)
  {
    const double e = std::max(std::abs(indicators[k]), options.indicator_floor);
    // Scaling per unit area; the global rescale below fixes the constant.
    const double size = std::pow(e, p) / m.area(k);

    Eigen::SelfAdjointEigenSolver<Tensor> eig;
    eig.computeDirect(hess[k]);
    Eigen::Vector2d lam = eig.eigenvalues().cwiseAbs();
    Tensor v = eig.eigenvectors();
    if (lam[0] > lam[1])
    {
      std::swap(lam[0], lam[1]);
      v.col(0).swap(v.col(1));
    }
    const double s = stretching_factor(hess[k], options.max_stretch);
    // Larger metric eigenvalue (shorter edges) along the high-curvature direction.
    Tensor t = v * Eigen::Vector2d(1.0 / s, s).asDiagonal() * v.transpose();
    t = 0.5 * (t + t.transpose()).eval();
    tensors[k] = size * t;
  }

  double current = 0.0;
  for (int k = 0; k < m.num_elements(); ++k)
  {
    current += std::sqrt(tensors[k].determinant()) * m.area(k);
  }
  const double scale = target_complexity / current;
  for (auto &t : tensors)
  {
    t *= scale;
  }
  return MetricField(indicators.mesh_ptr(), std::move(tensors));
}

double complexity(const MetricField &metric)
{
  const auto &m = metric.mesh();
  double c = 0.0;
  for (int k = 0; k < metric.size(); ++k)
  {
    if (!is_spd(metric[k]))
    {
      throw InvalidMetric("metric tensor is not symmetric positive definite");
    }
    c += std::sqrt(metric[k].determinant()) * m.area(k);
  }
  return c;
}

double complexity_schedule(int iteration, double target)
{
  if (iteration < 0)
  {
    throw InvalidArgument("iteration must be non-negative");
  }
  static constexpr double ramp[] = {0.25, 0.5};
  return iteration < 2 ? ramp[iteration] * target : target;
}

void write_metric(std::ostream &out, const MetricField &metric)
{
  out << "E2NMETRIC 1\n" << metric.size() << "\n";
  for (const auto &t : metric.tensors())
  {
    out << io::format_double(t(0, 0)) << ' ' << io::format_double(t(0, 1)) << ' '
        << io::format_double(t(1, 1)) << '\n';
  }
}

MetricField read_metric(std::istream &in, mesh::MeshPtr mesh)
{
  io::LineReader reader(in);
  reader.expect_header("E2NMETRIC", 1);
  const int n = reader.read_count();
  if (!mesh || n != mesh->num_elements())
  {
    throw DimensionMismatch("metric file has " + std::to_string(n) +
                            " tensors but the mesh has a different element count");
  }
  std::vector<Tensor> tensors(n);
  for (int k = 0; k < n; ++k)
  {
    const auto v = reader.read_doubles(3);
    tensors[k] << v[0], v[1], v[1], v[2];
  }
  return MetricField(std::move(mesh), std::move(tensors));
}

}  // namespace e2n::metric

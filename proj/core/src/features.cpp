#include "e2n/features.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "e2n/errors.hpp"
#include "e2n/fem.hpp"
#include "e2n/metric.hpp"
#include "text_io.hpp"

namespace e2n::features
{

const std::array<std::string_view, num_features> &feature_names()
{
  static const std::array<std::string_view, num_features> names = {
    "coarse_dwr", "viscosity", "drag_coefficient", "depth", "size", "shape_cos",
    "shape_sin", "boundary_length",
    "u", "u_x", "u_y", "u_xx", "u_xy", "u_yy",
    "v", "v_x", "v_y", "v_xx", "v_xy", "v_yy",
    "adj_u", "adj_u_x", "adj_u_y", "adj_u_xx", "adj_u_xy", "adj_u_yy",
    "adj_v", "adj_v_x", "adj_v_y", "adj_v_xx", "adj_v_xy", "adj_v_yy"};
  return names;
}

std::array<double, 2> shape_features(double s, double theta)
{
  const double c = std::cos(theta);
  const double sn = std::sin(theta);
  return {c * c / s + s * sn * sn, (s - 1.0 / s) * sn * c};
}

namespace
{

// Writes value, gradient and recovered Hessian of every component of `f` from column `first`.
void solution_block(const fem::Field &f, std::vector<FeatureVector> &out, int first)
{
  const auto &m = f.mesh();
  for (int c = 0; c < 2; ++c)
  {
    const auto grad = metric::element_gradients(f, c);
    const auto hess = metric::centroid_values(m, metric::recover_hessian(f, c));
    const int col = first + 6 * c;
    for (int k = 0; k < m.num_elements(); ++k)
    {
      const auto &t = m.triangle(k);
      auto &row = out[k];
      row[col] = (f[2 * t[0] + c] + f[2 * t[1] + c] + f[2 * t[2] + c]) / 3.0;
      row[col + 1] = grad[k].x();
      row[col + 2] = grad[k].y();
      row[col + 3] = hess[k](0, 0);
      row[col + 4] = hess[k](0, 1);
      row[col + 5] = hess[k](1, 1);
    }
  }
}

}  // namespace

std::vector<FeatureVector> extract_features(const model::Scenario &scenario,
                                            const fem::Field &u_h, const fem::Field &u_star_h,
                                            const dwr::IndicatorField &coarse)
{
  const auto &m = u_h.mesh();
  if (&u_star_h.mesh() != &m || &coarse.mesh() != &m)
  {
    throw InvalidArgument("feature inputs must share one mesh");
  }
  if (u_h.space() != fem::Space::p1_vector || u_star_h.space() != fem::Space::p1_vector)
  {
    throw InvalidArgument("forward and adjoint solutions must be vector P1");
  }
  std::vector<FeatureVector> out(m.num_elements());
  for (int k = 0; k < m.num_elements(); ++k)
  {
    const auto g = mesh::element_geometry(m, k);
    const auto shape = shape_features(g.s, g.theta);
    auto &row = out[k];
    row[0] = coarse[k];
    row[1] = scenario.viscosity;
    row[2] = model::element_mean_drag(scenario, m, k);
    row[3] = model::element_mean_depth(scenario, m, k);
    row[4] = g.d;
    row[5] = shape[0];
    row[6] = shape[1];
    row[7] = g.boundary_length;
  }
  solution_block(u_h, out, 8);
  solution_block(u_star_h, out, 20);
  return out;
}

void preprocess(std::span<double> values)
{
  for (auto &x : values)
  {
    x = std::atan(x);
  }
}

FeatureVector preprocessed(FeatureVector f)
{
  preprocess(f);
  return f;
}

namespace
{

std::string header()
{
  std::string h = "scenario,iter";
  for (int i = 0; i < num_features; ++i)
  {
    h += i < 10 ? ",f0" : ",f";
    h += std::to_string(i);
  }
  return h + ",target";
}

}  // namespace

void write_dataset(std::ostream &out, const Dataset &data)
{
  out << header() << '\n';
  for (const auto &r : data.rows)
  {
    out << r.scenario << ',' << r.iteration;
    for (double x : r.features)
    {
      out << ',' << io::format_double(x);
    }
    out << ',' << io::format_double(r.target) << '\n';
  }
}

Dataset read_dataset(std::istream &in)
{
  Dataset data;
  std::string text;
  int line = 0;
  if (!std::getline(in, text))
  {
    throw ParseError("missing dataset header", 1);
  }
  ++line;
  if (!text.empty() && text.back() == '\r')
  {
    text.pop_back();
  }
  if (text != header())
  {
    throw ParseError("unexpected dataset header", line);
  }
  std::vector<std::string_view> cells;
  while (std::getline(in, text))
  {
    ++line;
    if (!text.empty() && text.back() == '\r')
    {
      text.pop_back();
    }
    if (text.empty())
    {
      continue;
    }
    cells.clear();
    std::size_t start = 0;
    while (true)
    {
      const auto comma = text.find(',', start);
      cells.emplace_back(text.data() + start,
                         (comma == std::string::npos ? text.size() : comma) - start);
      if (comma == std::string::npos)
      {
        break;
      }
      start = comma + 1;
    }
    if (cells.size() != num_features + 3)
    {
      throw ParseError("expected " + std::to_string(num_features + 3) + " columns", line);
    }
    auto parse = [&](std::string_view s, auto &value) {
      const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      {
        throw ParseError("malformed value '" + std::string(s) + "'", line);
      }
    };
    DatasetRow row{};
    parse(cells[0], row.scenario);
    parse(cells[1], row.iteration);
    for (int i = 0; i < num_features; ++i)
    {
      parse(cells[2 + i], row.features[i]);
    }
    parse(cells[num_features + 2], row.target);
    if (!std::isfinite(row.target))
    {
      throw ParseError("non-finite target", line);
    }
    data.rows.push_back(row);
  }
  return data;
}

void save_dataset(const std::string &path, const Dataset &data)
{
  std::ofstream out(path);
  if (!out)
  {
    throw InvalidArgument("cannot write dataset '" + path + "'");
  }
  write_dataset(out, data);
}

Dataset load_dataset(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw InvalidArgument("cannot open dataset '" + path + "'");
  }
  return read_dataset(in);
}

}  // namespace e2n::features

#include <charconv>
#include <fstream>
#include <sstream>

#include "e2n/errors.hpp"
#include "e2n/model.hpp"
#include "text_io.hpp"

namespace e2n::model
{

namespace
{

std::string trim(const std::string &s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
  {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Scenario read_scenario(std::istream &in)
{
  Scenario s;
  s.turbines.clear();
  std::string section;
  std::string text;
  int line = 0;
  auto number = [&](const std::string &v) {
    double x = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    {
      throw ParseError("malformed number '" + v + "'", line);
    }
    return x;
  };

  while (std::getline(in, text))
  {
    ++line;
    if (const auto hash = text.find('#'); hash != std::string::npos)
    {
      text.resize(hash);
    }
    text = trim(text);
    if (text.empty())
    {
      continue;
    }
    if (text.front() == '[')
    {
      if (text.back() != ']')
      {
        throw ParseError("unterminated section header", line);
      }
      section = trim(text.substr(1, text.size() - 2));
      if (section == "turbine")
      {
        s.turbines.emplace_back();
      }
      else if (section != "domain" && section != "physics")
      {
        throw ParseError("unknown section [" + section + "]", line);
      }
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos || section.empty())
    {
      throw ParseError("expected 'key = value' inside a section", line);
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));

    if (section == "domain")
    {
      if (key == "name")
        s.name = value;
      else if (key == "width")
        s.width = number(value);
      else if (key == "height")
        s.height = number(value);
      else if (key == "mesh_size")
        s.mesh_size = number(value);
      else
        throw ParseError("unknown [domain] key '" + key + "'", line);
    }
    else if (section == "physics")
    {
      if (key == "viscosity")
        s.viscosity = number(value);
      else if (key == "inflow_speed")
        s.inflow_speed = number(value);
      else if (key == "background_drag")
        s.background_drag = number(value);
      else if (key == "density")
        s.density = number(value);
      else if (key == "gravity")
        s.gravity = number(value);
      else if (key == "depth")
        s.bathymetry = Bathymetry::constant(number(value));
      else if (key == "trench")
      {
        std::istringstream parts(value);
        std::string base, amplitude, extra;
        if (!(parts >> base >> amplitude) || (parts >> extra))
        {
          throw ParseError("trench expects 'base amplitude'", line);
        }
        s.bathymetry = Bathymetry::trench(number(base), number(amplitude));
      }
      else
        throw ParseError("unknown [physics] key '" + key + "'", line);
    }
    else
    {
      auto &t = s.turbines.back();
      if (key == "x")
        t.center.x() = number(value);
      else if (key == "y")
        t.center.y() = number(value);
      else if (key == "diameter")
        t.diameter = number(value);
      else if (key == "thrust_coefficient")
        t.thrust_coefficient = number(value);
      else
        throw ParseError("unknown [turbine] key '" + key + "'", line);
    }
  }
  validate(s);
  return s;
}

void write_scenario(std::ostream &out, const Scenario &s)
{
  using io::format_double;
  out << "[domain]\n"
      << "name = " << s.name << "\n"
      << "width = " << format_double(s.width) << "\n"
      << "height = " << format_double(s.height) << "\n"
      << "mesh_size = " << format_double(s.mesh_size) << "\n\n"
      << "[physics]\n"
      << "viscosity = " << format_double(s.viscosity) << "\n"
      << "inflow_speed = " << format_double(s.inflow_speed) << "\n"
      << "background_drag = " << format_double(s.background_drag) << "\n"
      << "density = " << format_double(s.density) << "\n"
      << "gravity = " << format_double(s.gravity) << "\n";
  if (s.bathymetry.profile == Bathymetry::Profile::constant)
  {
    out << "depth = " << format_double(s.bathymetry.depth) << "\n";
  }
  else
  {
    out << "trench = " << format_double(s.bathymetry.trench_base) << " "
        << format_double(s.bathymetry.trench_amplitude) << "\n";
  }
  for (const auto &t : s.turbines)
  {
    out << "\n[turbine]\n"
        << "x = " << format_double(t.center.x()) << "\n"
        << "y = " << format_double(t.center.y()) << "\n"
        << "diameter = " << format_double(t.diameter) << "\n"
        << "thrust_coefficient = " << format_double(t.thrust_coefficient) << "\n";
  }
}

Scenario load_scenario(const std::string &path)
{
  std::ifstream in(path);
  if (!in)
  {
    throw InvalidArgument("cannot open scenario file '" + path + "'");
  }
  return read_scenario(in);
}

void save_scenario(const std::string &path, const Scenario &scenario)
{
  std::ofstream out(path);
  if (!out)
  {
    throw InvalidArgument("cannot write scenario file '" + path + "'");
  }
  write_scenario(out, scenario);
}

}  // namespace e2n::model

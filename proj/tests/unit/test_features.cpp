#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "e2n/dwr.hpp"
#include "e2n/errors.hpp"
#include "e2n/features.hpp"
#include "e2n/model.hpp"
#include "helpers.hpp"

using namespace e2n;
using mesh::Point;

TEST_SUITE("features")
{
  TEST_CASE("schema")
  {
    const auto &names = features::feature_names();
    CHECK(names.size() == 32);
    std::set<std::string_view> unique(names.begin(), names.end());
    CHECK(unique.size() == names.size());
    CHECK(names[0] == "coarse_dwr");
  }

  TEST_CASE("shape features")
  {
    for (double theta : {0.0, 0.3, 1.2, 2.5})
    {
      const auto iso = features::shape_features(1.0, theta);
      CHECK(iso[0] == doctest::Approx(1.0));
      CHECK(iso[1] == doctest::Approx(0.0).epsilon(1e-14));
    }
    const auto a = features::shape_features(4.0, 0.0);
    CHECK(a[0] == doctest::Approx(0.25));
    CHECK(a[1] == doctest::Approx(0.0));
    const auto b = features::shape_features(4.0, std::numbers::pi / 2.0);
    CHECK(b[0] == doctest::Approx(4.0));
    const auto c = features::shape_features(2.0, std::numbers::pi / 4.0);
    CHECK(c[0] == doctest::Approx(1.25));
    CHECK(c[1] == doctest::Approx(0.75));
  }

  TEST_CASE("preprocessing")
  {
    features::FeatureVector f{};
    f[0] = 1.0;
    f[1] = -1e9;
    const auto p = features::preprocessed(f);
    CHECK(p[0] == doctest::Approx(std::numbers::pi / 4.0));
    CHECK(p[1] == doctest::Approx(-std::numbers::pi / 2.0));
    CHECK(p[2] == 0.0);
  }

  TEST_CASE("extracted features")
  {
    const auto s = testing::small_scenario(15.0);
    const model::FlowProblem problem(s, model::initial_mesh(s));
    const auto u = model::solve_forward(problem).solution;
    const auto z = model::adjoint_solve(problem, u);
    const auto coarse = dwr::coarse_indicator(problem, u, z);
    const auto f = features::extract_features(s, u, z, coarse);
    const auto &m = problem.mesh();
    REQUIRE(f.size() == static_cast<std::size_t>(m.num_elements()));
    bool some_boundary = false;
    for (int k = 0; k < m.num_elements(); ++k)
    {
      const auto &row = f[k];
      const auto &t = m.triangle(k);
      for (double x : row)
        CHECK(std::isfinite(x));
      CHECK(row[0] == coarse[k]);
      CHECK(row[1] == s.viscosity);
      CHECK(row[2] >= s.background_drag);
      CHECK(row[3] == doctest::Approx(s.bathymetry.depth));
      CHECK(row[4] == doctest::Approx(mesh::element_geometry(m, k).d));
      CHECK(row[7] == doctest::Approx(m.boundary_length(k)));
      some_boundary = some_boundary || row[7] > 0.0;
      CHECK(row[8] == doctest::Approx((u[2 * t[0]] + u[2 * t[1]] + u[2 * t[2]]) / 3.0));
      CHECK(row[14] == doctest::Approx((u[2 * t[0] + 1] + u[2 * t[1] + 1] + u[2 * t[2] + 1]) / 3.0));
      CHECK(row[20] == doctest::Approx((z[2 * t[0]] + z[2 * t[1]] + z[2 * t[2]]) / 3.0));
    }
    CHECK(some_boundary);
    CHECK_THROWS_AS(features::extract_features(
                      s, u, fem::Field::zeros(testing::unit_square(2), fem::Space::p1_vector),
                      coarse),
                    InvalidArgument);
  }

  TEST_CASE("turbine elements see the turbine drag")
  {
    const auto s = testing::small_scenario(6.0);
    const auto m = model::initial_mesh(s);
    double inside = 0.0;
    for (int k = 0; k < m->num_elements(); ++k)
    {
      if (s.turbines[0].contains(m->centroid(k)))
        inside = std::max(inside, model::element_mean_drag(s, *m, k));
    }
    CHECK(inside > s.background_drag + 0.5 * s.turbines[0].turbine_drag());
  }

  TEST_CASE("dataset round trip")
  {
    features::Dataset d;
    for (int i = 0; i < 5; ++i)
    {
      features::DatasetRow r{i % 2, i, {}, 0.1 * i - 1e-17};
      for (int j = 0; j < features::num_features; ++j)
        r.features[j] = std::pow(-1.3, j) * (i + 1) / 7.0;
      d.rows.push_back(r);
    }
    std::stringstream ss;
    features::write_dataset(ss, d);
    const std::string text = ss.str();
    CHECK(text.rfind("scenario,iter,f00,f01,", 0) == 0);
    CHECK(text.find(",f31,target\n") != std::string::npos);
    const auto back = features::read_dataset(ss);
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
    {
      CHECK(back.rows[i].scenario == d.rows[i].scenario);
      CHECK(back.rows[i].iteration == d.rows[i].iteration);
      CHECK(back.rows[i].features == d.rows[i].features);
      CHECK(back.rows[i].target == d.rows[i].target);
    }
  }

  TEST_CASE("malformed datasets")
  {
    std::stringstream empty("");
    CHECK_THROWS_AS(features::read_dataset(empty), ParseError);
    std::stringstream header("a,b,c\n");
    CHECK_THROWS_AS(features::read_dataset(header), ParseError);

    features::Dataset d;
    d.rows.push_back({0, 0, {}, 1.0});
    std::stringstream ok;
    features::write_dataset(ok, d);
    std::string text = ok.str();
    std::stringstream short_row(text.substr(0, text.rfind(',')) + "\n");
    CHECK_THROWS_AS(features::read_dataset(short_row), ParseError);
    std::stringstream nan_target(text.substr(0, text.rfind(',')) + ",nan\n");
    CHECK_THROWS_AS(features::read_dataset(nan_target), ParseError);
    CHECK_THROWS_AS(features::load_dataset("/nonexistent/data.csv"), InvalidArgument);
  }
}

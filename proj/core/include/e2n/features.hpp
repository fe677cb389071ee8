#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "e2n/dwr.hpp"
#include "e2n/field.hpp"
#include "e2n/model.hpp"

namespace e2n::features
{

inline constexpr int num_features = 32;

/// Per-element network input. Column order (versioned):
///   0 coarse DWR indicator, 1 viscosity, 2 element-mean drag coefficient,
///   3 element-mean depth, 4 size d, 5 (1/s)cos^2(theta) + s sin^2(theta),
///   6 (s - 1/s) sin(theta) cos(theta), 7 boundary length,
///   8-13 forward u: value, d/dx, d/dy, d2/dx2, d2/dxdy (symmetrised), d2/dy2,
///   14-19 the same for forward v, 20-31 the same for the adjoint components.
using FeatureVector = std::array<double, num_features>;

/// Short descriptive name of every column, in schema order.
const std::array<std::string_view, num_features> &feature_names();

/// Shape features (f5, f6) from the aspect ratio and orientation.
std::array<double, 2> shape_features(double s, double theta);

std::vector<FeatureVector> extract_features(const model::Scenario &scenario,
                                            const fem::Field &u_h, const fem::Field &u_star_h,
                                            const dwr::IndicatorField &coarse);

/// Element-wise arctangent.
void preprocess(std::span<double> values);
FeatureVector preprocessed(FeatureVector f);

struct DatasetRow
{
  int scenario;
  int iteration;
  FeatureVector features;
  double target;
};

struct Dataset
{
  std::vector<DatasetRow> rows;

  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};

/// CSV with header `scenario,iter,f00,...,f31,target`.
void write_dataset(std::ostream &out, const Dataset &data);
Dataset read_dataset(std::istream &in);
void save_dataset(const std::string &path, const Dataset &data);
Dataset load_dataset(const std::string &path);

}  // namespace e2n::features

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "e2n/dwr.hpp"
#include "e2n/features.hpp"
#include "e2n/model.hpp"

namespace e2n::net
{

struct Dims
{
  int input = features::num_features;
  int hidden = 64;
  int output = 1;

  bool operator==(const Dims &) const = default;
};

/// Map between indicator values and network outputs.
/// log_magnitude trains on log(|E_K| + floor) and so predicts unsigned indicators.
enum class TargetTransform
{
  none,
  arctan,
  log_magnitude
};

inline constexpr double log_target_floor = 1e-12;

std::string_view to_string(TargetTransform t);
TargetTransform parse_target_transform(std::string_view name);

double forward_transform(TargetTransform t, double indicator);
/// Inverse of forward_transform, kept finite for outputs outside its range.
double inverse_transform(TargetTransform t, double output);

/// Single-hidden-layer perceptron: y = W2 sigmoid(W1 x + b1) + b2.
/// Parameters are stored flat in the order W1 (hidden x input, row-major), b1, W2
/// (output x hidden, row-major), b2.
class Mlp
{
public:
  explicit Mlp(Dims dims = {}, TargetTransform targets = TargetTransform::log_magnitude);

  const Dims &dims() const { return dims_; }
  TargetTransform targets() const { return targets_; }
  void set_targets(TargetTransform t) { targets_ = t; }

  std::size_t num_parameters() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  double &w1(int h, int i) { return params_[static_cast<std::size_t>(h) * dims_.input + i]; }
  double &b1(int h) { return params_[offset_b1() + h]; }
  double &w2(int o, int h) { return params_[offset_w2() + static_cast<std::size_t>(o) * dims_.hidden + h]; }
  double &b2(int o) { return params_[offset_b2() + o]; }

  std::size_t offset_b1() const { return static_cast<std::size_t>(dims_.hidden) * dims_.input; }
  std::size_t offset_w2() const { return offset_b1() + dims_.hidden; }
  std::size_t offset_b2() const { return offset_w2() + static_cast<std::size_t>(dims_.output) * dims_.hidden; }

  /// Outputs for a row-major batch of inputs (rows x input); returns rows x output values.
  std::vector<double> forward(std::span<const double> batch) const;

private:
  Dims dims_;
  TargetTransform targets_;
  std::vector<double> params_;
};

/// Xavier-uniform weights, zero biases.
Mlp init(std::uint64_t seed, Dims dims = {},
         TargetTransform targets = TargetTransform::log_magnitude);

struct LossGradient
{
  double loss;
  std::vector<double> gradient;
};

/// Mean-square error over the batch and its exact gradient.
LossGradient gradient(const Mlp &mlp, std::span<const double> batch,
                      std::span<const double> targets);
double mse(const Mlp &mlp, std::span<const double> batch, std::span<const double> targets);

struct AdamState
{
  explicit AdamState(std::size_t n, double beta1 = 0.9, double beta2 = 0.999,
                     double epsilon = 1e-8);

  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double beta1;
  double beta2;
  double epsilon;
};

void adam_step(AdamState &state, std::span<double> params, std::span<const double> grads,
               double lr);

struct TrainConfig
{
  double learning_rate = 1e-3;
  int epochs = 2000;
  int batch_size = 500;
  double train_fraction = 0.7;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  TargetTransform targets = TargetTransform::log_magnitude;
  int hidden = 64;
};

struct TrainResult
{
  Mlp model;
  /// Entry 0 is the untrained network; entry e is after epoch e.
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
};

TrainResult train(const features::Dataset &data, const TrainConfig &config);

/// Network inputs (arctangent of the features) and training targets for dataset rows.
std::vector<double> input_matrix(const features::Dataset &data, std::span<const std::size_t> rows);
std::vector<double> target_vector(const features::Dataset &data, std::span<const std::size_t> rows,
                                  TargetTransform targets);

/// Predicted indicator values (targets transformed back) for raw feature rows.
std::vector<double> predict(const Mlp &mlp, std::span<const features::FeatureVector> rows);

/// Drop-in replacement for the enriched indicator: coarse indicator, features, network.
dwr::IndicatorField predict_indicator(const Mlp &mlp, const model::FlowProblem &problem,
                                      const fem::Field &u_h, const fem::Field &u_star_h);

/// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> a, std::span<const double> b);

void save(std::ostream &out, const Mlp &mlp);
Mlp load(std::istream &in, const Dims &expected = {});
void save(const std::string &path, const Mlp &mlp);
Mlp load(const std::string &path, const Dims &expected = {});

}  // namespace e2n::net

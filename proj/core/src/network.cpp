#include "e2n/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <Eigen/Core>

#include "e2n/errors.hpp"
#include "text_io.hpp"

namespace e2n::net
{

namespace
{

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using Map = Eigen::Map<RowMatrix>;

struct Layers
{
  ConstMap w1;
  Eigen::Map<const Eigen::RowVectorXd> b1;
  ConstMap w2;
  Eigen::Map<const Eigen::RowVectorXd> b2;
};

Layers layers(const Mlp &mlp)
{
  const auto &d = mlp.dims();
  const double *p = mlp.parameters().data();
  return {ConstMap(p, d.hidden, d.input), Eigen::Map<const Eigen::RowVectorXd>(p + mlp.offset_b1(), d.hidden),
          ConstMap(p + mlp.offset_w2(), d.output, d.hidden),
          Eigen::Map<const Eigen::RowVectorXd>(p + mlp.offset_b2(), d.output)};
}

Eigen::Index batch_rows(const Mlp &mlp, std::span<const double> batch)
{
  const auto in = static_cast<std::size_t>(mlp.dims().input);
  if (batch.size() % in != 0)
  {
    throw InvalidArgument("input width must be " + std::to_string(in));
  }
  return static_cast<Eigen::Index>(batch.size() / in);
}

RowMatrix hidden_activation(const Layers &l, const ConstMap &x)
{
  RowMatrix z = x * l.w1.transpose();
  z.rowwise() += l.b1;
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

}  // namespace

std::string_view to_string(TargetTransform t)
{
  switch (t)
  {
    case TargetTransform::none:
      return "none";
    case TargetTransform::arctan:
      return "arctan";
    case TargetTransform::log_magnitude:
      return "log_magnitude";
  }
  return "unknown";
}

TargetTransform parse_target_transform(std::string_view name)
{
  for (auto t : {TargetTransform::none, TargetTransform::arctan, TargetTransform::log_magnitude})
  {
    if (name == to_string(t))
    {
      return t;
    }
  }
  throw InvalidArgument("unknown target transform '" + std::string(name) + "'");
}

double forward_transform(TargetTransform t, double indicator)
{
  switch (t)
  {
    case TargetTransform::arctan:
      return std::atan(indicator);
    case TargetTransform::log_magnitude:
      return std::log(std::abs(indicator) + log_target_floor);
    case TargetTransform::none:
      break;
  }
  return indicator;
}

double inverse_transform(TargetTransform t, double output)
{
  switch (t)
  {
    case TargetTransform::arctan:
    {
      const double limit = std::nextafter(0.5 * 3.14159265358979323846, 0.0);
      return std::tan(std::clamp(output, -limit, limit));
    }
    case TargetTransform::log_magnitude:
      return std::max(std::exp(std::min(output, 700.0)) - log_target_floor, 0.0);
    case TargetTransform::none:
      break;
  }
  return output;
}

Mlp::Mlp(Dims dims, TargetTransform targets) : dims_(dims), targets_(targets)
{
  if (dims_.input <= 0 || dims_.hidden <= 0 || dims_.output <= 0)
  {
    throw InvalidArgument("network dimensions must be positive");
  }
  params_.assign(offset_b2() + dims_.output, 0.0);
}

std::vector<double> Mlp::forward(std::span<const double> batch) const
{
  const Eigen::Index n = batch_rows(*this, batch);
  const Layers l = layers(*this);
  const ConstMap x(batch.data(), n, dims_.input);
  RowMatrix out = hidden_activation(l, x) * l.w2.transpose();
  out.rowwise() += l.b2;
  return std::vector<double>(out.data(), out.data() + out.size());
}

Mlp init(std::uint64_t seed, Dims dims, TargetTransform targets)
{
  Mlp mlp(dims, targets);
  std::mt19937_64 rng(seed);
  const double a1 = std::sqrt(6.0 / (dims.input + dims.hidden));
  const double a2 = std::sqrt(6.0 / (dims.hidden + dims.output));
  std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
  auto p = mlp.parameters();
  for (std::size_t i = 0; i < mlp.offset_b1(); ++i)
  {
    p[i] = u1(rng);
  }
  for (std::size_t i = mlp.offset_w2(); i < mlp.offset_b2(); ++i)
  {
    p[i] = u2(rng);
  }
  return mlp;
}

LossGradient gradient(const Mlp &mlp, std::span<const double> batch,
                      std::span<const double> targets)
{
  const auto &d = mlp.dims();
  const Eigen::Index n = batch_rows(mlp, batch);
  if (targets.size() != static_cast<std::size_t>(n * d.output) || n == 0)
  {
    throw InvalidArgument("targets do not match the batch");
  }
  const Layers l = layers(mlp);
  const ConstMap x(batch.data(), n, d.input);
  const ConstMap t(targets.data(), n, d.output);

  const RowMatrix a = hidden_activation(l, x);
  RowMatrix r = a * l.w2.transpose();
  r.rowwise() += l.b2;
  r -= t;

  LossGradient out;
  out.loss = r.squaredNorm() / static_cast<double>(n);
  out.gradient.assign(mlp.num_parameters(), 0.0);
  double *g = out.gradient.data();

  const RowMatrix dy = (2.0 / static_cast<double>(n)) * r;
  Map(g + mlp.offset_w2(), d.output, d.hidden) = dy.transpose() * a;
  Eigen::Map<Eigen::RowVectorXd>(g + mlp.offset_b2(), d.output) = dy.colwise().sum();
  const RowMatrix delta = ((dy * l.w2).array() * a.array() * (1.0 - a.array())).matrix();
  Map(g, d.hidden, d.input) = delta.transpose() * x;
  Eigen::Map<Eigen::RowVectorXd>(g + mlp.offset_b1(), d.hidden) = delta.colwise().sum();
  return out;
}

double mse(const Mlp &mlp, std::span<const double> batch, std::span<const double> targets)
{
  const auto in = static_cast<std::size_t>(mlp.dims().input);
  const auto outputs = static_cast<std::size_t>(mlp.dims().output);
  const auto rows = static_cast<std::size_t>(batch_rows(mlp, batch));
  if (rows * outputs != targets.size() || rows == 0)
  {
    throw InvalidArgument("targets do not match the batch");
  }
  // Blocked so whole-dataset evaluations do not allocate a rows x hidden matrix.
  constexpr std::size_t block = 2048;
  double s = 0.0;
  for (std::size_t start = 0; start < rows; start += block)
  {
    const std::size_t n = std::min(block, rows - start);
    const auto out = mlp.forward(batch.subspan(start * in, n * in));
    for (std::size_t i = 0; i < out.size(); ++i)
    {
      const double r = out[i] - targets[start * outputs + i];
      s += r * r;
    }
  }
  return s / static_cast<double>(rows);
}

AdamState::AdamState(std::size_t n, double b1, double b2, double eps)
  : m(n, 0.0), v(n, 0.0), beta1(b1), beta2(b2), epsilon(eps)
{
}

void adam_step(AdamState &s, std::span<double> params, std::span<const double> grads, double lr)
{
  if (params.size() != s.m.size() || grads.size() != s.m.size())
  {
    throw InvalidArgument("Adam state, parameters and gradients differ in size");
  }
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i)
  {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + s.epsilon);
  }
}

std::vector<double> input_matrix(const features::Dataset &data, std::span<const std::size_t> rows)
{
  std::vector<double> x;
  x.reserve(rows.size() * features::num_features);
  for (auto r : rows)
  {
    const auto f = features::preprocessed(data.rows[r].features);
    x.insert(x.end(), f.begin(), f.end());
  }
  return x;
}

std::vector<double> target_vector(const features::Dataset &data, std::span<const std::size_t> rows,
                                  TargetTransform targets)
{
  std::vector<double> t;
  t.reserve(rows.size());
  for (auto r : rows)
  {
    t.push_back(forward_transform(targets, data.rows[r].target));
  }
  return t;
}

TrainResult train(const features::Dataset &data, const TrainConfig &cfg)
{
  if (data.empty())
  {
    throw InvalidArgument("cannot train on an empty dataset");
  }
  if (!(cfg.learning_rate > 0.0) || cfg.epochs < 0 || cfg.batch_size <= 0 ||
      !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
  {
    throw InvalidArgument("invalid training configuration");
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * data.size()));
  n_train = std::clamp<std::size_t>(n_train, 1, std::max<std::size_t>(1, data.size() - 1));

  TrainResult result{init(rng(), Dims{features::num_features, cfg.hidden, 1}, cfg.targets),
                     {}, {}, {}, {}};
  result.train_rows.assign(order.begin(), order.begin() + n_train);
  result.validation_rows.assign(order.begin() + n_train, order.end());

  const int in = features::num_features;
  const auto x_train = input_matrix(data, result.train_rows);
  const auto t_train = target_vector(data, result.train_rows, cfg.targets);
  const auto x_val = input_matrix(data, result.validation_rows);
  const auto t_val = target_vector(data, result.validation_rows, cfg.targets);

  auto record = [&] {
    result.train_loss.push_back(mse(result.model, x_train, t_train));
    result.validation_loss.push_back(
      x_val.empty() ? 0.0 : mse(result.model, x_val, t_val));
  };
  record();

  AdamState adam(result.model.num_parameters(), cfg.beta1, cfg.beta2, cfg.epsilon);
  std::vector<std::size_t> perm(n_train);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<double> xb, tb;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch)
  {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t start = 0; start < n_train; start += cfg.batch_size)
    {
      const std::size_t end = std::min(n_train, start + cfg.batch_size);
      xb.resize((end - start) * in);
      tb.resize(end - start);
      for (std::size_t i = start; i < end; ++i)
      {
        std::copy_n(x_train.begin() + static_cast<std::ptrdiff_t>(perm[i] * in), in,
                    xb.begin() + static_cast<std::ptrdiff_t>((i - start) * in));
        tb[i - start] = t_train[perm[i]];
      }
      const auto g = gradient(result.model, xb, tb);
      adam_step(adam, result.model.parameters(), g.gradient, cfg.learning_rate);
    }
    record();
  }
  return result;
}

std::vector<double> predict(const Mlp &mlp, std::span<const features::FeatureVector> rows)
{
  if (mlp.dims().input != features::num_features || mlp.dims().output != 1)
  {
    throw DimensionMismatch("network does not map feature vectors to scalars");
  }
  std::vector<double> x;
  x.reserve(rows.size() * features::num_features);
  for (const auto &r : rows)
  {
    const auto f = features::preprocessed(r);
    x.insert(x.end(), f.begin(), f.end());
  }
  auto y = mlp.forward(x);
  for (auto &v : y)
  {
    v = inverse_transform(mlp.targets(), v);
  }
  return y;
}

dwr::IndicatorField predict_indicator(const Mlp &mlp, const model::FlowProblem &problem,
                                      const fem::Field &u_h, const fem::Field &u_star_h)
{
  const auto coarse = dwr::coarse_indicator(problem, u_h, u_star_h);
  const auto rows = features::extract_features(problem.scenario(), u_h, u_star_h, coarse);
  return dwr::IndicatorField(fem::Field(problem.mesh_ptr(), fem::Space::p0, predict(mlp, rows)));
}

namespace
{

std::vector<double> ranks(std::span<const double> v)
{
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < idx.size())
  {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]])
    {
      ++j;
    }
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
    {
      r[idx[k]] = avg;
    }
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b)
{
  if (a.size() != b.size() || a.size() < 2)
  {
    throw InvalidArgument("rank correlation needs two equally long samples");
  }
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = 0.5 * (n + 1.0);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i)
  {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0)
  {
    throw InvalidArgument("rank correlation of a constant sample is undefined");
  }
  return sab / std::sqrt(saa * sbb);
}

void save(std::ostream &out, const Mlp &mlp)
{
  const auto &d = mlp.dims();
  const auto p = mlp.parameters();
  auto row = [&](std::size_t offset, int n) {
    for (int i = 0; i < n; ++i)
    {
      out << (i ? " " : "") << io::format_double(p[offset + i]);
    }
    out << '\n';
  };
  out << "E2NNET 1\n"
      << "dims " << d.input << ' ' << d.hidden << ' ' << d.output << '\n'
      << "targets " << to_string(mlp.targets()) << '\n';
  out << "W1 " << d.hidden << ' ' << d.input << '\n';
  for (int h = 0; h < d.hidden; ++h)
  {
    row(static_cast<std::size_t>(h) * d.input, d.input);
  }
  out << "b1 " << d.hidden << '\n';
  row(mlp.offset_b1(), d.hidden);
  out << "W2 " << d.output << ' ' << d.hidden << '\n';
  for (int o = 0; o < d.output; ++o)
  {
    row(mlp.offset_w2() + static_cast<std::size_t>(o) * d.hidden, d.hidden);
  }
  out << "b2 " << d.output << '\n';
  row(mlp.offset_b2(), d.output);
}

Mlp load(std::istream &in, const Dims &expected)
{
  io::LineReader r(in);
  r.expect_header("E2NNET", 1);
  auto t = r.tokens();
  if (t.size() != 4 || t[0] != "dims")
  {
    throw ParseError("expected 'dims <input> <hidden> <output>'", r.line());
  }
  const Dims dims{r.to_int(t[1]), r.to_int(t[2]), r.to_int(t[3])};
  if (!(dims == expected))
  {
    throw DimensionMismatch("checkpoint dims " + t[1] + " " + t[2] + " " + t[3] +
                            " do not match the configured network");
  }
  t = r.tokens();
  TargetTransform targets = TargetTransform::none;
  if (t.size() == 2 && t[0] == "arctan_targets" && (t[1] == "0" || t[1] == "1"))
  {
    // Older checkpoints only carried an arctan flag.
    targets = t[1] == "1" ? TargetTransform::arctan : TargetTransform::none;
  }
  else if (t.size() == 2 && t[0] == "targets")
  {
    try
    {
      targets = parse_target_transform(t[1]);
    }
    catch (const InvalidArgument &e)
    {
      throw ParseError(e.what(), r.line());
    }
  }
  else
  {
    throw ParseError("expected 'targets <transform>'", r.line());
  }
  Mlp mlp(dims, targets);
  auto p = mlp.parameters();
  auto block = [&](const char *name, std::size_t offset, int rows, int cols, bool matrix) {
    const auto h = r.tokens();
    const std::size_t want = matrix ? 3 : 2;
    if (h.size() != want || h[0] != name || r.to_int(h[1]) != rows ||
        (matrix && r.to_int(h[2]) != cols))
    {
      throw ParseError(std::string("expected block header '") + name + "'", r.line());
    }
    const int lines = matrix ? rows : 1;
    const int width = matrix ? cols : rows;
    for (int i = 0; i < lines; ++i)
    {
      const auto v = r.read_doubles(width);
      std::copy(v.begin(), v.end(), p.begin() + static_cast<std::ptrdiff_t>(offset + static_cast<std::size_t>(i) * width));
    }
  };
  block("W1", 0, dims.hidden, dims.input, true);
  block("b1", mlp.offset_b1(), dims.hidden, 1, false);
  block("W2", mlp.offset_w2(), dims.output, dims.hidden, true);
  block("b2", mlp.offset_b2(), dims.output, 1, false);
  for (double x : p)
  {
    if (!std::isfinite(x))
    {
      throw ParseError("non-finite network parameter", r.line());
    }
  }
  return mlp;
}

void save(const std::string &path, const Mlp &mlp)
{
  std::ofstream out(path);
  if (!out)
  {
    throw InvalidArgument("cannot write checkpoint '" + path + "'");
  }
  save(out, mlp);
}

Mlp load(const std::string &path, const Dims &expected)
{
  std::ifstream in(path);
  if (!in)
  {
    throw InvalidArgument("cannot open checkpoint '" + path + "'");
  }
  return load(in, expected);
}

}  // namespace e2n::net

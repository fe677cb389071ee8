#pragma once

// Forward-mode dual numbers with a fixed number of directional derivatives. Used to obtain
// exact element Jacobians from templated residual kernels.

#include <array>
#include <cmath>

namespace e2n::ad
{

template <int N>
struct Dual
{
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit by design, constants promote

  static Dual variable(double value, int i)
  {
    Dual x(value);
    x.d[i] = 1.0;
    return x;
  }

  Dual &operator+=(const Dual &o)
  {
    v += o.v;
    for (int i = 0; i < N; ++i)
    {
      d[i] += o.d[i];
    }
    return *this;
  }
  Dual &operator-=(const Dual &o)
  {
    v -= o.v;
    for (int i = 0; i < N; ++i)
    {
      d[i] -= o.d[i];
    }
    return *this;
  }
  Dual &operator*=(const Dual &o)
  {
    for (int i = 0; i < N; ++i)
    {
      d[i] = d[i] * o.v + v * o.d[i];
    }
    v *= o.v;
    return *this;
  }
  Dual &operator*=(double s)
  {
    v *= s;
    for (auto &x : d)
    {
      x *= s;
    }
    return *this;
  }
  Dual &operator/=(const Dual &o)
  {
    const double inv = 1.0 / o.v;
    const double q = v * inv;
    for (int i = 0; i < N; ++i)
    {
      d[i] = (d[i] - q * o.d[i]) * inv;
    }
    v = q;
    return *this;
  }
};

template <int N>
Dual<N> operator-(Dual<N> a)
{
  a *= -1.0;
  return a;
}
template <int N>
Dual<N> operator+(Dual<N> a, const Dual<N> &b)
{
  return a += b;
}
template <int N>
Dual<N> operator-(Dual<N> a, const Dual<N> &b)
{
  return a -= b;
}
template <int N>
Dual<N> operator*(Dual<N> a, const Dual<N> &b)
{
  return a *= b;
}
template <int N>
Dual<N> operator/(Dual<N> a, const Dual<N> &b)
{
  return a /= b;
}
template <int N>
Dual<N> operator+(Dual<N> a, double b)
{
  a.v += b;
  return a;
}
template <int N>
Dual<N> operator+(double a, Dual<N> b)
{
  b.v += a;
  return b;
}
template <int N>
Dual<N> operator-(Dual<N> a, double b)
{
  a.v -= b;
  return a;
}
template <int N>
Dual<N> operator-(double a, const Dual<N> &b)
{
  return Dual<N>(a) - b;
}
template <int N>
Dual<N> operator*(Dual<N> a, double b)
{
  return a *= b;
}
template <int N>
Dual<N> operator*(double a, Dual<N> b)
{
  return b *= a;
}
template <int N>
Dual<N> operator/(Dual<N> a, double b)
{
  return a *= 1.0 / b;
}
template <int N>
Dual<N> operator/(double a, const Dual<N> &b)
{
  return Dual<N>(a) / b;
}

template <int N>
bool operator<(const Dual<N> &a, const Dual<N> &b)
{
  return a.v < b.v;
}
template <int N>
bool operator<(const Dual<N> &a, double b)
{
  return a.v < b;
}
template <int N>
bool operator<(double a, const Dual<N> &b)
{
  return a < b.v;
}

template <int N>
Dual<N> sqrt(const Dual<N> &a)
{
  Dual<N> r(std::sqrt(a.v));
  const double g = a.v > 0.0 ? 0.5 / r.v : 0.0;
  for (int i = 0; i < N; ++i)
  {
    r.d[i] = g * a.d[i];
  }
  return r;
}

inline double value(double x) { return x; }
template <int N>
double value(const Dual<N> &x)
{
  return x.v;
}

}  // namespace e2n::ad

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <type_traits>

namespace persistify {

/// Forward-mode scalar carrying a value and one directional derivative.
/// Nesting (Dual<Dual<double>>, ...) yields exact higher-order directional
/// derivatives, which is what the cascade builder uses to differentiate
/// user-supplied callables without analytic derivatives.
template <class T>
struct Dual {
  T v{};  // value
  T d{};  // derivative along the seeded direction

  Dual() = default;
  Dual(const T& value) : v(value) {}
  Dual(const T& value, const T& deriv) : v(value), d(deriv) {}

  template <class U,
            std::enable_if_t<std::is_arithmetic_v<U> && !std::is_same_v<U, T>, int> = 0>
  Dual(U value) : v(static_cast<T>(static_cast<double>(value))) {}

  Dual& operator+=(const Dual& o) { v += o.v; d += o.d; return *this; }
  Dual& operator-=(const Dual& o) { v -= o.v; d -= o.d; return *this; }
  Dual& operator*=(const Dual& o) { d = d * o.v + v * o.d; v = v * o.v; return *this; }
  Dual& operator/=(const Dual& o) { d = (d * o.v - v * o.d) / (o.v * o.v); v = v / o.v; return *this; }
};

// value of the innermost scalar
inline double scalar_value(double x) { return x; }
template <class T>
double scalar_value(const Dual<T>& x) { return scalar_value(x.v); }

template <class T> Dual<T> operator+(Dual<T> a, const Dual<T>& b) { return a += b; }
template <class T> Dual<T> operator-(Dual<T> a, const Dual<T>& b) { return a -= b; }
template <class T> Dual<T> operator*(Dual<T> a, const Dual<T>& b) { return a *= b; }
template <class T> Dual<T> operator/(Dual<T> a, const Dual<T>& b) { return a /= b; }
template <class T> Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }
template <class T> Dual<T> operator+(const Dual<T>& a) { return a; }

template <class T> Dual<T> operator+(const Dual<T>& a, double b) { return {a.v + T(b), a.d}; }
template <class T> Dual<T> operator+(double a, const Dual<T>& b) { return {T(a) + b.v, b.d}; }
template <class T> Dual<T> operator-(const Dual<T>& a, double b) { return {a.v - T(b), a.d}; }
template <class T> Dual<T> operator-(double a, const Dual<T>& b) { return {T(a) - b.v, -b.d}; }
template <class T> Dual<T> operator*(const Dual<T>& a, double b) { return {a.v * T(b), a.d * T(b)}; }
template <class T> Dual<T> operator*(double a, const Dual<T>& b) { return {T(a) * b.v, T(a) * b.d}; }
template <class T> Dual<T> operator/(const Dual<T>& a, double b) { return {a.v / T(b), a.d / T(b)}; }
template <class T> Dual<T> operator/(double a, const Dual<T>& b) {
  return Dual<T>(T(a)) / b;
}

template <class T> bool operator<(const Dual<T>& a, const Dual<T>& b) { return scalar_value(a) < scalar_value(b); }
template <class T> bool operator>(const Dual<T>& a, const Dual<T>& b) { return scalar_value(a) > scalar_value(b); }
template <class T> bool operator<=(const Dual<T>& a, const Dual<T>& b) { return scalar_value(a) <= scalar_value(b); }
template <class T> bool operator>=(const Dual<T>& a, const Dual<T>& b) { return scalar_value(a) >= scalar_value(b); }
template <class T> bool operator<(const Dual<T>& a, double b) { return scalar_value(a) < b; }
template <class T> bool operator>(const Dual<T>& a, double b) { return scalar_value(a) > b; }
template <class T> bool operator<=(const Dual<T>& a, double b) { return scalar_value(a) <= b; }
template <class T> bool operator>=(const Dual<T>& a, double b) { return scalar_value(a) >= b; }
template <class T> bool operator<(double a, const Dual<T>& b) { return a < scalar_value(b); }
template <class T> bool operator>(double a, const Dual<T>& b) { return a > scalar_value(b); }

template <class T> Dual<T> exp(const Dual<T>& x) {
  using std::exp;
  const T e = exp(x.v);
  return {e, x.d * e};
}

template <class T> Dual<T> log(const Dual<T>& x) {
  using std::log;
  return {log(x.v), x.d / x.v};
}

template <class T> Dual<T> sin(const Dual<T>& x) {
  using std::sin;
  using std::cos;
  return {sin(x.v), x.d * cos(x.v)};
}

template <class T> Dual<T> cos(const Dual<T>& x) {
  using std::sin;
  using std::cos;
  return {cos(x.v), -x.d * sin(x.v)};
}

template <class T> Dual<T> sqrt(const Dual<T>& x) {
  using std::sqrt;
  const T r = sqrt(x.v);
  return {r, x.d / (2.0 * r)};
}

template <class T> Dual<T> abs(const Dual<T>& x) {
  return scalar_value(x) < 0.0 ? -x : x;
}

}  // namespace persistify

namespace Eigen {

template <class T>
struct NumTraits<persistify::Dual<T>> : NumTraits<double> {
  using Real = persistify::Dual<T>;
  using NonInteger = persistify::Dual<T>;
  using Literal = persistify::Dual<T>;
  using Nested = persistify::Dual<T>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 2,
    MulCost = 4
  };
};

}  // namespace Eigen

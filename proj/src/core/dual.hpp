#pragma once

// Forward-mode dual numbers. The converter equations are templated on the
// scalar type; evaluating them with Dual and a unit seed on one input yields
// the exact partial derivatives along that input.

#include <cmath>

namespace freqstab {

struct Dual {
  double v = 0.0;
  double d = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit on purpose
  constexpr Dual(double value, double deriv) : v(value), d(deriv) {}
};

constexpr Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
constexpr Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
constexpr Dual operator-(Dual a) { return {-a.v, -a.d}; }
constexpr Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
constexpr Dual operator/(Dual a, Dual b) {
  return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}
constexpr Dual operator+(Dual a, double b) { return {a.v + b, a.d}; }
constexpr Dual operator+(double a, Dual b) { return {a + b.v, b.d}; }
constexpr Dual operator-(Dual a, double b) { return {a.v - b, a.d}; }
constexpr Dual operator-(double a, Dual b) { return {a - b.v, -b.d}; }
constexpr Dual operator*(Dual a, double b) { return {a.v * b, a.d * b}; }
constexpr Dual operator*(double a, Dual b) { return {a * b.v, a * b.d}; }
constexpr Dual operator/(Dual a, double b) { return {a.v / b, a.d / b}; }
constexpr Dual operator/(double a, Dual b) { return {a / b.v, -a * b.d / (b.v * b.v)}; }

inline Dual sin(Dual a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
inline Dual cos(Dual a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }

inline double value_of(double x) { return x; }
inline double value_of(Dual x) { return x.v; }

}  // namespace freqstab

// Second-order truncated-Taylor scalar. A Dual2 carries (val, d1, d2) along
// one seeded input direction; pushing a point through a computation with one
// coordinate seeded yields the value, first and pure second derivative with
// respect to that coordinate. Mixed partials are out of scope: every operator
// in the PDE suite needs only u, first partials and Laplacian terms, so a
// Laplacian costs one seeded pass per coordinate.
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace gapinn {

struct Dual2 {
  double val = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;

  constexpr Dual2() = default;
  constexpr Dual2(double v) : val(v) {}  // constant lift (c, 0, 0)
  constexpr Dual2(double v, double first, double second) : val(v), d1(first), d2(second) {}

  // Lift of the coordinate being differentiated: (x, 1, 0).
  static constexpr Dual2 seeded(double x) { return Dual2(x, 1.0, 0.0); }
};

constexpr Dual2 operator-(const Dual2& a) { return {-a.val, -a.d1, -a.d2}; }

constexpr Dual2 operator+(const Dual2& a, const Dual2& b) {
  return {a.val + b.val, a.d1 + b.d1, a.d2 + b.d2};
}

constexpr Dual2 operator-(const Dual2& a, const Dual2& b) {
  return {a.val - b.val, a.d1 - b.d1, a.d2 - b.d2};
}

// Truncated Taylor product: (a·b)'' = a''b + 2a'b' + ab''.
constexpr Dual2 operator*(const Dual2& a, const Dual2& b) {
  return {a.val * b.val,
          a.d1 * b.val + a.val * b.d1,
          a.d2 * b.val + 2.0 * a.d1 * b.d1 + a.val * b.d2};
}

constexpr Dual2 operator/(const Dual2& a, const Dual2& b) {
  double v = a.val / b.val;
  double d1 = (a.d1 - v * b.d1) / b.val;
  double d2 = (a.d2 - v * b.d2 - 2.0 * d1 * b.d1) / b.val;
  return {v, d1, d2};
}

inline Dual2& operator+=(Dual2& a, const Dual2& b) { return a = a + b; }
inline Dual2& operator-=(Dual2& a, const Dual2& b) { return a = a - b; }
inline Dual2& operator*=(Dual2& a, const Dual2& b) { return a = a * b; }
inline Dual2& operator/=(Dual2& a, const Dual2& b) { return a = a / b; }

inline Dual2 tanh(const Dual2& a) {
  double t = std::tanh(a.val);
  double s = 1.0 - t * t;
  return {t, a.d1 * s, a.d2 * s - 2.0 * t * s * a.d1 * a.d1};
}

inline Dual2 sin(const Dual2& a) {
  double sv = std::sin(a.val);
  double cv = std::cos(a.val);
  return {sv, a.d1 * cv, a.d2 * cv - a.d1 * a.d1 * sv};
}

inline Dual2 cos(const Dual2& a) {
  double sv = std::sin(a.val);
  double cv = std::cos(a.val);
  return {cv, -a.d1 * sv, -a.d2 * sv - a.d1 * a.d1 * cv};
}

inline Dual2 exp(const Dual2& a) {
  double e = std::exp(a.val);
  return {e, a.d1 * e, (a.d2 + a.d1 * a.d1) * e};
}

inline Dual2 sqrt(const Dual2& a) {
  double s = std::sqrt(a.val);
  double d1 = a.d1 / (2.0 * s);
  return {s, d1, a.d2 / (2.0 * s) - d1 * d1 / s};
}

constexpr Dual2 square(const Dual2& a) {
  return {a.val * a.val, 2.0 * a.val * a.d1, 2.0 * a.val * a.d2 + 2.0 * a.d1 * a.d1};
}

// c0 + c1·x with real coefficients.
constexpr Dual2 affine(double c0, double c1, const Dual2& x) {
  return {c0 + c1 * x.val, c1 * x.d1, c1 * x.d2};
}

// Lifts a point with coordinate j seeded and all others constant.
inline std::vector<Dual2> lift_seeded(std::span<const double> x, int j) {
  if (j < 0 || std::size_t(j) >= x.size()) {
    throw std::invalid_argument("lift_seeded: coordinate index out of range");
  }
  std::vector<Dual2> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = (int(i) == j) ? Dual2::seeded(x[i]) : Dual2(x[i]);
  }
  return out;
}

}  // namespace gapinn

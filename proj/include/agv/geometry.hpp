#pragma once

#include <cmath>

namespace agv {

// Planar vector in the global frame (meters, or m/s for velocities).
struct Vec2 {
  double x{0.0};
  double y{0.0};

  constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend constexpr Vec2 operator*(double s, const Vec2& v) { return {s * v.x, s * v.y}; }
  friend constexpr Vec2 operator*(const Vec2& v, double s) { return {s * v.x, s * v.y}; }
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }
inline double distance(const Vec2& a, const Vec2& b) { return norm(a - b); }

// Unit vector from `from` towards `to`; zero when the points coincide.
inline Vec2 direction(const Vec2& from, const Vec2& to) {
  const Vec2 d = to - from;
  const double n = norm(d);
  if (n == 0.0) return {};
  return {d.x / n, d.y / n};
}

inline bool finite(const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); }

}  // namespace agv

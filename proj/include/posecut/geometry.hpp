#pragma once

#include <cmath>

namespace posecut {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }

  friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
  friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
  friend constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
  friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }
inline double distance(const Vec2& a, const Vec2& b) { return norm(b - a); }
constexpr double squared_distance(const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  return dot(d, d);
}

// Vectors shorter than this have no usable direction.
inline constexpr double kDegenerateNorm = 1e-9;

// Unsigned angle between two vectors in [0, pi]; 0 when either is degenerate.
inline double absolute_angle(const Vec2& a, const Vec2& b) {
  if (norm(a) < kDegenerateNorm || norm(b) < kDegenerateNorm) return 0.0;
  return std::atan2(std::abs(cross(a, b)), dot(a, b));
}

}  // namespace posecut

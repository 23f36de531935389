#pragma once

#include <cmath>
#include <stdexcept>

namespace sar {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Unit quaternion, scalar-first.
struct Quat {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quat normalized() const {
    const double n = norm();
    if (n <= 0.0) throw std::invalid_argument("cannot normalize zero quaternion");
    return {w / n, x / n, y / n, z / n};
  }

  Quat operator*(const Quat& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
  }
};

inline double dot(const Quat& a, const Quat& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

// Rotates v by the unit quaternion q.
inline Vec3 rotate(const Quat& q, const Vec3& v) {
  const Vec3 u{q.x, q.y, q.z};
  const Vec3 t = cross(u, v) * 2.0;
  return v + t * q.w + cross(u, t);
}

// Per-joint rotation stored as angle-times-axis, the model's native space.
struct Rotation {
  Vec3 axis_angle;
};

// Zero vector maps to the identity quaternion; tiny angles go through a
// series expansion of sin(t/2)/t to avoid the 0/0.
inline Quat axis_angle_to_quaternion(const Rotation& r) {
  const Vec3& v = r.axis_angle;
  if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z))
    throw std::invalid_argument("axis_angle_to_quaternion: non-finite input");
  const double theta = v.norm();
  double s;  // sin(theta/2) / theta
  if (theta < 1e-8) {
    s = 0.5 - theta * theta / 48.0;
  } else {
    s = std::sin(0.5 * theta) / theta;
  }
  return Quat{std::cos(0.5 * theta), v.x * s, v.y * s, v.z * s};
}

// Inverse conversion; result angle lies in [0, pi].
inline Rotation quaternion_to_axis_angle(const Quat& q_in) {
  Quat q = q_in.normalized();
  if (q.w < 0.0) {  // canonical hemisphere, angle <= pi
    q = {-q.w, -q.x, -q.y, -q.z};
  }
  const double s = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
  double factor;  // theta / sin(theta/2)
  if (s < 1e-8) {
    factor = 2.0 / q.w;  // theta -> 0 limit
  } else {
    factor = 2.0 * std::atan2(s, q.w) / s;
  }
  return Rotation{{q.x * factor, q.y * factor, q.z * factor}};
}

// Angle of the relative rotation between two unit quaternions, in [0, pi].
// Computed from chord lengths; acos of the dot loses ~1e-8 near zero angle.
inline double geodesic_angle(const Quat& a, const Quat& b) {
  const double s = dot(a, b) < 0.0 ? -1.0 : 1.0;
  const Quat diff{a.w - s * b.w, a.x - s * b.x, a.y - s * b.y, a.z - s * b.z};
  const Quat sum{a.w + s * b.w, a.x + s * b.x, a.y + s * b.y, a.z + s * b.z};
  return 4.0 * std::atan2(diff.norm(), sum.norm());
}

// Shortest-arc spherical interpolation with constant angular velocity in u.
// Near-parallel inputs fall back to normalized lerp.
inline Quat slerp(const Quat& q0, Quat q1, double u) {
  double d = dot(q0, q1);
  if (d < 0.0) {
    q1 = {-q1.w, -q1.x, -q1.y, -q1.z};
    d = -d;
  }
  if (d >= 1.0 - 1e-8) {
    const Quat lerped{q0.w + (q1.w - q0.w) * u, q0.x + (q1.x - q0.x) * u,
                      q0.y + (q1.y - q0.y) * u, q0.z + (q1.z - q0.z) * u};
    return lerped.normalized();
  }
  const double omega = std::acos(d);
  const double so = std::sin(omega);
  const double a = std::sin((1.0 - u) * omega) / so;
  const double b = std::sin(u * omega) / so;
  return {a * q0.w + b * q1.w, a * q0.x + b * q1.x, a * q0.y + b * q1.y, a * q0.z + b * q1.z};
}

}  // namespace sar

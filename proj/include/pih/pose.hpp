#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

namespace pih {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;

// wrap to (-pi, pi]
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

// 6-DOF pose: position in meters plus fixed-axis XYZ Euler angles,
// R = Rz(rz) * Ry(ry) * Rx(rx). Angles live in (-pi, pi].
struct Pose6 {
  Vec3 position{Vec3::Zero()};
  Vec3 rotation{Vec3::Zero()};

  Vec6 vec() const {
    Vec6 v;
    v << position, rotation;
    return v;
  }

  static Pose6 from_vec(const Vec6& v) {
    Pose6 p;
    p.position = v.head<3>();
    p.rotation = v.tail<3>();
    return p;
  }

  Pose6 normalized() const {
    Pose6 p = *this;
    for (int i = 0; i < 3; ++i) p.rotation[i] = wrap_angle(p.rotation[i]);
    return p;
  }

  Mat3 rotation_matrix() const {
    const double ca = std::cos(rotation[0]), sa = std::sin(rotation[0]);
    const double cb = std::cos(rotation[1]), sb = std::sin(rotation[1]);
    const double cc = std::cos(rotation[2]), sc = std::sin(rotation[2]);
    Mat3 r;
    r << cc * cb, cc * sb * sa - sc * ca, cc * sb * ca + sc * sa,
         sc * cb, sc * sb * sa + cc * ca, sc * sb * ca - cc * sa,
         -sb,     cb * sa,                cb * ca;
    return r;
  }

  Vec3 apply(const Vec3& p) const { return rotation_matrix() * p + position; }

  static Vec3 euler_from_matrix(const Mat3& r) {
    const double sb = -r(2, 0);
    const double b = std::asin(std::clamp(sb, -1.0, 1.0));
    double a, c;
    if (std::abs(sb) < 1.0 - 1e-12) {
      a = std::atan2(r(2, 1), r(2, 2));
      c = std::atan2(r(1, 0), r(0, 0));
    } else {
      // gimbal lock: split arbitrarily, a = 0
      a = 0.0;
      c = std::atan2(-r(0, 1), r(1, 1));
    }
    return Vec3(a, b, c);
  }

  static Pose6 from_matrix(const Mat3& r, const Vec3& t) {
    Pose6 p;
    p.position = t;
    p.rotation = euler_from_matrix(r);
    return p;
  }
};

// Maps fixed-axis XYZ Euler rates to a world angular velocity:
// omega = E(r) * rdot, columns [Rz*Ry*ex, Rz*ey, ez].
inline Mat3 euler_rate_map(const Vec3& r) {
  const double cb = std::cos(r[1]), sb = std::sin(r[1]);
  const double cc = std::cos(r[2]), sc = std::sin(r[2]);
  Mat3 e;
  e.col(0) = Vec3(cc * cb, sc * cb, -sb);
  e.col(1) = Vec3(-sc, cc, 0.0);
  e.col(2) = Vec3(0.0, 0.0, 1.0);
  return e;
}

// componentwise difference with rotation components wrapped to (-pi, pi]
inline Vec6 pose_delta(const Pose6& to, const Pose6& from) {
  Vec6 d;
  d.head<3>() = to.position - from.position;
  for (int i = 0; i < 3; ++i) d[3 + i] = wrap_angle(to.rotation[i] - from.rotation[i]);
  return d;
}

}  // namespace pih

#pragma once

#include "handfk/skeleton.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace handfk {

/// 4x4 homogeneous transform; the bottom row of a rigid transform is (0,0,0,1).
using Transform4 = Eigen::Matrix4d;

inline Transform4 rotation(Axis axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Transform4 m = Transform4::Identity();
  switch (axis) {
    case Axis::x:
      m(1, 1) = c;
      m(1, 2) = -s;
      m(2, 1) = s;
      m(2, 2) = c;
      break;
    case Axis::y:
      m(0, 0) = c;
      m(0, 2) = s;
      m(2, 0) = -s;
      m(2, 2) = c;
      break;
    case Axis::z:
      m(0, 0) = c;
      m(0, 1) = -s;
      m(1, 0) = s;
      m(1, 1) = c;
      break;
  }
  return m;
}

/// Elementwise derivative of rotation(axis, angle) with respect to the angle.
/// The result is not a rigid transform: its bottom row and the unaffected
/// axis are zero.
inline Transform4 rotation_derivative(Axis axis, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Transform4 m = Transform4::Zero();
  switch (axis) {
    case Axis::x:
      m(1, 1) = -s;
      m(1, 2) = -c;
      m(2, 1) = c;
      m(2, 2) = -s;
      break;
    case Axis::y:
      m(0, 0) = -s;
      m(0, 2) = c;
      m(2, 0) = -c;
      m(2, 2) = -s;
      break;
    case Axis::z:
      m(0, 0) = -s;
      m(0, 1) = -c;
      m(1, 0) = c;
      m(1, 1) = -s;
      break;
  }
  return m;
}

inline int axis_index(Axis axis) {
  return static_cast<int>(axis);
}

inline Transform4 translation(Axis axis, double distance) {
  Transform4 m = Transform4::Identity();
  m(axis_index(axis), 3) = distance;
  return m;
}

/// Derivative of translation(axis, k * d) with respect to k, i.e. only the
/// translation entry survives, equal to d.
inline Transform4 translation_derivative(Axis axis, double d) {
  Transform4 m = Transform4::Zero();
  m(axis_index(axis), 3) = d;
  return m;
}

inline Transform4 rigid_inverse(const Transform4& t) {
  Transform4 inv = Transform4::Identity();
  inv.topLeftCorner<3, 3>() = t.topLeftCorner<3, 3>().transpose();
  inv.topRightCorner<3, 1>() = -inv.topLeftCorner<3, 3>() * t.topRightCorner<3, 1>();
  return inv;
}

} // namespace handfk

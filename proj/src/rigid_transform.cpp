#include "absf/rigid_transform.hpp"

#include "absf/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace absf {

RigidTransform::RigidTransform(const Eigen::Matrix3d& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {}

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle_rad,
                                               const Vec3& translation) {
  const Eigen::AngleAxisd aa(angle_rad, axis.normalized());
  return {aa.toRotationMatrix(), translation};
}

RigidTransform RigidTransform::from_euler_deg(const Vec3& zyx_deg, const Vec3& translation) {
  constexpr double k = std::numbers::pi / 180.0;
  const Eigen::Matrix3d R = (Eigen::AngleAxisd(zyx_deg.x() * k, Vec3::UnitZ()) *
                             Eigen::AngleAxisd(zyx_deg.y() * k, Vec3::UnitY()) *
                             Eigen::AngleAxisd(zyx_deg.z() * k, Vec3::UnitX()))
                                .toRotationMatrix();
  return {R, translation};
}

Polyline RigidTransform::apply(std::span<const Vec3> points) const {
  Polyline out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(apply(p));
  return out;
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Matrix3d Rt = rotation_.transpose();
  return {Rt, -(Rt * translation_)};
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  return {rotation_ * other.rotation_, rotation_ * other.translation_ + translation_};
}

double RigidTransform::rotation_angle_deg(const Eigen::Matrix3d& R) {
  const Vec3 w(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  return std::atan2(0.5 * w.norm(), 0.5 * (R.trace() - 1.0)) * 180.0 / std::numbers::pi;
}

void RigidTransform::validate() const {
  if (!rotation_.allFinite() || !translation_.allFinite()) {
    throw InvalidArgument("rigid transform has non-finite entries");
  }
  if (std::abs(rotation_.determinant() - 1.0) > 1e-9) {
    throw InvalidArgument("rotation determinant is not +1");
  }
  if (((rotation_.transpose() * rotation_) - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() >
      1e-9) {
    throw InvalidArgument("rotation is not orthonormal");
  }
}

}  // namespace absf

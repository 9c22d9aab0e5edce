#pragma once

#include "absf/geometry.hpp"

#include <Eigen/Core>

#include <span>

namespace absf {

// Proper rigid motion x -> R x + t.
class RigidTransform {
 public:
  RigidTransform() = default;
  RigidTransform(const Eigen::Matrix3d& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle_rad,
                                        const Vec3& translation);
  // Intrinsic z-y-x Euler angles in degrees.
  static RigidTransform from_euler_deg(const Vec3& zyx_deg, const Vec3& translation);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& p) const { return rotation_ * p + translation_; }
  Vec3 apply_direction(const Vec3& v) const { return rotation_ * v; }
  Polyline apply(std::span<const Vec3> points) const;

  RigidTransform inverse() const;
  // (a * b)(x) = a(b(x))
  RigidTransform operator*(const RigidTransform& other) const;

  // Angle of the relative rotation between two transforms, in degrees.
  static double rotation_angle_deg(const Eigen::Matrix3d& R);

  // Throws InvalidArgument unless det(R) = +1 and R^T R = I within 1e-9.
  void validate() const;

 private:
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  Vec3 translation_ = Vec3::Zero();
};

}  // namespace absf

#include "absf/geometry.hpp"

#include "absf/error.hpp"
#include "absf/rigid_transform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace absf {

namespace {

constexpr double kUnitTol = 1e-9;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

void check_step(double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw InvalidArgument("sample step must be positive, got " + std::to_string(step));
  }
}

}  // namespace

std::string to_string(TrajectoryKind kind) {
  return kind == TrajectoryKind::Straight ? "Straight" : "Curved";
}

TrajectoryKind trajectory_kind_from_string(const std::string& s) {
  if (s == "Straight" || s == "straight") return TrajectoryKind::Straight;
  if (s == "Curved" || s == "curved") return TrajectoryKind::Curved;
  throw InvalidArgument("unknown trajectory kind '" + s + "'");
}

double axial_heading_deg(const Vec3& d) { return rad2deg(std::atan2(d.x(), d.y())); }

EntryPose EntryPose::axial(const Vec3& position, double alpha_deg, double bend_sign) {
  const double a = deg2rad(alpha_deg);
  EntryPose pose;
  pose.position = position;
  pose.direction = Vec3(std::sin(a), std::cos(a), 0.0);
  const double s = bend_sign >= 0.0 ? 1.0 : -1.0;
  pose.bend_normal = s * Vec3(std::cos(a), -std::sin(a), 0.0);
  pose.alpha_deg = alpha_deg;
  return pose;
}

void EntryPose::validate() const {
  if (!position.allFinite() || !direction.allFinite() || !bend_normal.allFinite()) {
    throw InvalidPose("entry pose has non-finite components");
  }
  if (std::abs(direction.norm() - 1.0) > kUnitTol) {
    throw InvalidPose("entry direction is not a unit vector");
  }
  if (std::abs(bend_normal.norm() - 1.0) > kUnitTol) {
    throw InvalidPose("bend normal is not a unit vector");
  }
  if (std::abs(direction.dot(bend_normal)) > kUnitTol) {
    throw InvalidPose("bend normal is not orthogonal to the entry direction");
  }
}

EntryPose EntryPose::transformed(const RigidTransform& T) const {
  EntryPose out;
  out.position = T.apply(position);
  out.direction = T.apply_direction(direction);
  out.bend_normal = T.apply_direction(bend_normal);
  out.alpha_deg = axial_heading_deg(out.direction);
  return out;
}

void SideParams::validate() const {
  if (!std::isfinite(l_ot) || l_ot < 0.0) {
    throw InvalidArgument("l_ot must be >= 0");
  }
  if (kind == TrajectoryKind::Straight) {
    if (l_it != 0.0) throw InvalidArgument("Straight side requires l_it = 0");
    return;
  }
  if (!std::isfinite(l_it) || !(l_it > 0.0)) {
    throw InvalidArgument("Curved side requires l_it > 0");
  }
  if (!std::isfinite(r) || !(r > 0.0)) {
    throw InvalidArgument("Curved side requires r > 0");
  }
  if (l_it / r > std::numbers::pi + 1e-12) {
    throw InvalidArgument("sweep angle l_it/r exceeds pi");
  }
}

void ToolSpec::validate() const {
  if (!(drill_diameter > 0.0) || !(niti_od > 0.0) || !(niti_wall > 0.0)) {
    throw InvalidArgument("tool dimensions must be positive");
  }
  if (!(drill_diameter > niti_od)) {
    throw InvalidArgument("drill diameter must exceed the NiTi tube OD");
  }
}

Vec3 point_at(const EntryPose& entry, const SideParams& p, double s) {
  const Vec3& t = entry.direction;
  if (p.kind == TrajectoryKind::Straight || s <= p.l_ot) {
    return entry.position + s * t;
  }
  const Vec3 bend_start = entry.position + p.l_ot * t;
  const double phi = (s - p.l_ot) / p.r;
  return bend_start + p.r * std::sin(phi) * t + p.r * (1.0 - std::cos(phi)) * entry.bend_normal;
}

Polyline sample_path(const EntryPose& entry, const SideParams& p, double step) {
  check_step(step);
  entry.validate();
  p.validate();

  Polyline out;
  out.push_back(entry.position);
  const auto straight_segments = static_cast<int>(std::ceil(p.l_ot / step));
  for (int i = 1; i <= straight_segments; ++i) {
    const double s = (i == straight_segments) ? p.l_ot : p.l_ot * i / straight_segments;
    out.push_back(entry.position + s * entry.direction);
  }
  if (p.kind == TrajectoryKind::Curved) {
    const auto arc_segments = static_cast<int>(std::ceil(p.l_it / step));
    for (int i = 1; i <= arc_segments; ++i) {
      const double u = (i == arc_segments) ? p.l_it : p.l_it * i / arc_segments;
      out.push_back(point_at(entry, p, p.l_ot + u));
    }
  }
  return out;
}

TipPose tip_pose(const EntryPose& entry, const SideParams& p) {
  entry.validate();
  p.validate();
  const Vec3& t = entry.direction;
  if (p.kind == TrajectoryKind::Straight) {
    return {entry.position + p.l_ot * t, t};
  }
  const Vec3& n = entry.bend_normal;
  const double phi = p.sweep();
  const Vec3 bend_start = entry.position + p.l_ot * t;
  TipPose tip;
  tip.position = bend_start + p.r * std::sin(phi) * t + p.r * (1.0 - std::cos(phi)) * n;
  tip.tangent = std::cos(phi) * t + std::sin(phi) * n;
  return tip;
}

double meeting_angle(const Vec3& a, const Vec3& b) {
  if (std::abs(a.norm() - 1.0) > kUnitTol || std::abs(b.norm() - 1.0) > kUnitTol) {
    throw InvalidArgument("meeting_angle requires unit tangents");
  }
  const double c = std::clamp(a.dot(b), -1.0, 1.0);
  return rad2deg(std::acos(c));
}

BridgeMetrics bridge_metrics(const TipPose& left_tip, const TipPose& right_tip) {
  BridgeMetrics m;
  m.tip_gap = (left_tip.position - right_tip.position).norm();
  m.meeting_point = 0.5 * (left_tip.position + right_tip.position);
  m.theta_deg = meeting_angle(left_tip.tangent, right_tip.tangent);
  return m;
}

BridgePlan make_plan(const BridgeSide& left, const BridgeSide& right, std::string frame) {
  BridgePlan plan;
  plan.left = left;
  plan.right = right;
  plan.frame = std::move(frame);
  const BridgeMetrics m =
      bridge_metrics(tip_pose(left.entry, left.params), tip_pose(right.entry, right.params));
  plan.meeting_point = m.meeting_point;
  plan.theta_deg = m.theta_deg;
  plan.tip_gap = m.tip_gap;
  return plan;
}

double polyline_length(const Polyline& line) {
  double len = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) len += (line[i] - line[i - 1]).norm();
  return len;
}

}  // namespace absf

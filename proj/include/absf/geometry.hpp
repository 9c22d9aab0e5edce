#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <string>
#include <vector>

namespace absf {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Polyline = std::vector<Vec3>;

class RigidTransform;

enum class TrajectoryKind { Straight, Curved };

std::string to_string(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_string(const std::string& s);

// Heading of a direction in the axial (x-y) plane, in degrees, measured from
// the anterior (+y) axis toward +x.
double axial_heading_deg(const Vec3& direction);

// Drill entry: where the straight segment starts, which way it points, and
// the side the inner tube bends toward.
struct EntryPose {
  Vec3 position = Vec3::Zero();
  Vec3 direction = Vec3::UnitY();
  Vec3 bend_normal = Vec3::UnitX();
  // Axial-plane insertion angle; kept in sync with `direction`.
  double alpha_deg = 0.0;

  // Pose whose direction lies in the axial plane at heading `alpha_deg`.
  // bend_sign = +1 bends toward +x of the local frame, -1 toward -x.
  static EntryPose axial(const Vec3& position, double alpha_deg, double bend_sign);

  // Throws InvalidPose unless direction/bend_normal are orthonormal within 1e-9.
  void validate() const;

  EntryPose transformed(const RigidTransform& T) const;
};

struct SideParams {
  TrajectoryKind kind = TrajectoryKind::Curved;
  double alpha_deg = 0.0;
  double l_ot = 0.0;  // straight insertion depth (mm)
  double l_it = 0.0;  // curved insertion arc length (mm), zero when Straight
  double r = 0.0;     // arc radius (mm), unused when Straight

  double sweep() const { return kind == TrajectoryKind::Curved ? l_it / r : 0.0; }
  double length() const { return l_ot + l_it; }

  // Throws InvalidArgument on negative lengths, a missing arc, or sweep > pi.
  void validate() const;
};

struct TipPose {
  Vec3 position = Vec3::Zero();
  Vec3 tangent = Vec3::UnitY();
};

struct ToolSpec {
  double drill_diameter = 4.73;
  double niti_od = 3.05;
  double niti_wall = 0.24;

  double drill_radius() const { return drill_diameter / 2.0; }
  void validate() const;
};

struct BridgeSide {
  EntryPose entry;
  SideParams params;
  int corridor = -1;       // index into VertebraModel::corridors, -1 if unassigned
  double slide_mm = 0.0;   // entry offset along the corridor axis
};

struct BridgePlan {
  BridgeSide left;
  BridgeSide right;
  Vec3 meeting_point = Vec3::Zero();
  double theta_deg = 0.0;
  double tip_gap = 0.0;
  std::string frame = "phantom";
};

struct BridgeMetrics {
  double tip_gap = 0.0;
  Vec3 meeting_point = Vec3::Zero();
  double theta_deg = 0.0;
};

// Point at arc-length `s` along the J-shape, s in [0, l_ot + l_it].
Vec3 point_at(const EntryPose& entry, const SideParams& p, double s);

// Polyline from the entry to the tip with spacing <= step. The bend start and
// the tip are always emitted exactly.
Polyline sample_path(const EntryPose& entry, const SideParams& p, double step);

TipPose tip_pose(const EntryPose& entry, const SideParams& p);

// Angle between two directed unit tangents, in [0, 180] degrees.
double meeting_angle(const Vec3& tangent_a, const Vec3& tangent_b);

BridgeMetrics bridge_metrics(const TipPose& left_tip, const TipPose& right_tip);

// Fills meeting_point, theta_deg and tip_gap from the two sides.
BridgePlan make_plan(const BridgeSide& left, const BridgeSide& right,
                     std::string frame = "phantom");

double polyline_length(const Polyline& line);

}  // namespace absf

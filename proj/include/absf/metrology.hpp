#pragma once

#include "absf/drillsim.hpp"
#include "absf/geometry.hpp"
#include "absf/rigid_transform.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace absf {

// Least-squares rigid motion mapping src[i] onto dst[i] (SVD, reflection
// corrected). Throws DegenerateGeometry for fewer than 3 or collinear points.
RigidTransform kabsch(std::span<const Vec3> src, std::span<const Vec3> dst);

struct IcpOptions {
  int max_iter = 100;
  double tol = 1e-10;  // stop once the rmse improves by no more than this
};

struct IcpResult {
  RigidTransform transform;
  double rmse = 0.0;
  int iterations = 0;
  std::vector<double> rmse_history;  // non-increasing
  std::vector<double> residuals;     // per source point, at the final transform
};

// Point-to-point ICP with nearest-neighbour correspondences; the returned
// transform maps `source` into the frame of `target`.
IcpResult icp_register(std::span<const Vec3> source, std::span<const Vec3> target,
                       const RigidTransform& init = RigidTransform::identity(),
                       const IcpOptions& opt = {});

// Same update, but correspondences are the closest points on the segments of
// each target polyline, so densely sampled curves do not trap the iteration
// at vertex-spacing offsets.
IcpResult icp_register_polylines(std::span<const Vec3> source, std::span<const Polyline> targets,
                                 const RigidTransform& init = RigidTransform::identity(),
                                 const IcpOptions& opt = {});

struct Line3 {
  Vec3 point = Vec3::Zero();
  Vec3 direction = Vec3::UnitX();

  double distance(const Vec3& p) const;
};

// Principal-axis line through the centroid.
Line3 fit_line(std::span<const Vec3> points);

struct Plane {
  Vec3 centroid = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 e1 = Vec3::UnitX();  // in-plane basis, e1 along the largest spread
  Vec3 e2 = Vec3::UnitY();
};

Plane fit_plane(std::span<const Vec3> points);

struct CircleFit {
  double r = 0.0;
  double rmse = 0.0;  // 3-D distance to the fitted circle
  Vec3 center = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  double span_deg = 0.0;
};

// Plane projection, algebraic (Kasa) circle, then geometric refinement.
// Throws IllConditionedFit for fewer than 5 points or less than 15 deg of arc.
CircleFit fit_radius(std::span<const Vec3> points);

// 100 |actual - ideal| / ideal. Throws InvalidArgument when ideal <= 0.
double radius_error(double ideal, double actual);

// One-decimal display value.
double round1(double value);

struct ChangeoverOptions {
  double tau_min = 0.3;     // mm
  double tau_sigmas = 2.0;  // tau = max(tau_min, tau_sigmas * noise estimate)
  int k = 5;
  int min_prefix = 10;
  int tail_guard = 12;      // keep at least this many samples for the arc fit
  int tail_exclude = 2;     // tip dwell samples left out of the arc fit
  int starts = 6;
};

struct ChangeoverResult {
  std::size_t index = 0;         // first sample of the curved part
  std::size_t coarse_index = 0;  // first of the k samples that left the threshold band
  double noise_sigma = 0.0;      // per-axis estimate from second differences
  double tau = 0.0;
};

// Per-axis noise estimate from second differences of consecutive samples.
double estimate_noise(std::span<const Vec3> points);

// Locates the straight-to-curved changeover in an insertion polyline.
// Throws NotFound when no sample leaves the straight prefix band.
ChangeoverResult detect_changeover(std::span<const Vec3> points,
                                   const ChangeoverOptions& opt = {});

std::size_t split_straight_curved(std::span<const Vec3> points,
                                  const ChangeoverOptions& opt = {});

struct MetrologyOptions {
  IcpOptions icp;
  ChangeoverOptions changeover;
  double target_step = 0.1;  // planned-path sampling for the registration target
  double init_axis_mm = 10.0;
};

struct RepeatResult {
  double icp_rmse = 0.0;
  std::optional<std::size_t> changeover_index;
  std::optional<double> fitted_r;
  std::optional<double> fit_rmse;
};

struct SideReport {
  Side side = Side::Left;
  TrajectoryKind kind = TrajectoryKind::Curved;
  RigidTransform transform;
  double icp_rmse = 0.0;
  std::optional<std::size_t> changeover_index;  // first repeat
  std::optional<double> fitted_r;               // mean over repeats
  std::optional<double> ideal_r;
  std::optional<double> radius_error_pct;
  std::vector<RepeatResult> repeats;
};

struct MetrologyReport {
  std::vector<SideReport> sides;
  double combined_rmse = 0.0;
  std::size_t registration_points = 0;
  std::string registration = "insertion samples of every trace vs planned path points";

  const SideReport* find(Side side) const;
};

// Registers all traces jointly onto the plan, then detects the changeover and
// fits the arc radius per repeat. Traces are in the tracker frame.
MetrologyReport evaluate_traces(const BridgePlan& plan, const std::vector<Trace>& traces,
                                const MetrologyOptions& opt = {});

}  // namespace absf

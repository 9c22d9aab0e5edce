#pragma once

#include "absf/geometry.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace absf {

// Pedicle entry corridor: a capsule around the segment entry -> entry + length*axis.
struct Capsule {
  std::string side;  // "left" or "right"
  Vec3 entry = Vec3::Zero();
  Vec3 axis = Vec3::UnitY();
  double radius = 4.0;
  double length = 20.0;

  // Position along the axis relative to the entry (unclamped).
  double axial(const Vec3& p) const { return (p - entry).dot(axis); }
  // Distance from the axis line.
  double radial(const Vec3& p) const;
  // Distance to the capsule's core segment.
  double segment_distance(const Vec3& p) const;
};

// Vertebral phantom: an axial cross-section extruded symmetrically about z = 0,
// plus the pedicle corridors.
struct VertebraModel {
  std::string name = "phantom";
  std::string frame = "phantom";
  std::vector<Vec2> axial_section;  // CCW, simple
  double height = 42.0;
  std::vector<Capsule> corridors;
  double scale = 1.5;

  // Throws InvalidModel for degenerate, self-intersecting or clockwise sections.
  void validate() const;

  // Signed distance to the section boundary in the axial plane, positive inside.
  double section_signed_distance(const Vec2& q) const;
  bool section_contains(const Vec2& q) const;
  Vec2 centroid() const;
  double area() const;

  // Largest inflate for which contains(p, inflate) would hold via the body, or
  // the capsule clearance, whichever is larger. contains(p, inflate) is
  // equivalent to containment_margin(p, inflate) >= 0.
  double containment_margin(const Vec3& p, double inflate) const;

  // Index of the corridor labelled `side`; throws InvalidModel if absent.
  int corridor_index(const std::string& side) const;

  VertebraModel scaled(double s) const;
  // Mirror image across the sagittal plane x = 0. Corridor side labels swap.
  VertebraModel mirrored() const;
};

bool contains(const VertebraModel& model, const Vec3& p, double inflate);

// Scalar BMD field on a regular grid. values are indexed x-fastest:
// index = ix + nx * (iy + ny * iz).
struct BmdGrid {
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  std::array<int, 3> dims = {2, 2, 2};
  std::vector<double> values;

  void validate() const;
  std::size_t index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(iy) + static_cast<std::size_t>(dims[1]) * iz);
  }
  double node(int ix, int iy, int iz) const { return values[index(ix, iy, iz)]; }
  Vec3 upper() const;
  bool in_hull(const Vec3& p) const;

  // New grid sampling f at every node.
  static BmdGrid from_function(const Vec3& origin, const Vec3& spacing,
                               const std::array<int, 3>& dims,
                               const std::function<double(const Vec3&)>& f);
};

struct BmdEllipsoid {
  Vec3 center = Vec3::Zero();
  Vec3 radii = Vec3::Ones();
  double value = 1.0;
};

struct BmdBlock {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
  double value = 0.0;
};

// Uniform base value, overridden inside ellipsoids, then inside blocks.
struct SyntheticBmd {
  double base = 0.2;
  std::vector<BmdEllipsoid> ellipsoids;
  std::vector<BmdBlock> blocks;

  double value_at(const Vec3& p) const;
};

// Trilinear interpolation; throws OutOfField outside the grid hull.
double bmd_at(const BmdGrid& grid, const Vec3& p);

struct BmdProfile {
  double min = 0.0;
  double mean = 0.0;
  std::vector<double> samples;

  // Fraction of samples strictly below `threshold`.
  double frac_below(double threshold) const;
};

// Samples the polyline with spacing <= step (each segment subdivided evenly).
BmdProfile path_bmd_profile(const BmdGrid& grid, const Polyline& polyline, double step);

}  // namespace absf

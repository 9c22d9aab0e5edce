#pragma once

#include "absf/geometry.hpp"
#include "absf/rigid_transform.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

namespace absf::test {

inline std::filesystem::path data(const std::string& rel) {
  return std::filesystem::path(ABSF_DATA_DIR) / rel;
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = {n(rng), n(rng), n(rng)};
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// Random rigid motion with rotation angle <= max_deg and |t| <= max_t.
inline RigidTransform random_motion(std::mt19937_64& rng, double max_deg, double max_t) {
  const double angle = uniform(rng, 0.0, max_deg) * std::numbers::pi / 180.0;
  return RigidTransform::from_axis_angle(random_unit(rng), angle,
                                         uniform(rng, 0.0, max_t) * random_unit(rng));
}

// Entry pose with a random direction and a random perpendicular bend normal.
inline EntryPose random_entry(std::mt19937_64& rng) {
  EntryPose e;
  e.position = {uniform(rng, -50, 50), uniform(rng, -50, 50), uniform(rng, -50, 50)};
  e.direction = random_unit(rng);
  Vec3 n = random_unit(rng);
  n -= n.dot(e.direction) * e.direction;
  while (n.norm() < 1e-3) {
    n = random_unit(rng);
    n -= n.dot(e.direction) * e.direction;
  }
  e.bend_normal = n.normalized();
  e.alpha_deg = axial_heading_deg(e.direction);
  return e;
}

// Points on an exact circular arc of radius r spanning `span_deg`.
inline Polyline exact_arc(const Vec3& center, const Vec3& u, const Vec3& v, double r,
                          double start_deg, double span_deg, int n) {
  Polyline out;
  for (int i = 0; i < n; ++i) {
    const double a = (start_deg + span_deg * i / (n - 1)) * std::numbers::pi / 180.0;
    out.push_back(center + r * (std::cos(a) * u + std::sin(a) * v));
  }
  return out;
}

}  // namespace absf::test

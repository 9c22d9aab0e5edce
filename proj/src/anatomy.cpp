#include "absf/anatomy.hpp"

#include "absf/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace absf {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross2(b - a, c - a);
  if (v > 0.0) return 1;
  if (v < 0.0) return -1;
  return 0;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const int o1 = orientation(p1, p2, q1);
  const int o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1);
  const int o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

}  // namespace

double Capsule::radial(const Vec3& p) const {
  const Vec3 v = p - entry;
  return (v - v.dot(axis) * axis).norm();
}

double Capsule::segment_distance(const Vec3& p) const {
  const double t = std::clamp(axial(p), 0.0, length);
  return (p - (entry + t * axis)).norm();
}

double VertebraModel::area() const {
  double a = 0.0;
  const std::size_t n = axial_section.size();
  for (std::size_t i = 0; i < n; ++i) {
    a += cross2(axial_section[i], axial_section[(i + 1) % n]);
  }
  return 0.5 * a;
}

void VertebraModel::validate() const {
  const std::size_t n = axial_section.size();
  if (n < 3) throw InvalidModel("axial section needs at least 3 vertices");
  for (const auto& v : axial_section) {
    if (!v.allFinite()) throw InvalidModel("axial section has non-finite vertices");
  }
  const double a = area();
  if (!(std::abs(a) > 1e-9)) throw InvalidModel("axial section has zero area");
  if (a < 0.0) throw InvalidModel("axial section must be counter-clockwise");
  for (std::size_t i = 0; i < n; ++i) {
    if ((axial_section[i] - axial_section[(i + 1) % n]).norm() == 0.0) {
      throw InvalidModel("axial section has repeated vertices");
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(axial_section[i], axial_section[(i + 1) % n], axial_section[j],
                             axial_section[(j + 1) % n])) {
        throw InvalidModel("axial section is self-intersecting");
      }
    }
  }
  if (!(height > 0.0)) throw InvalidModel("height must be positive");
  if (!(scale > 0.0)) throw InvalidModel("scale must be positive");
  for (const auto& c : corridors) {
    if (!(c.radius > 0.0) || !(c.length > 0.0)) {
      throw InvalidModel("corridor radius and length must be positive");
    }
    if (std::abs(c.axis.norm() - 1.0) > 1e-9) {
      throw InvalidModel("corridor axis must be a unit vector");
    }
  }
}

bool VertebraModel::section_contains(const Vec2& q) const {
  bool inside = false;
  const std::size_t n = axial_section.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = axial_section[i];
    const Vec2& b = axial_section[j];
    if ((a.y() > q.y()) != (b.y() > q.y())) {
      const double x = (b.x() - a.x()) * (q.y() - a.y()) / (b.y() - a.y()) + a.x();
      if (q.x() < x) inside = !inside;
    }
  }
  return inside;
}

double VertebraModel::section_signed_distance(const Vec2& q) const {
  double d = std::numeric_limits<double>::infinity();
  const std::size_t n = axial_section.size();
  for (std::size_t i = 0; i < n; ++i) {
    d = std::min(d, point_segment_distance(q, axial_section[i], axial_section[(i + 1) % n]));
  }
  return section_contains(q) ? d : -d;
}

Vec2 VertebraModel::centroid() const {
  const std::size_t n = axial_section.size();
  Vec2 c = Vec2::Zero();
  double a = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = axial_section[i];
    const Vec2& q = axial_section[(i + 1) % n];
    const double w = cross2(p, q);
    a += w;
    c += w * (p + q);
  }
  return c / (3.0 * a);
}

double VertebraModel::containment_margin(const Vec3& p, double inflate) const {
  const double body = std::min(section_signed_distance(p.head<2>()),
                               0.5 * height - std::abs(p.z())) -
                      inflate;
  double best = body;
  for (const auto& c : corridors) best = std::max(best, c.radius - c.segment_distance(p));
  return best;
}

int VertebraModel::corridor_index(const std::string& side) const {
  for (std::size_t i = 0; i < corridors.size(); ++i) {
    if (corridors[i].side == side) return static_cast<int>(i);
  }
  throw InvalidModel("model '" + name + "' has no corridor labelled '" + side + "'");
}

VertebraModel VertebraModel::scaled(double s) const {
  if (!(s > 0.0)) throw InvalidArgument("scale factor must be positive");
  VertebraModel out = *this;
  for (auto& v : out.axial_section) v *= s;
  out.height *= s;
  out.scale *= s;
  for (auto& c : out.corridors) {
    c.entry *= s;
    c.radius *= s;
    c.length *= s;
  }
  return out;
}

VertebraModel VertebraModel::mirrored() const {
  VertebraModel out = *this;
  out.axial_section.assign(axial_section.rbegin(), axial_section.rend());
  for (auto& v : out.axial_section) v.x() = -v.x();
  for (auto& c : out.corridors) {
    c.entry.x() = -c.entry.x();
    c.axis.x() = -c.axis.x();
    if (c.side == "left") {
      c.side = "right";
    } else if (c.side == "right") {
      c.side = "left";
    }
  }
  return out;
}

bool contains(const VertebraModel& model, const Vec3& p, double inflate) {
  if (!(inflate >= 0.0)) throw InvalidArgument("inflate must be >= 0");
  if (model.axial_section.size() < 3 || std::abs(model.area()) <= 1e-9) {
    throw InvalidModel("degenerate axial section");
  }
  return model.containment_margin(p, inflate) >= 0.0;
}

void BmdGrid::validate() const {
  for (int d : dims) {
    if (d < 2) throw InvalidModel("BMD grid needs at least 2 nodes per axis");
  }
  if (!(spacing.array() > 0.0).all()) throw InvalidModel("BMD grid spacing must be positive");
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (values.size() != n) {
    throw InvalidModel("BMD grid has " + std::to_string(values.size()) + " values, expected " +
                       std::to_string(n));
  }
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidModel("BMD values must be finite and >= 0");
  }
}

Vec3 BmdGrid::upper() const {
  return origin + Vec3((dims[0] - 1) * spacing.x(), (dims[1] - 1) * spacing.y(),
                       (dims[2] - 1) * spacing.z());
}

bool BmdGrid::in_hull(const Vec3& p) const {
  constexpr double tol = 1e-9;
  const Vec3 hi = upper();
  for (int k = 0; k < 3; ++k) {
    if (!(p[k] >= origin[k] - tol) || !(p[k] <= hi[k] + tol)) return false;
  }
  return true;
}

BmdGrid BmdGrid::from_function(const Vec3& origin, const Vec3& spacing,
                               const std::array<int, 3>& dims,
                               const std::function<double(const Vec3&)>& f) {
  BmdGrid g;
  g.origin = origin;
  g.spacing = spacing;
  g.dims = dims;
  g.values.resize(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  for (int iz = 0; iz < dims[2]; ++iz) {
    for (int iy = 0; iy < dims[1]; ++iy) {
      for (int ix = 0; ix < dims[0]; ++ix) {
        const Vec3 p = origin + Vec3(ix * spacing.x(), iy * spacing.y(), iz * spacing.z());
        g.values[g.index(ix, iy, iz)] = f(p);
      }
    }
  }
  return g;
}

double SyntheticBmd::value_at(const Vec3& p) const {
  double v = base;
  for (const auto& e : ellipsoids) {
    if ((p - e.center).cwiseQuotient(e.radii).squaredNorm() <= 1.0) v = e.value;
  }
  for (const auto& b : blocks) {
    if ((p.array() >= b.min.array()).all() && (p.array() <= b.max.array()).all()) v = b.value;
  }
  return v;
}

double bmd_at(const BmdGrid& grid, const Vec3& p) {
  if (!grid.in_hull(p)) throw OutOfField("point outside the BMD grid hull");
  std::array<int, 3> i0{};
  std::array<double, 3> f{};
  for (int k = 0; k < 3; ++k) {
    const double u = std::clamp((p[k] - grid.origin[k]) / grid.spacing[k], 0.0,
                                static_cast<double>(grid.dims[k] - 1));
    int c = static_cast<int>(std::floor(u));
    c = std::min(c, grid.dims[k] - 2);
    i0[k] = c;
    f[k] = u - c;
  }
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    const double wz = dz ? f[2] : 1.0 - f[2];
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? f[1] : 1.0 - f[1];
      for (int dx = 0; dx < 2; ++dx) {
        const double wx = dx ? f[0] : 1.0 - f[0];
        acc += wx * wy * wz * grid.node(i0[0] + dx, i0[1] + dy, i0[2] + dz);
      }
    }
  }
  return acc;
}

double BmdProfile::frac_below(double threshold) const {
  if (samples.empty()) return 0.0;
  const auto n = std::count_if(samples.begin(), samples.end(),
                               [threshold](double v) { return v < threshold; });
  return static_cast<double>(n) / static_cast<double>(samples.size());
}

BmdProfile path_bmd_profile(const BmdGrid& grid, const Polyline& polyline, double step) {
  if (!(step > 0.0)) throw InvalidArgument("profile step must be positive");
  if (polyline.empty()) throw InvalidArgument("empty polyline");
  BmdProfile prof;
  prof.samples.push_back(bmd_at(grid, polyline.front()));
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    const Vec3& a = polyline[i - 1];
    const Vec3& b = polyline[i];
    const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / step)));
    for (int k = 1; k <= n; ++k) {
      const double t = static_cast<double>(k) / n;
      prof.samples.push_back(bmd_at(grid, a + t * (b - a)));
    }
  }
  prof.min = *std::min_element(prof.samples.begin(), prof.samples.end());
  double sum = 0.0;
  for (double v : prof.samples) sum += v;
  prof.mean = sum / static_cast<double>(prof.samples.size());
  return prof;
}

}  // namespace absf

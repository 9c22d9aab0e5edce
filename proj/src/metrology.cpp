#include "absf/metrology.hpp"

#include "absf/error.hpp"

#include <Eigen/Dense>
#include <boost/geometry.hpp>
#include <boost/geometry/index/rtree.hpp>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numbers>
#include <set>

namespace absf {

namespace bg = boost::geometry;
namespace bgi = boost::geometry::index;

namespace {

using BPoint = bg::model::point<double, 3, bg::cs::cartesian>;
using Entry = std::pair<BPoint, std::size_t>;
using Tree = bgi::rtree<Entry, bgi::quadratic<16>>;

BPoint to_bpoint(const Vec3& p) { return BPoint(p.x(), p.y(), p.z()); }

Vec3 centroid(std::span<const Vec3> pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

Eigen::Matrix3d scatter(std::span<const Vec3> pts, const Vec3& c) {
  Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) S += (p - c) * (p - c).transpose();
  return S;
}

bool collinear(std::span<const Vec3> pts) {
  if (pts.size() < 3) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(scatter(pts, centroid(pts)));
  const Vec3 ev = es.eigenvalues();  // ascending
  return !(ev[2] > 0.0) || ev[1] <= 1e-12 * ev[2];
}

double rms(const std::vector<double>& d) {
  if (d.empty()) return 0.0;
  double acc = 0.0;
  for (double v : d) acc += v * v;
  return std::sqrt(acc / static_cast<double>(d.size()));
}

}  // namespace

RigidTransform kabsch(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) throw InvalidArgument("kabsch: point count mismatch");
  if (src.size() < 3) throw DegenerateGeometry("kabsch: need at least 3 points");
  if (collinear(src) || collinear(dst)) throw DegenerateGeometry("kabsch: collinear points");
  const Vec3 cs = centroid(src);
  const Vec3 cd = centroid(dst);
  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) H += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& U = svd.matrixU();
  const Eigen::Matrix3d& V = svd.matrixV();
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  D(2, 2) = (V * U.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Matrix3d R = V * D * U.transpose();
  return RigidTransform(R, cd - R * cs);
}

namespace {

template <typename Correspond>
IcpResult run_icp(std::span<const Vec3> source, const RigidTransform& init, const IcpOptions& opt,
                  Correspond&& closest) {
  if (opt.max_iter < 1) throw InvalidArgument("icp: max_iter must be >= 1");
  std::vector<Vec3> matched(source.size());
  std::vector<double> dist(source.size());
  auto correspond = [&](const RigidTransform& T) {
    for (std::size_t i = 0; i < source.size(); ++i) {
      const Vec3 p = T.apply(source[i]);
      matched[i] = closest(p);
      dist[i] = (matched[i] - p).norm();
    }
    return rms(dist);
  };

  IcpResult out;
  RigidTransform T = init;
  double err = correspond(T);
  out.rmse_history.push_back(err);
  std::vector<double> best_dist = dist;
  std::vector<Vec3> best_matched = matched;
  for (int it = 0; it < opt.max_iter; ++it) {
    RigidTransform next;
    try {
      next = kabsch(source, best_matched);
    } catch (const DegenerateGeometry&) {
      break;  // all matches collapsed onto a line; keep the current estimate
    }
    const double next_err = correspond(next);
    ++out.iterations;
    if (next_err > err) break;
    const double gain = err - next_err;
    T = next;
    err = next_err;
    best_dist = dist;
    best_matched = matched;
    out.rmse_history.push_back(err);
    if (gain <= opt.tol) break;
  }
  out.transform = T;
  out.rmse = err;
  out.residuals = std::move(best_dist);
  return out;
}

using BSegment = bg::model::segment<BPoint>;
using SegEntry = std::pair<BSegment, std::size_t>;
using SegTree = bgi::rtree<SegEntry, bgi::quadratic<16>>;

Vec3 closest_on_segment(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return a;
  const double u = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + u * ab;
}

}  // namespace

IcpResult icp_register(std::span<const Vec3> source, std::span<const Vec3> target,
                       const RigidTransform& init, const IcpOptions& opt) {
  if (source.size() < 3 || target.size() < 3) {
    throw DegenerateGeometry("icp: need at least 3 points in each cloud");
  }
  if (collinear(source) || collinear(target)) throw DegenerateGeometry("icp: collinear cloud");

  std::vector<Entry> entries;
  entries.reserve(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) entries.emplace_back(to_bpoint(target[i]), i);
  const Tree tree(entries.begin(), entries.end());
  std::vector<Entry> hit;
  return run_icp(source, init, opt, [&](const Vec3& p) {
    hit.clear();
    tree.query(bgi::nearest(to_bpoint(p), 1), std::back_inserter(hit));
    return target[hit.front().second];
  });
}

IcpResult icp_register_polylines(std::span<const Vec3> source, std::span<const Polyline> targets,
                                 const RigidTransform& init, const IcpOptions& opt) {
  std::vector<Vec3> all;
  std::vector<std::pair<Vec3, Vec3>> segs;
  for (const auto& line : targets) {
    all.insert(all.end(), line.begin(), line.end());
    if (line.size() == 1) segs.emplace_back(line.front(), line.front());
    for (std::size_t i = 0; i + 1 < line.size(); ++i) segs.emplace_back(line[i], line[i + 1]);
  }
  if (source.size() < 3 || all.size() < 3) {
    throw DegenerateGeometry("icp: need at least 3 points in each cloud");
  }
  if (collinear(source) || collinear(all)) throw DegenerateGeometry("icp: collinear cloud");

  std::vector<SegEntry> entries;
  entries.reserve(segs.size());
  for (std::size_t i = 0; i < segs.size(); ++i) {
    entries.emplace_back(BSegment(to_bpoint(segs[i].first), to_bpoint(segs[i].second)), i);
  }
  const SegTree tree(entries.begin(), entries.end());
  std::vector<SegEntry> hit;
  return run_icp(source, init, opt, [&](const Vec3& p) {
    hit.clear();
    tree.query(bgi::nearest(to_bpoint(p), 1), std::back_inserter(hit));
    const auto& [a, b] = segs[hit.front().second];
    return closest_on_segment(p, a, b);
  });
}

double Line3::distance(const Vec3& p) const {
  const Vec3 v = p - point;
  return (v - v.dot(direction) * direction).norm();
}

Line3 fit_line(std::span<const Vec3> points) {
  if (points.size() < 2) throw DegenerateGeometry("line fit needs at least 2 points");
  const Vec3 c = centroid(points);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(scatter(points, c));
  Vec3 d = es.eigenvectors().col(2);
  if ((points.back() - points.front()).dot(d) < 0.0) d = -d;
  return {c, d};
}

Plane fit_plane(std::span<const Vec3> points) {
  if (points.size() < 3) throw DegenerateGeometry("plane fit needs at least 3 points");
  Plane pl;
  pl.centroid = centroid(points);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(scatter(points, pl.centroid));
  pl.normal = es.eigenvectors().col(0);
  pl.e1 = es.eigenvectors().col(2);
  pl.e2 = pl.normal.cross(pl.e1);
  return pl;
}

CircleFit fit_radius(std::span<const Vec3> points) {
  const std::size_t n = points.size();
  if (n < 5) throw IllConditionedFit("circle fit needs at least 5 points");
  const Plane pl = fit_plane(points);

  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd b(n);
  std::vector<Vec2> xy(n);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 v = points[i] - pl.centroid;
    xy[i] = {v.dot(pl.e1), v.dot(pl.e2)};
    scale = std::max(scale, xy[i].norm());
  }
  if (!(scale > 0.0)) throw IllConditionedFit("circle fit: coincident points");
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 q = xy[i] / scale;
    A(i, 0) = 2.0 * q.x();
    A(i, 1) = 2.0 * q.y();
    A(i, 2) = 1.0;
    b(i) = q.squaredNorm();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) throw IllConditionedFit("circle fit: points are collinear");
  const Eigen::Vector3d sol = qr.solve(b);
  double cx = sol(0), cy = sol(1);
  const double r2 = sol(2) + cx * cx + cy * cy;
  if (!(r2 > 0.0)) throw IllConditionedFit("circle fit: no real circle");
  double R = std::sqrt(r2);

  // Levenberg-Marquardt on the geometric residuals, in scaled coordinates.
  auto cost = [&](double x0, double y0, double r0) {
    double c = 0.0;
    for (const auto& p : xy) {
      const double e = (p / scale - Vec2(x0, y0)).norm() - r0;
      c += e * e;
    }
    return c;
  };
  double lambda = 1e-3;
  double c0 = cost(cx, cy, R);
  bool converged = false;
  for (int it = 0; it < 100 && !converged; ++it) {
    Eigen::Matrix3d JtJ = Eigen::Matrix3d::Zero();
    Eigen::Vector3d Jtr = Eigen::Vector3d::Zero();
    for (const auto& p : xy) {
      const Vec2 d = p / scale - Vec2(cx, cy);
      const double rho = d.norm();
      if (rho == 0.0) continue;
      const Eigen::Vector3d J(-d.x() / rho, -d.y() / rho, -1.0);
      JtJ += J * J.transpose();
      Jtr += J * (rho - R);
    }
    bool improved = false;
    for (int tries = 0; tries < 20 && !improved; ++tries) {
      Eigen::Matrix3d M = JtJ;
      M.diagonal() *= 1.0 + lambda;
      const Eigen::Vector3d step = M.ldlt().solve(-Jtr);
      const double c1 = cost(cx + step(0), cy + step(1), R + step(2));
      if (c1 <= c0) {
        cx += step(0);
        cy += step(1);
        R += step(2);
        c0 = c1;
        lambda = std::max(lambda / 10.0, 1e-12);
        improved = true;
        converged = step.norm() < 1e-14;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  // The cost stalls at rounding level before the parameters do; a few plain
  // Gauss-Newton steps settle them.
  for (int it = 0; it < 8; ++it) {
    Eigen::Matrix3d JtJ = Eigen::Matrix3d::Zero();
    Eigen::Vector3d Jtr = Eigen::Vector3d::Zero();
    for (const auto& p : xy) {
      const Vec2 d = p / scale - Vec2(cx, cy);
      const double rho = d.norm();
      if (rho == 0.0) continue;
      const Eigen::Vector3d J(-d.x() / rho, -d.y() / rho, -1.0);
      JtJ += J * J.transpose();
      Jtr += J * (rho - R);
    }
    const Eigen::Vector3d step = JtJ.ldlt().solve(-Jtr);
    if (!step.allFinite() || step.norm() > 1e-6) break;
    cx += step(0);
    cy += step(1);
    R += step(2);
    if (step.norm() < 1e-16) break;
  }

  CircleFit out;
  out.r = R * scale;
  const Vec2 c2 = Vec2(cx, cy) * scale;
  out.center = pl.centroid + c2.x() * pl.e1 + c2.y() * pl.e2;
  out.normal = pl.normal;

  std::vector<double> ang(n);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 v = points[i] - out.center;
    const double h = v.dot(pl.normal);
    const double rho = (v - h * pl.normal).norm();
    acc += h * h + (rho - out.r) * (rho - out.r);
    ang[i] = std::atan2((xy[i] - c2).y(), (xy[i] - c2).x());
  }
  out.rmse = std::sqrt(acc / static_cast<double>(n));
  std::sort(ang.begin(), ang.end());
  double max_gap = ang.front() + 2.0 * std::numbers::pi - ang.back();
  for (std::size_t i = 1; i < n; ++i) max_gap = std::max(max_gap, ang[i] - ang[i - 1]);
  out.span_deg = (2.0 * std::numbers::pi - max_gap) * 180.0 / std::numbers::pi;
  if (out.span_deg < 15.0) throw IllConditionedFit("circle fit: arc spans less than 15 deg");
  return out;
}

double radius_error(double ideal, double actual) {
  if (!(ideal > 0.0)) throw InvalidArgument("radius_error: ideal radius must be positive");
  return 100.0 * std::abs(actual - ideal) / ideal;
}

double round1(double value) { return std::round(value * 10.0) / 10.0; }

double estimate_noise(std::span<const Vec3> points) {
  if (points.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i + 2 < points.size(); ++i) {
    acc += (points[i + 2] - 2.0 * points[i + 1] + points[i]).squaredNorm();
  }
  // Var of a second difference of iid per-axis noise is 6 sigma^2 per axis.
  return std::sqrt(acc / static_cast<double>(points.size() - 2) / 18.0);
}

namespace {

std::size_t coarse_changeover(std::span<const Vec3> P, const ChangeoverOptions& opt,
                              double sigma) {
  const std::size_t k = static_cast<std::size_t>(opt.k);
  for (std::size_t i = static_cast<std::size_t>(opt.min_prefix); i + k <= P.size(); ++i) {
    const auto prefix = P.first(i);
    const Line3 line = fit_line(prefix);
    double suu = 0.0;
    for (const auto& p : prefix) suu += std::pow((p - line.point).dot(line.direction), 2);
    bool out = true;
    for (std::size_t j = i; j < i + k && out; ++j) {
      const double u = (P[j] - line.point).dot(line.direction);
      // Prediction band of the prefix line widens with extrapolation distance.
      const double infl = std::sqrt(1.0 + 1.0 / static_cast<double>(i) + u * u / suu);
      out = line.distance(P[j]) > std::max(opt.tau_min, opt.tau_sigmas * sigma * infl);
    }
    if (out) return i;
  }
  throw NotFound("no straight-to-curved changeover found");
}

std::size_t arc_end(std::span<const Vec3> P, const ChangeoverOptions& opt) {
  return P.size() - static_cast<std::size_t>(std::max(opt.tail_exclude, 0));
}

// Sample nearest (along the prefix direction) to where the fitted arc meets
// the prefix line tangentially.
std::size_t tangent_index(std::span<const Vec3> P, std::size_t c, const ChangeoverOptions& opt) {
  const Line3 line = fit_line(P.first(c));
  const CircleFit arc = fit_radius(P.subspan(c, arc_end(P, opt) - c));
  Vec3 to_center = arc.center - line.point;
  to_center -= to_center.dot(line.direction) * line.direction;
  const double len = to_center.norm();
  if (!(len > 0.0)) throw IllConditionedFit("arc center lies on the prefix line");
  const Vec3 touch = arc.center - arc.r * to_center / len;
  const double target = (touch - P.front()).dot(line.direction);
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double d = std::abs((P[i] - P.front()).dot(line.direction) - target);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

double split_cost(std::span<const Vec3> P, std::size_t c, const ChangeoverOptions& opt) {
  const auto head = P.first(c + 1);
  const Line3 line = fit_line(head);
  double cost = 0.0;
  for (const auto& p : head) cost += std::pow(line.distance(p), 2);
  const auto tail = P.subspan(c, arc_end(P, opt) - c);
  const CircleFit arc = fit_radius(tail);
  return cost + arc.rmse * arc.rmse * static_cast<double>(tail.size());
}

}  // namespace

ChangeoverResult detect_changeover(std::span<const Vec3> P, const ChangeoverOptions& opt) {
  if (opt.k < 1 || opt.min_prefix < 2) throw InvalidArgument("changeover: bad k or prefix");
  if (P.size() < static_cast<std::size_t>(opt.min_prefix + opt.k)) {
    throw InvalidArgument("changeover: trace shorter than the straight prefix");
  }
  ChangeoverResult res;
  res.noise_sigma = estimate_noise(P);
  res.tau = std::max(opt.tau_min, opt.tau_sigmas * res.noise_sigma);
  res.coarse_index = coarse_changeover(P, opt, res.noise_sigma);
  res.index = res.coarse_index;

  const std::size_t lo = static_cast<std::size_t>(opt.min_prefix);
  if (P.size() < static_cast<std::size_t>(opt.tail_guard) + lo + 1) return res;
  const std::size_t hi = P.size() - static_cast<std::size_t>(opt.tail_guard);

  // The threshold test fires late on gentle arcs; pull the split back to the
  // tangent point of the fitted arc, from several starts, and keep the split
  // with the smallest line + arc residual.
  std::set<std::size_t> starts{std::clamp(res.coarse_index, lo, hi)};
  const std::size_t stride = std::max<std::size_t>(1, (hi - lo) / std::max(opt.starts, 1));
  for (std::size_t s = lo; s < hi; s += stride) starts.insert(s);

  std::set<std::size_t> fixed_points;
  for (std::size_t c : starts) {
    try {
      for (int it = 0; it < 10; ++it) {
        const std::size_t next = std::clamp(tangent_index(P, c, opt), lo, hi);
        if (next == c) break;
        c = next;
      }
      fixed_points.insert(c);
    } catch (const Error&) {
    }
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c : fixed_points) {
    try {
      const double cost = split_cost(P, c, opt);
      if (cost < best) {
        best = cost;
        res.index = c;
      }
    } catch (const Error&) {
    }
  }
  return res;
}

std::size_t split_straight_curved(std::span<const Vec3> points, const ChangeoverOptions& opt) {
  return detect_changeover(points, opt).index;
}

const SideReport* MetrologyReport::find(Side side) const {
  for (const auto& s : sides) {
    if (s.side == side) return &s;
  }
  return nullptr;
}

namespace {

struct AxisPair {
  Vec3 entry;
  Vec3 axis_point;
};

AxisPair measured_axis(const Polyline& pts, double axis_mm) {
  Polyline head;
  for (const auto& p : pts) {
    if ((p - pts.front()).norm() <= axis_mm) head.push_back(p);
  }
  if (head.size() < 2) head.assign(pts.begin(), pts.begin() + std::min<std::size_t>(pts.size(), 2));
  const Line3 line = fit_line(head);
  const Vec3 entry = line.point + (pts.front() - line.point).dot(line.direction) * line.direction;
  return {entry, entry + axis_mm * line.direction};
}

}  // namespace

MetrologyReport evaluate_traces(const BridgePlan& plan, const std::vector<Trace>& traces,
                                const MetrologyOptions& opt) {
  if (traces.empty()) throw InvalidArgument("metrology: no traces");

  struct Group {
    Side side;
    const BridgeSide* planned;
    std::vector<Polyline> repeats;
  };
  std::vector<Group> groups;
  for (const auto& tr : traces) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Group& g) { return g.side == tr.side; });
    if (it == groups.end()) {
      groups.push_back({tr.side, tr.side == Side::Left ? &plan.left : &plan.right, {}});
      it = std::prev(groups.end());
    }
    Polyline pts = tr.insertion_points();
    if (pts.size() < 3) throw InvalidArgument("metrology: trace with fewer than 3 insertion samples");
    it->repeats.push_back(std::move(pts));
  }

  // Initial guess: map each measured entry axis onto the planned one.
  std::vector<Vec3> meas, model;
  for (const auto& g : groups) {
    Vec3 e = Vec3::Zero(), a = Vec3::Zero();
    for (const auto& rep : g.repeats) {
      const AxisPair ap = measured_axis(rep, opt.init_axis_mm);
      e += ap.entry;
      a += ap.axis_point;
    }
    const double m = static_cast<double>(g.repeats.size());
    meas.push_back(e / m);
    meas.push_back(a / m);
    model.push_back(g.planned->entry.position);
    model.push_back(g.planned->entry.position + opt.init_axis_mm * g.planned->entry.direction);
  }
  RigidTransform init;
  try {
    init = kabsch(meas, model);
  } catch (const DegenerateGeometry&) {
    const Vec3 dm = (meas[1] - meas[0]).normalized();
    const Vec3 dp = (model[1] - model[0]).normalized();
    const Eigen::Matrix3d R = Eigen::Quaterniond::FromTwoVectors(dm, dp).toRotationMatrix();
    init = RigidTransform(R, model[0] - R * meas[0]);
  }

  Polyline source;
  for (const auto& g : groups) {
    for (const auto& rep : g.repeats) source.insert(source.end(), rep.begin(), rep.end());
  }
  std::vector<Polyline> paths;
  for (const BridgeSide* bs : {&plan.left, &plan.right}) {
    if (bs->params.length() > 0.0) paths.push_back(sample_path(bs->entry, bs->params, opt.target_step));
  }
  const IcpResult icp = icp_register_polylines(source, paths, init, opt.icp);

  MetrologyReport report;
  report.combined_rmse = icp.rmse;
  report.registration_points = source.size();
  std::size_t offset = 0;
  for (const auto& g : groups) {
    SideReport sr;
    sr.side = g.side;
    sr.kind = g.planned->params.kind;
    sr.transform = icp.transform;
    std::vector<double> side_res;
    double r_sum = 0.0;
    for (const auto& rep : g.repeats) {
      std::vector<double> res(icp.residuals.begin() + static_cast<std::ptrdiff_t>(offset),
                              icp.residuals.begin() + static_cast<std::ptrdiff_t>(offset + rep.size()));
      offset += rep.size();
      side_res.insert(side_res.end(), res.begin(), res.end());
      RepeatResult rr;
      rr.icp_rmse = rms(res);
      if (sr.kind == TrajectoryKind::Curved) {
        const Polyline reg = icp.transform.apply(rep);
        const std::size_t c = split_straight_curved(reg, opt.changeover);
        const std::size_t end = reg.size() - static_cast<std::size_t>(opt.changeover.tail_exclude);
        if (end <= c) throw IllConditionedFit("metrology: no arc samples after the changeover");
        const CircleFit fit = fit_radius(std::span<const Vec3>(reg).subspan(c, end - c));
        rr.changeover_index = c;
        rr.fitted_r = fit.r;
        rr.fit_rmse = fit.rmse;
        r_sum += fit.r;
      }
      sr.repeats.push_back(rr);
    }
    sr.icp_rmse = rms(side_res);
    if (sr.kind == TrajectoryKind::Curved) {
      sr.changeover_index = sr.repeats.front().changeover_index;
      sr.fitted_r = r_sum / static_cast<double>(g.repeats.size());
      sr.ideal_r = g.planned->params.r;
      sr.radius_error_pct = radius_error(*sr.ideal_r, *sr.fitted_r);
    }
    report.sides.push_back(std::move(sr));
  }
  return report;
}

}  // namespace absf

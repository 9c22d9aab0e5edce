// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include "absf/cementsim.hpp"
#include "absf/error.hpp"
#include "absf/io.hpp"
#include "absf/metrology.hpp"
#include "absf/planner.hpp"
#include "absf/scenario.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace absf;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Outcome()>& body) {
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) ++failures;
  std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = {n(rng), n(rng), n(rng)};
  } while (v.norm() < 1e-6);
  return v.normalized();
}

// Rotation from an axis-angle pair via the Rodrigues formula.
Eigen::Matrix3d rodrigues(const Vec3& axis, double angle) {
  Eigen::Matrix3d K;
  K << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  return Eigen::Matrix3d::Identity() + std::sin(angle) * K + (1.0 - std::cos(angle)) * K * K;
}

RigidTransform random_motion(std::mt19937_64& rng, double max_deg, double max_t) {
  const Eigen::Matrix3d R = rodrigues(random_unit(rng), uniform(rng, 0.0, max_deg) * kDeg);
  return RigidTransform(R, uniform(rng, 0.0, max_t) * random_unit(rng));
}

EntryPose random_entry(std::mt19937_64& rng) {
  EntryPose e;
  e.position = {uniform(rng, -50, 50), uniform(rng, -50, 50), uniform(rng, -50, 50)};
  e.direction = random_unit(rng);
  Vec3 n;
  do {
    n = random_unit(rng);
    n -= n.dot(e.direction) * e.direction;
  } while (n.norm() < 1e-3);
  e.bend_normal = n.normalized();
  e.alpha_deg = axial_heading_deg(e.direction);
  return e;
}

// Tip by integrating the tool frame (p' = t, t' = k n, n' = -k t) with RK4.
struct Frame {
  Vec3 p, t, n;
};

Frame integrate_tip(const EntryPose& e, const SideParams& p, int steps_per_mm = 40) {
  Frame f{e.position + p.l_ot * e.direction, e.direction, e.bend_normal};
  if (p.kind == TrajectoryKind::Straight || p.l_it <= 0.0) return f;
  const double k = 1.0 / p.r;
  const int n = std::max(1, static_cast<int>(std::ceil(p.l_it * steps_per_mm)));
  const double h = p.l_it / n;
  auto deriv = [k](const Frame& s) { return Frame{s.t, k * s.n, -k * s.t}; };
  auto add = [](const Frame& a, const Frame& d, double w) {
    return Frame{a.p + w * d.p, a.t + w * d.t, a.n + w * d.n};
  };
  for (int i = 0; i < n; ++i) {
    const Frame k1 = deriv(f);
    const Frame k2 = deriv(add(f, k1, h / 2));
    const Frame k3 = deriv(add(f, k2, h / 2));
    const Frame k4 = deriv(add(f, k3, h));
    f.p += h / 6 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p);
    f.t += h / 6 * (k1.t + 2 * k2.t + 2 * k3.t + k4.t);
    f.n += h / 6 * (k1.n + 2 * k2.n + 2 * k3.n + k4.n);
  }
  return f;
}

// Circle through three points, used as an independent radius oracle on exact arcs.
double circumradius(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double ab = (b - a).norm(), bc = (c - b).norm(), ca = (a - c).norm();
  return ab * bc * ca / (2.0 * (b - a).cross(c - a).norm());
}

// Lens volume shared by two spheres of radius r, centres d apart, by slicing.
double lens_by_slicing(double r, double d) {
  if (d >= 2 * r) return 0.0;
  const int n = 100000;
  const double lo = d - r, hi = r, h = (hi - lo) / n;
  double v = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = lo + (i + 0.5) * h;
    v += kPi * std::max(0.0, std::min(r * r - x * x, r * r - (x - d) * (x - d))) * h;
  }
  return v;
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Independent tip gap and directed-tangent angle for a plan.
std::pair<double, double> gap_and_theta(const BridgePlan& plan) {
  const Frame a = integrate_tip(plan.left.entry, plan.left.params);
  const Frame b = integrate_tip(plan.right.entry, plan.right.params);
  const double c = std::clamp(a.t.normalized().dot(b.t.normalized()), -1.0, 1.0);
  return {(a.p - b.p).norm(), std::acos(c) / kDeg};
}

Outcome end_to_end(const char* name, double ideal, double theta_lo, double theta_hi, double r_lo,
                   double r_hi, double max_err_pct, double max_seconds) {
  const auto t0 = Clock::now();
  const Pipeline pipe(load_scenario(resolve_scenario_path(name)));
  std::vector<double> radii;
  double worst_gap = 0.0, theta_min = 1e9, theta_max = -1e9;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PipelineArtifacts a = pipe.run(seed);
    const auto [gap, theta] = gap_and_theta(a.plan);
    worst_gap = std::max({worst_gap, gap, a.plan.tip_gap});
    theta_min = std::min(theta_min, theta);
    theta_max = std::max(theta_max, theta);
    for (const SideReport& s : a.report.sides) {
      if (s.fitted_r && s.ideal_r && *s.ideal_r == ideal) radii.push_back(*s.fitted_r);
    }
  }
  const double secs = seconds_since(t0);
  const double m = mean(radii);
  const double err = 100.0 * std::abs(m - ideal) / ideal;
  const bool ok = worst_gap <= 1.0 && theta_min >= theta_lo && theta_max <= theta_hi && m >= r_lo &&
                  m <= r_hi && err <= max_err_pct && secs < max_seconds;
  return {ok, fmt("gap<=%.3g mm, theta in [%.2f, %.2f], mean r %.3f (sd %.3f, n=%zu) in [%.1f, %.1f], "
                  "error %.1f%%, %.1f s",
                  worst_gap, theta_min, theta_max, m, stddev(radii), radii.size(), r_lo, r_hi, err,
                  secs)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + ABSF_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main() {
  report("radius error arithmetic", [] {
    const auto t0 = Clock::now();
    const double e1 = radius_error(25.0, 26.84);
    const double e2 = radius_error(35.0, 38.36);
    const double us = seconds_since(t0) * 1e6;
    const bool ok = std::abs(e1 - 7.4) <= 0.05 && std::abs(e2 - 9.6) <= 0.05 && round1(e1) == 7.4 &&
                    round1(e2) == 9.6 && us < 1000.0;
    return Outcome{ok, fmt("(25, 26.84) -> %.4f%% shown %.1f%%, (35, 38.36) -> %.4f%% shown %.1f%%, %.1f us",
                           e1, round1(e1), e2, round1(e2), us)};
  });

  report("S1 end-to-end", [] { return end_to_end("S1", 25.0, 105, 115, 25.8, 27.9, 100.0, 30.0); });

  report("S2 end-to-end", [] { return end_to_end("S2", 35.0, 84, 94, 36.3, 40.4, 12.0, 1e9); });

  report("ICP oracle", [] {
    std::mt19937_64 rng(20261014);
    const EntryPose e = EntryPose::axial({-19.66, 0, 0}, 6.3, 1.0);
    const SideParams p{TrajectoryKind::Curved, 6.3, 28.5, 42.5, 25.0};
    const Polyline src = sample_path(e, p, 0.25);
    const IcpOptions opt{500, 1e-12};
    int clean_ok = 0, noisy_ok = 0;
    double worst_rot = 0, worst_clean = 0, lo = 1e9, hi = 0;
    std::vector<double> per_axis;
    for (int i = 0; i < 100; ++i) {
      const RigidTransform T = random_motion(rng, 30.0, 20.0);
      const std::vector<Polyline> target{T.apply(src)};
      const IcpResult c = icp_register_polylines(src, target, RigidTransform::identity(), opt);
      const double rot = RigidTransform::rotation_angle_deg(c.transform.rotation() * T.rotation().transpose());
      worst_rot = std::max(worst_rot, rot);
      worst_clean = std::max(worst_clean, c.rmse);
      clean_ok += rot <= 0.5 && c.rmse <= 1e-6;

      // sigma = 1 mm RMS offset length, isotropic direction
      std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(3.0));
      Polyline noisy = src;
      for (auto& q : noisy) q += Vec3(n(rng), n(rng), n(rng));
      const IcpResult r = icp_register_polylines(noisy, target, RigidTransform::identity(), opt);
      lo = std::min(lo, r.rmse);
      hi = std::max(hi, r.rmse);
      noisy_ok += r.rmse >= 0.7 && r.rmse <= 1.3;

      if (i < 20) {
        std::normal_distribution<double> m(0.0, 1.0);
        Polyline ax = src;
        for (auto& q : ax) q += Vec3(m(rng), m(rng), m(rng));
        per_axis.push_back(icp_register_polylines(ax, target, RigidTransform::identity(), opt).rmse);
      }
    }
    return Outcome{clean_ok == 100 && noisy_ok == 100,
                   fmt("%zu-point traces; noiseless %d/100 (max rot err %.2e deg, max rmse %.2e mm); "
                       "sigma=1 mm %d/100 with rmse in [%.3f, %.3f] (per-axis sigma=1 would give %.2f)",
                       src.size(), clean_ok, worst_rot, worst_clean, noisy_ok, lo, hi, mean(per_axis))};
  });

  report("geometry properties", [] {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(7);
    int n_quarter = 0, n_add = 0, n_equi = 0, n_circle = 0;
    double e_quarter = 0, e_add = 0, e_equi = 0, e_circle = 0;
    for (int i = 0; i < 1000; ++i) {
      const EntryPose e = random_entry(rng);
      const double r = uniform(rng, 5.0, 100.0);
      const double l_ot = uniform(rng, 0.0, 60.0);

      // Quarter turn: the tip sits r ahead and r to the bend side of the bend start.
      const SideParams q{TrajectoryKind::Curved, 0, l_ot, r * kPi / 2, r};
      const TipPose tq = tip_pose(e, q);
      const Vec3 expect = e.position + (l_ot + r) * e.direction + r * e.bend_normal;
      const double dq = std::max((tq.position - expect).norm() / r, (tq.tangent - e.bend_normal).norm());
      e_quarter = std::max(e_quarter, dq);
      n_quarter += dq < 1e-9;

      // Additivity: physical length of a fine sampling equals l_ot + l_it, and the
      // sampled tip matches the integrated frame.
      const SideParams p{TrajectoryKind::Curved, 0, l_ot, uniform(rng, 0.02, 1.0) * kPi * r, r};
      const Polyline line = sample_path(e, p, 0.05);
      double len = 0;
      for (std::size_t k = 1; k < line.size(); ++k) len += (line[k] - line[k - 1]).norm();
      const double chord = p.l_it * 0.05 * 0.05 / (24 * r * r);
      const Frame f = integrate_tip(e, p);
      const double da = std::max(std::abs(len - (l_ot + p.l_it)) - chord, 0.0) +
                        (tip_pose(e, p).position - f.p).norm();
      e_add = std::max(e_add, da);
      n_add += da < 1e-6;

      // Equivariance under a random rigid motion.
      const RigidTransform T = random_motion(rng, 180.0, 100.0);
      EntryPose moved = e;
      moved.position = T.apply(e.position);
      moved.direction = T.apply_direction(e.direction);
      moved.bend_normal = T.apply_direction(e.bend_normal);
      const double s = uniform(rng, 0.0, p.length());
      const double de = std::max((tip_pose(moved, p).position - T.apply(tip_pose(e, p).position)).norm(),
                                 (point_at(moved, p, s) - T.apply(point_at(e, p, s))).norm());
      e_equi = std::max(e_equi, de);
      n_equi += de < 1e-9;

      // Circle fit on an exact arc.
      const double rc = uniform(rng, 10.0, 100.0);
      const int m = static_cast<int>(uniform(rng, 8, 150));
      const Vec3 u = random_unit(rng);
      const Vec3 v = (random_unit(rng).cross(u)).normalized();
      const Vec3 c{uniform(rng, -80, 80), uniform(rng, -80, 80), uniform(rng, -80, 80)};
      const double a0 = uniform(rng, 0, 2 * kPi), span = uniform(rng, 20, 200) * kDeg;
      Polyline arc;
      for (int k = 0; k < m; ++k) {
        const double a = a0 + span * k / (m - 1);
        arc.push_back(c + rc * (std::cos(a) * u + std::sin(a) * v));
      }
      const double oracle = circumradius(arc.front(), arc[m / 2], arc.back());
      const double dc = std::abs(fit_radius(arc).r - rc) / rc;
      e_circle = std::max(e_circle, dc);
      n_circle += dc <= 1e-6 && std::abs(oracle - rc) / rc < 1e-9;
    }
    const double secs = seconds_since(t0);
    const bool ok = n_quarter == 1000 && n_add == 1000 && n_equi == 1000 && n_circle == 1000 && secs < 10.0;
    return Outcome{ok, fmt("quarter arc %d/1000 (max %.1e), additivity %d/1000 (max %.1e), "
                           "equivariance %d/1000 (max %.1e), circle fit %d/1000 (max rel %.1e), %.2f s",
                           n_quarter, e_quarter, n_add, e_add, n_equi, e_equi, n_circle, e_circle, secs)};
  });

  report("changeover detection", [] {
    const EntryPose e = EntryPose::axial({-19.66, 0, 0}, 6.3, 1.0);
    const SideParams p{TrajectoryKind::Curved, 6.3, 28.5, 42.5, 25.0};
    auto detected_s = [&](double sigma, std::uint64_t seed) {
      SimConfig c;
      c.noise_sigma = sigma;
      c.seed = seed;
      c.springback = 1.074;
      const Trace tr = execute_side(e, p, c);
      std::vector<double> s;
      for (const auto& smp : tr.samples) {
        if (smp.phase != Phase::Retracting) s.push_back(smp.s);
      }
      return s.at(detect_changeover(tr.insertion_points()).index);
    };
    const double clean = detected_s(0.0, 0);
    int within = 0;
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const double d = std::abs(detected_s(0.5, 1000 + seed) - 28.5);
      within += d <= 2.0;
      worst = std::max(worst, d);
    }
    const bool ok = std::abs(clean - 28.5) <= 0.5 && within >= 90;
    return Outcome{ok, fmt("noiseless at s=%.2f mm; sigma=0.5 within 2 mm on %d/100 seeds (worst %.2f mm)",
                           clean, within, worst)};
  });

  report("solver soundness & symmetry", [] {
    int sound = 0, total = 0;
    double mirror = 0;
    bool infeasible_raised = true;
    for (const char* name : {"S1", "S2"}) {
      const Scenario sc = load_scenario(resolve_scenario_path(name));
      const VertebraModel model = load_model(sc.model_path);
      const BmdGrid bmd = load_bmd(sc.bmd_path);
      for (std::uint64_t seed : {0u, 1u, 7u, 42u}) {
        PlannerConfig cfg = sc.planner;
        cfg.seed = seed;
        const BridgePlan plan = solve_bridge(model, bmd, sc.left, sc.right, cfg);
        ++total;
        sound += check_constraints(model, bmd, plan, cfg.tool, cfg).feasible() &&
                 gap_and_theta(plan).first <= cfg.eps_meet + 1e-9;
      }

      // Mirror the anatomy, the density field and the specs across x = 0.
      const BridgePlan plan = solve_bridge(model, bmd, sc.left, sc.right, sc.planner);
      const BmdGrid mb = BmdGrid::from_function(
          Vec3(-bmd.upper().x(), bmd.origin.y(), bmd.origin.z()), bmd.spacing, bmd.dims,
          [&](const Vec3& q) { return bmd_at(bmd, Vec3(-q.x(), q.y(), q.z())); });
      auto flip = [](SideSpec s, const char* corridor) {
        s.alpha_deg = {-s.alpha_deg.hi, -s.alpha_deg.lo};
        s.corridor = corridor;
        return s;
      };
      const BridgePlan mp = solve_bridge(model.mirrored(), mb, flip(sc.right, "left"),
                                         flip(sc.left, "right"), sc.planner);
      auto side_dev = [](const BridgeSide& a, const BridgeSide& b) {
        const Vec3 pb(-b.entry.position.x(), b.entry.position.y(), b.entry.position.z());
        return std::max({std::abs(a.params.alpha_deg + b.params.alpha_deg),
                         std::abs(a.params.l_ot - b.params.l_ot), std::abs(a.params.l_it - b.params.l_it),
                         std::abs(a.params.r - b.params.r), (a.entry.position - pb).norm()});
      };
      mirror = std::max({mirror, side_dev(mp.left, plan.right), side_dev(mp.right, plan.left),
                         std::abs(mp.theta_deg - plan.theta_deg),
                         std::abs(mp.meeting_point.x() + plan.meeting_point.x())});

      SideSpec tight = sc.right;
      tight.l_ot = {10.0, 20.0};
      try {
        solve_bridge(model, bmd, sc.left, tight, sc.planner);
        infeasible_raised = false;
      } catch (const NoFeasiblePlan&) {
      }
      PlannerConfig stiff = sc.planner;
      stiff.r_min = 100.0;
      try {
        solve_bridge(model, bmd, sc.left, sc.right, stiff);
        infeasible_raised = false;
      } catch (const NoFeasiblePlan&) {
      }
      PlannerConfig wide = sc.planner;
      wide.theta_lo = 150.0;
      wide.theta_hi = 170.0;
      try {
        solve_bridge(model, bmd, sc.left, sc.right, wide);
        infeasible_raised = false;
      } catch (const NoFeasiblePlan&) {
      }
    }
    const bool ok = sound == total && mirror <= 1e-6 && infeasible_raised;
    return Outcome{ok, fmt("%d/%d plans re-pass the check, mirror deviation %.2e, infeasible bounds %s",
                           sound, total, mirror, infeasible_raised ? "raise NoFeasiblePlan" : "NOT rejected")};
  });

  report("fill model", [] {
    InjectionConfig cfg;
    cfg.tube_inner_radius = 0.5;
    cfg.tube_length = 100.0;
    const double q = poiseuille_rate(cfg);
    const double q_oracle = kPi * 4.0e5 * std::pow(0.5e-3, 4) / (8.0 * 14.0 * 0.1) * 1e9;

    const Pipeline pipe(load_scenario(resolve_scenario_path("S1")));
    const BridgePlan plan = pipe.solve(7);
    const FillModel m = fill_model_for(plan, pipe.scenario());
    const double area = kPi * 2.0 * 2.0;
    const double cavity = area * (plan.left.params.length() + plan.right.params.length()) -
                          lens_by_slicing(2.0, plan.tip_gap);
    const double dt = pipe.scenario().injection.dt;
    const FillRun run = simulate_fill(m, dt);
    const double t_full = cavity / q;

    bool flips = run.bridged_time.has_value();
    int flip_count = 0;
    for (std::size_t i = 0; i < run.log.size(); ++i) {
      const auto& row = run.log[i];
      const bool covers = row.s_lo <= m.bridge_span.lo && row.s_hi >= m.bridge_span.hi;
      const bool before = i > 0 && run.log[i - 1].bridged;
      if (row.bridged != (covers || before)) flips = false;
      if (row.bridged && !before) ++flip_count;
    }
    flips = flips && flip_count == 1;

    // The same laws over random flow rates and areas.
    std::mt19937_64 rng(3);
    int random_ok = 0;
    for (int k = 0; k < 200; ++k) {
      BridgePlan rp;
      rp.left.params = {TrajectoryKind::Straight, 0, uniform(rng, 20, 90), 0, 0};
      rp.right.params = {TrajectoryKind::Straight, 0, uniform(rng, 20, 90), 0, 0};
      rp.tip_gap = uniform(rng, 0.0, 1.0);
      InjectionConfig c;
      c.flow_rate_override = uniform(rng, 0.5, 40.0);
      const double radius = uniform(rng, 0.5, 3.0);
      const FillModel fm = make_fill_model(rp, c, radius, uniform(rng, 0, 15));
      const double h = uniform(rng, 0.05, 2.0);
      const FillRun fr = simulate_fill(fm, h);
      const double v = kPi * radius * radius * (rp.left.params.l_ot + rp.right.params.l_ot) -
                       lens_by_slicing(radius, rp.tip_gap);
      random_ok += std::abs(fr.completion_time - v / *c.flow_rate_override) <= h;
    }
    const bool ok = std::abs(q - 7.0) <= 0.1 && std::abs(q - q_oracle) < 1e-9 &&
                    std::abs(m.cavity - cavity) < 1e-3 && std::abs(run.completion_time - t_full) <= dt &&
                    flips && random_ok == 200;
    return Outcome{ok, fmt("Q=%.3f mm^3/s; S1 cavity %.1f mm^3, full at %.2f s vs V/Q %.2f s (dt %.2f); "
                           "bridged flips once at %.2f s; random models %d/200",
                           q, m.cavity, run.completion_time, t_full, dt,
                           run.bridged_time.value_or(-1.0), random_ok)};
  });

  report("determinism", [] {
    const fs::path base = fs::temp_directory_path() / "absf_acceptance_det";
    fs::remove_all(base);
    const int a = run_cli("run --scenario S1 --seed 7 --out-dir \"" + (base / "a").string() + "\"");
    const int b = run_cli("run --scenario S1 --seed 7 --out-dir \"" + (base / "b").string() + "\"");
    bool same = a == 0 && b == 0;
    for (const char* f : {"plan.json", "report.json"}) {
      same = same && read_text_file(base / "a" / f) == read_text_file(base / "b" / f);
    }
    return Outcome{same, fmt("exit codes %d/%d, plan.json and report.json %s", a, b,
                             same ? "byte-identical" : "differ")};
  });

  std::printf("%s\n", failures == 0 ? "ALL CRITERIA PASS" : "SOME CRITERIA FAILED");
  return failures == 0 ? 0 : 1;
}

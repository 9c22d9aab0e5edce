#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "absf/drillsim.hpp"
#include "absf/error.hpp"
#include "absf/metrology.hpp"

#include <cmath>

using namespace absf;

namespace {

const EntryPose kEntry = EntryPose::axial({-19.66, 0, 0}, 6.3, 1.0);
const SideParams kS1Curved{TrajectoryKind::Curved, 6.3, 28.5, 42.5, 25.0};
const SideParams kStraight{TrajectoryKind::Straight, -6.3, 49.4, 0.0, 0.0};

SimConfig quiet() {
  SimConfig c;
  c.noise_sigma = 0.0;
  return c;
}

int rank(Phase p) { return static_cast<int>(p); }

}  // namespace

TEST_CASE("rpm schedule") {
  CHECK(rpm_schedule(Phase::AutonomousDrilling) == 6000.0);
  CHECK(rpm_schedule(Phase::StationaryDrilling) == 6000.0);
  CHECK(rpm_schedule(Phase::Retracting) == 1000.0);
  CHECK(rpm_schedule(Phase::Idle) == 0.0);
  CHECK(rpm_schedule(Phase::Admittance) == 0.0);
  CHECK(rpm_schedule(Phase::Done) == 0.0);
}

TEST_CASE("config validation") {
  SimConfig c;
  CHECK_NOTHROW(c.validate());
  c.feed = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = SimConfig{};
  c.dt = -1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = SimConfig{};
  c.noise_sigma = -0.1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = SimConfig{};
  c.springback = 0.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("phase machine order") {
  PhaseMachine m(TrajectoryKind::Curved);
  CHECK_THROWS_AS(m.enter(Phase::AutonomousDrilling), PhaseOrderError);
  m.enter(Phase::Admittance);
  m.enter(Phase::AutonomousDrilling);
  CHECK_THROWS_AS(m.enter(Phase::Retracting), PhaseOrderError);
  m.enter(Phase::StationaryDrilling);
  m.enter(Phase::Retracting);
  m.enter(Phase::Done);
  CHECK_THROWS_AS(m.enter(Phase::Admittance), PhaseOrderError);

  PhaseMachine s(TrajectoryKind::Straight);
  s.enter(Phase::Admittance);
  s.enter(Phase::AutonomousDrilling);
  CHECK_FALSE(s.can_enter(Phase::StationaryDrilling));
  CHECK_THROWS_AS(s.enter(Phase::StationaryDrilling), PhaseOrderError);
  s.enter(Phase::Retracting);
}

TEST_CASE("stationary drilling on a straight side is refused") {
  DrillSimulator sim(kEntry, kStraight, quiet(), Side::Right);
  sim.place();
  sim.drill_outer();
  CHECK_THROWS_AS(sim.drill_inner(), PhaseOrderError);
  DrillSimulator early(kEntry, kS1Curved, quiet(), Side::Left);
  CHECK_THROWS_AS(early.drill_outer(), PhaseOrderError);
}

TEST_CASE("noise-free final drilling sample equals the closed-form tip") {
  const Trace tr = execute_side(kEntry, kS1Curved, quiet());
  const Polyline ins = tr.insertion_points();
  CHECK((ins.back() - tip_pose(kEntry, kS1Curved).position).norm() < 1e-6);
  CHECK((ins.front() - kEntry.position).norm() < 1e-12);
  CHECK(tr.samples.front().phase == Phase::Admittance);
  CHECK(tr.count(Phase::Admittance) == 1);
}

TEST_CASE("S1 curved side drilling duration") {
  const Trace tr = execute_side(kEntry, kS1Curved, quiet());
  double t_end = 0.0;
  for (const auto& s : tr.samples) {
    if (s.phase == Phase::StationaryDrilling) t_end = s.t;
  }
  CHECK(t_end == doctest::Approx(35.5).epsilon(1e-12));
  CHECK(tr.count(Phase::AutonomousDrilling) == 57);
  CHECK(tr.count(Phase::StationaryDrilling) == 85);
}

TEST_CASE("distance-time consistency while drilling") {
  for (const SideParams& p : {kS1Curved, kStraight, SideParams{TrajectoryKind::Curved, 0, 36.6, 30.9, 35}}) {
    const Trace tr = execute_side(kEntry, p, quiet());
    const SimConfig c = quiet();
    for (std::size_t i = 1; i < tr.samples.size(); ++i) {
      const auto& a = tr.samples[i - 1];
      const auto& b = tr.samples[i];
      REQUIRE(b.t > a.t);
      if (b.phase == Phase::AutonomousDrilling || b.phase == Phase::StationaryDrilling) {
        REQUIRE(std::abs((b.s - a.s) - c.feed * (b.t - a.t)) < 1e-9);
        REQUIRE(b.s - a.s <= c.feed * c.dt + 1e-9);
      }
    }
  }
  // On the regular grid every step covers exactly feed*dt of arc-length.
  const Trace tr = execute_side(kEntry, kS1Curved, quiet());
  for (std::size_t i = 2; i < tr.samples.size(); ++i) {
    const auto& b = tr.samples[i];
    if (b.phase != Phase::StationaryDrilling || tr.samples[i - 1].phase == Phase::Admittance) continue;
    const double ds = b.s - tr.samples[i - 1].s;
    const double arc = 2.0 * 25.0 * std::asin((b.position - tr.samples[i - 1].position).norm() / 50.0);
    REQUIRE(std::abs(ds - 0.5) < 1e-9);
    REQUIRE(std::abs(arc - 0.5) < 1e-9);
  }
}

TEST_CASE("phases are monotone and retraction mirrors insertion") {
  for (const SideParams& p : {kS1Curved, kStraight}) {
    SimConfig c;
    c.seed = 3;
    const Trace tr = execute_side(kEntry, p, c);
    for (std::size_t i = 1; i < tr.samples.size(); ++i) {
      REQUIRE(rank(tr.samples[i].phase) >= rank(tr.samples[i - 1].phase));
    }
    CHECK(tr.retraction_points().size() == tr.insertion_points().size() - 1);
    CHECK(tr.count(Phase::Retracting) ==
          tr.count(Phase::AutonomousDrilling) + tr.count(Phase::StationaryDrilling));
    CHECK(tr.count(Phase::Idle) == 0);
    CHECK(tr.count(Phase::Done) == 0);
  }
  const Trace q = execute_side(kEntry, kS1Curved, quiet());
  const Polyline ins = q.insertion_points();
  const Polyline ret = q.retraction_points();
  for (std::size_t k = 0; k < ret.size(); ++k) {
    REQUIRE((ret[k] - ins[ins.size() - 2 - k]).norm() < 1e-12);
  }
  CHECK(q.samples.back().t == doctest::Approx(71.0));
}

TEST_CASE("metadata records rpm and scripted placement") {
  const Trace tr = execute_side(kEntry, kS1Curved, SimConfig{});
  CHECK(tr.metadata.at("placement") == "scripted");
  CHECK(tr.metadata.at("rpm.AutonomousDrilling") == "6000");
  CHECK(tr.metadata.at("rpm.Retracting") == "1000");
}

TEST_CASE("noise statistics") {
  SimConfig c;
  c.noise_sigma = 0.5;
  c.seed = 17;
  const SideParams longp{TrajectoryKind::Straight, 0.0, 3000.0, 0.0, 0.0};
  DrillSimulator clean(kEntry, longp, quiet(), Side::Left);
  const Trace tr = execute_side(kEntry, longp, c);
  const std::size_t n = tr.samples.size();
  REQUIRE(n >= 10000);
  Vec3 mean = Vec3::Zero();
  Vec3 sq = Vec3::Zero();
  std::vector<Vec3> off;
  for (const auto& s : tr.samples) {
    const Vec3 d = s.position - clean.commanded(s.s);
    off.push_back(d);
    mean += d;
  }
  mean /= static_cast<double>(n);
  for (const auto& d : off) sq += (d - mean).cwiseAbs2();
  sq /= static_cast<double>(n - 1);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(mean[k]) < 3.0 * 0.5 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(sq[k] - 0.25) < 0.025);
  }
}

TEST_CASE("same seed gives a bit-identical trace") {
  SimConfig c;
  c.seed = 42;
  const Trace a = execute_side(kEntry, kS1Curved, c);
  const Trace b = execute_side(kEntry, kS1Curved, c);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    REQUIRE(a.samples[i].t == b.samples[i].t);
    REQUIRE(a.samples[i].position == b.samples[i].position);
  }
  c.seed = 43;
  const Trace d = execute_side(kEntry, kS1Curved, c);
  CHECK(d.samples[5].position != a.samples[5].position);
}

TEST_CASE("springback inflates the fitted radius") {
  SimConfig c = quiet();
  c.springback = 1.074;
  const Trace tr = execute_side(kEntry, kS1Curved, c);
  Polyline arc;
  for (const auto& s : tr.samples) {
    if (s.phase == Phase::StationaryDrilling) arc.push_back(s.position);
  }
  CHECK(fit_radius(arc).r == doctest::Approx(26.85).epsilon(0.05 / 26.85));
}

TEST_CASE("a bend start off the dt grid gets its own sample") {
  const SideParams p{TrajectoryKind::Curved, 0, 36.6, 30.9, 35};
  const Trace tr = execute_side(kEntry, p, quiet());
  bool found = false;
  for (const auto& s : tr.samples) found |= (s.phase == Phase::AutonomousDrilling && s.s == 36.6);
  CHECK(found);
  CHECK(tr.insertion_points().size() == 1 + 74 + 62);
}

#include "absf/drillsim.hpp"

#include "absf/error.hpp"

#include <cmath>
#include <sstream>

namespace absf {

namespace {

constexpr double kSTol = 1e-9;

std::string num(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::Idle: return "Idle";
    case Phase::Admittance: return "Admittance";
    case Phase::AutonomousDrilling: return "AutonomousDrilling";
    case Phase::StationaryDrilling: return "StationaryDrilling";
    case Phase::Retracting: return "Retracting";
    case Phase::Done: return "Done";
  }
  return "Idle";
}

Phase phase_from_string(const std::string& s) {
  for (Phase p : {Phase::Idle, Phase::Admittance, Phase::AutonomousDrilling,
                  Phase::StationaryDrilling, Phase::Retracting, Phase::Done}) {
    if (to_string(p) == s) return p;
  }
  throw InvalidArgument("unknown phase '" + s + "'");
}

std::string to_string(Side side) { return side == Side::Left ? "Left" : "Right"; }

Side side_from_string(const std::string& s) {
  if (s == "Left" || s == "left") return Side::Left;
  if (s == "Right" || s == "right") return Side::Right;
  throw InvalidArgument("unknown side '" + s + "'");
}

void SimConfig::validate() const {
  if (!(feed > 0.0)) throw InvalidArgument("feed must be positive");
  if (!(dt > 0.0)) throw InvalidArgument("dt must be positive");
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("noise_sigma must be >= 0");
  if (!(springback > 0.0)) throw InvalidArgument("springback must be positive");
}

double rpm_schedule(Phase phase, const SimConfig& cfg) {
  switch (phase) {
    case Phase::AutonomousDrilling:
    case Phase::StationaryDrilling: return cfg.rpm_drill;
    case Phase::Retracting: return cfg.rpm_retract;
    default: return 0.0;
  }
}

bool PhaseMachine::can_enter(Phase next) const {
  switch (phase_) {
    case Phase::Idle: return next == Phase::Admittance;
    case Phase::Admittance: return next == Phase::AutonomousDrilling;
    case Phase::AutonomousDrilling:
      return kind_ == TrajectoryKind::Curved ? next == Phase::StationaryDrilling
                                             : next == Phase::Retracting;
    case Phase::StationaryDrilling: return next == Phase::Retracting;
    case Phase::Retracting: return next == Phase::Done;
    case Phase::Done: return false;
  }
  return false;
}

void PhaseMachine::enter(Phase next) {
  if (!can_enter(next)) {
    throw PhaseOrderError("illegal phase transition " + to_string(phase_) + " -> " +
                          to_string(next) + " on a " + to_string(kind_) + " side");
  }
  phase_ = next;
}

Polyline Trace::insertion_points() const {
  Polyline out;
  for (const auto& s : samples) {
    if (s.phase == Phase::Admittance || s.phase == Phase::AutonomousDrilling ||
        s.phase == Phase::StationaryDrilling) {
      out.push_back(s.position);
    }
  }
  return out;
}

Polyline Trace::retraction_points() const {
  Polyline out;
  for (const auto& s : samples) {
    if (s.phase == Phase::Retracting) out.push_back(s.position);
  }
  return out;
}

std::size_t Trace::count(Phase phase) const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.phase == phase ? 1 : 0;
  return n;
}

DrillSimulator::DrillSimulator(const EntryPose& entry, const SideParams& params,
                               const SimConfig& cfg, Side side)
    : entry_(entry), params_(params), cfg_(cfg), machine_(params.kind), rng_(cfg.seed) {
  entry_.validate();
  params_.validate();
  cfg_.validate();
  trace_.side = side;
  trace_.metadata["placement"] = "scripted";
  trace_.metadata["kind"] = to_string(params.kind);
  trace_.metadata["seed"] = std::to_string(cfg.seed);
  trace_.metadata["noise_sigma_mm"] = num(cfg.noise_sigma);
  trace_.metadata["springback"] = num(cfg.springback);
  for (Phase p : {Phase::Admittance, Phase::AutonomousDrilling, Phase::StationaryDrilling,
                  Phase::Retracting}) {
    trace_.metadata["rpm." + to_string(p)] = num(rpm_schedule(p, cfg));
  }
}

Vec3 DrillSimulator::commanded(double s) const {
  SideParams achieved = params_;
  if (achieved.kind == TrajectoryKind::Curved) achieved.r = params_.r * cfg_.springback;
  return point_at(entry_, achieved, s);
}

void DrillSimulator::emit(double t, const Vec3& p, double s) {
  Vec3 measured = p;
  if (cfg_.noise_sigma > 0.0) {
    for (int k = 0; k < 3; ++k) measured[k] += cfg_.noise_sigma * noise_(rng_);
  }
  trace_.samples.push_back({t, measured, machine_.current(), s});
}

void DrillSimulator::advance_to(double s_end) {
  const double ds = cfg_.feed * cfg_.dt;
  while (true) {
    const double next = static_cast<double>(step_index_ + 1) * ds;
    if (next >= s_end - kSTol) break;
    ++step_index_;
    t_ = next / cfg_.feed;
    s_ = next;
    const Vec3 p = commanded(s_);
    drilled_.emplace_back(s_, p);
    emit(t_, p, s_);
  }
  if (s_end > s_ + kSTol) {
    s_ = s_end;
    t_ = s_end / cfg_.feed;
    if (std::abs(static_cast<double>(step_index_ + 1) * ds - s_end) <= kSTol) ++step_index_;
    const Vec3 p = commanded(s_);
    drilled_.emplace_back(s_, p);
    emit(t_, p, s_);
  }
}

void DrillSimulator::place() {
  machine_.enter(Phase::Admittance);
  t_ = 0.0;
  s_ = 0.0;
  drilled_.emplace_back(0.0, entry_.position);
  emit(t_, entry_.position, 0.0);
}

void DrillSimulator::drill_outer() {
  machine_.enter(Phase::AutonomousDrilling);
  advance_to(params_.l_ot);
}

void DrillSimulator::drill_inner() {
  machine_.enter(Phase::StationaryDrilling);
  advance_to(params_.l_ot + params_.l_it);
}

void DrillSimulator::retract() {
  machine_.enter(Phase::Retracting);
  // drilled_[0] is the entry; the last entry is the tip where retraction starts.
  for (std::size_t j = drilled_.size() - 1; j-- > 0;) {
    const auto& [s, p] = drilled_[j];
    t_ += (s_ - s) / cfg_.feed;
    s_ = s;
    emit(t_, p, s);
  }
}

void DrillSimulator::finish() { machine_.enter(Phase::Done); }

Trace execute_side(const EntryPose& entry, const SideParams& params, const SimConfig& cfg,
                   Side side) {
  DrillSimulator sim(entry, params, cfg, side);
  sim.place();
  sim.drill_outer();
  if (params.kind == TrajectoryKind::Curved) sim.drill_inner();
  sim.retract();
  sim.finish();
  return sim.take_trace();
}

}  // namespace absf

#pragma once

#include "absf/geometry.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace absf {

enum class Phase { Idle, Admittance, AutonomousDrilling, StationaryDrilling, Retracting, Done };

std::string to_string(Phase phase);
Phase phase_from_string(const std::string& s);

enum class Side { Left, Right };

std::string to_string(Side side);
Side side_from_string(const std::string& s);

struct SimConfig {
  double feed = 2.0;           // mm/s
  double rpm_drill = 6000.0;   // 1/min
  double rpm_retract = 1000.0; // 1/min
  double dt = 0.25;            // s
  double noise_sigma = 0.5;    // mm, per axis
  double springback = 1.0;     // achieved radius = r * springback
  std::uint64_t seed = 0;

  void validate() const;
};

double rpm_schedule(Phase phase, const SimConfig& cfg = {});

// Legal order: Idle -> Admittance -> AutonomousDrilling -> StationaryDrilling
// -> Retracting -> Done, StationaryDrilling only on curved sides.
class PhaseMachine {
 public:
  explicit PhaseMachine(TrajectoryKind kind) : kind_(kind) {}

  Phase current() const { return phase_; }
  bool can_enter(Phase next) const;
  // Throws PhaseOrderError on an illegal transition.
  void enter(Phase next);

 private:
  TrajectoryKind kind_;
  Phase phase_ = Phase::Idle;
};

struct TraceSample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Phase phase = Phase::Idle;
  double s = 0.0;  // commanded arc-length of the drill tip (not written to CSV)
};

struct Trace {
  Side side = Side::Left;
  std::vector<TraceSample> samples;
  // Run metadata; rpm per phase and the placement mode.
  std::map<std::string, std::string> metadata;

  // Admittance + drilling samples, in order.
  Polyline insertion_points() const;
  Polyline retraction_points() const;
  std::size_t count(Phase phase) const;
};

// Steps one side through the drilling procedure, emitting tracker-like samples.
class DrillSimulator {
 public:
  DrillSimulator(const EntryPose& entry, const SideParams& params, const SimConfig& cfg,
                 Side side);

  void place();          // Admittance: scripted placement at the entry pose
  void drill_outer();    // AutonomousDrilling up to l_ot
  void drill_inner();    // StationaryDrilling along the arc; PhaseOrderError on Straight
  void retract();        // Retracting: replays the insertion samples in reverse
  void finish();         // Done

  Phase phase() const { return machine_.current(); }
  const Trace& trace() const { return trace_; }
  Trace take_trace() { return std::move(trace_); }

  // Noise-free commanded tip position at arc-length s, springback applied.
  Vec3 commanded(double s) const;

 private:
  void emit(double t, const Vec3& p, double s);
  void advance_to(double s_end);

  EntryPose entry_;
  SideParams params_;
  SimConfig cfg_;
  PhaseMachine machine_;
  Trace trace_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
  double t_ = 0.0;
  double s_ = 0.0;
  std::size_t step_index_ = 0;
  std::vector<std::pair<double, Vec3>> drilled_;  // (s, clean position) of insertion samples
};

Trace execute_side(const EntryPose& entry, const SideParams& params, const SimConfig& cfg,
                   Side side = Side::Left);

}  // namespace absf

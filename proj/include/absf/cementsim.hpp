#pragma once

#include "absf/geometry.hpp"

#include <optional>
#include <vector>

namespace absf {

struct InjectionConfig {
  double pressure = 4.0e5;        // Pa
  double viscosity = 14.0;        // Pa s
  double tube_inner_radius = 0.0; // mm, no default: must be supplied
  double tube_length = 100.0;     // mm
  std::optional<double> flow_rate_override;  // mm^3/s

  void validate() const;
};

// Hagen-Poiseuille volumetric rate in mm^3/s; the override wins when set.
double poiseuille_rate(const InjectionConfig& cfg);

// Volume of the lens shared by two spheres of radius r whose centres are d apart.
double sphere_overlap_volume(double r, double d);

// Swept-cylinder cavity of both tunnels, with the overlap at the meeting
// point counted once.
double cavity_volume(const BridgePlan& plan, double fill_radius);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// 1-D fill problem along the combined path: left entry at s = 0, through the
// meeting point, to the right entry at s = length.
struct FillModel {
  double flow_rate = 0.0;   // mm^3/s
  double area = 0.0;        // mm^2
  double cavity = 0.0;      // mm^3
  double length = 0.0;      // cavity / area
  double injection_s = 0.0; // meeting point coordinate
  Interval bridge_span;

  void validate() const;
};

// Bridge span defaults to the stretch between the two rigid screw sections.
FillModel make_fill_model(const BridgePlan& plan, const InjectionConfig& cfg, double fill_radius,
                          double rigid_length, std::optional<Interval> bridge_span = {});

struct FillState {
  double t = 0.0;
  Interval filled{};  // empty interval until injection starts
  double injected_volume = 0.0;
  bool bridged = false;
  bool initialized = false;
};

FillState initial_fill_state(const FillModel& model);

// Advances the front by dt; volume is capped at the cavity.
FillState advance_fill(const FillState& state, const FillModel& model, double dt);

struct FillLogRow {
  double t = 0.0;
  double s_lo = 0.0;
  double s_hi = 0.0;
  double volume = 0.0;
  bool bridged = false;
};

struct FillRun {
  std::vector<FillLogRow> log;
  double completion_time = 0.0;  // first logged time at which the cavity is full
  std::optional<double> bridged_time;
};

// Steps until the cavity is full (or max_steps), logging every step.
FillRun simulate_fill(const FillModel& model, double dt, std::size_t max_steps = 1000000);

}  // namespace absf

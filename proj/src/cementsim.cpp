#include "absf/cementsim.hpp"

#include "absf/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace absf {

void InjectionConfig::validate() const {
  if (flow_rate_override) {
    if (!(*flow_rate_override > 0.0)) throw InvalidArgument("flow_rate_override must be positive");
    return;
  }
  if (!(pressure > 0.0)) throw InvalidArgument("pressure must be positive");
  if (!(viscosity > 0.0)) throw InvalidArgument("viscosity must be positive");
  if (!(tube_inner_radius > 0.0)) throw InvalidArgument("tube_inner_radius must be positive");
  if (!(tube_length > 0.0)) throw InvalidArgument("tube_length must be positive");
}

double poiseuille_rate(const InjectionConfig& cfg) {
  cfg.validate();
  if (cfg.flow_rate_override) return *cfg.flow_rate_override;
  const double R = cfg.tube_inner_radius * 1e-3;
  const double L = cfg.tube_length * 1e-3;
  const double q = std::numbers::pi * cfg.pressure * std::pow(R, 4) / (8.0 * cfg.viscosity * L);
  return q * 1e9;
}

double sphere_overlap_volume(double r, double d) {
  if (!(r > 0.0) || d >= 2.0 * r) return 0.0;
  d = std::max(d, 0.0);
  return std::numbers::pi * (4.0 * r + d) * (2.0 * r - d) * (2.0 * r - d) / 12.0;
}

double cavity_volume(const BridgePlan& plan, double fill_radius) {
  if (!(fill_radius > 0.0)) throw InvalidArgument("fill_radius must be positive");
  const double area = std::numbers::pi * fill_radius * fill_radius;
  const double la = plan.left.params.length();
  const double lb = plan.right.params.length();
  double v = area * (la + lb);
  if (la > 0.0 && lb > 0.0) v -= sphere_overlap_volume(fill_radius, plan.tip_gap);
  return std::max(v, 0.0);
}

void FillModel::validate() const {
  if (!(flow_rate > 0.0)) throw InvalidArgument("fill: flow rate must be positive");
  if (!(area > 0.0)) throw InvalidArgument("fill: area must be positive");
  if (!(bridge_span.lo <= bridge_span.hi)) throw InvalidArgument("fill: inverted bridge span");
}

FillModel make_fill_model(const BridgePlan& plan, const InjectionConfig& cfg, double fill_radius,
                          double rigid_length, std::optional<Interval> bridge_span) {
  FillModel m;
  m.flow_rate = poiseuille_rate(cfg);
  m.area = std::numbers::pi * fill_radius * fill_radius;
  m.cavity = cavity_volume(plan, fill_radius);
  m.length = m.cavity / m.area;
  const double la = plan.left.params.length();
  const double lb = plan.right.params.length();
  const double overlap = la + lb - m.length;
  m.injection_s = std::clamp(la - overlap / 2.0, 0.0, m.length);
  if (bridge_span) {
    m.bridge_span = *bridge_span;
  } else {
    const double lo = std::min(rigid_length, m.length);
    m.bridge_span = {lo, std::max(lo, m.length - rigid_length)};
  }
  m.validate();
  return m;
}

FillState initial_fill_state(const FillModel& model) {
  FillState s;
  s.filled = {model.injection_s, model.injection_s};
  s.initialized = true;
  return s;
}

FillState advance_fill(const FillState& state, const FillModel& model, double dt) {
  if (dt < 0.0) throw InvalidArgument("fill: dt must be >= 0");
  FillState next = state.initialized ? state : initial_fill_state(model);
  if (dt == 0.0) return next;
  next.t = state.t + dt;
  next.injected_volume = std::min(model.flow_rate * next.t, model.cavity);
  const double len = next.injected_volume / model.area;
  double lo = model.injection_s - len / 2.0;
  double hi = model.injection_s + len / 2.0;
  if (lo < 0.0) {
    lo = 0.0;
    hi = len;
  } else if (hi > model.length) {
    hi = model.length;
    lo = model.length - len;
  }
  next.filled = {std::max(lo, 0.0), std::min(hi, model.length)};
  next.bridged = state.bridged ||
                 (next.filled.lo <= model.bridge_span.lo && next.filled.hi >= model.bridge_span.hi);
  return next;
}

FillRun simulate_fill(const FillModel& model, double dt, std::size_t max_steps) {
  if (!(dt > 0.0)) throw InvalidArgument("fill: dt must be positive");
  FillRun run;
  FillState s = initial_fill_state(model);
  auto log = [&] {
    run.log.push_back({s.t, s.filled.lo, s.filled.hi, s.injected_volume, s.bridged});
  };
  log();
  for (std::size_t i = 0; i < max_steps; ++i) {
    const bool was_bridged = s.bridged;
    // Steps from a running count keep t an exact multiple of dt.
    const double t_next = static_cast<double>(i + 1) * dt;
    s = advance_fill(s, model, t_next - s.t);
    s.t = t_next;
    log();
    if (s.bridged && !was_bridged) run.bridged_time = s.t;
    if (s.injected_volume >= model.cavity) {
      run.completion_time = s.t;
      break;
    }
  }
  return run;
}

}  // namespace absf

#pragma once

#include "absf/anatomy.hpp"
#include "absf/error.hpp"
#include "absf/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace absf {

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;

  bool fixed() const { return hi <= lo; }
  double clamp(double v) const;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

enum class BendSide { Medial, Lateral };

// One side of the bridge problem: which corridor it starts in, its kind, and
// the box the solver may search.
struct SideSpec {
  TrajectoryKind kind = TrajectoryKind::Curved;
  std::string corridor = "left";
  BendSide bend = BendSide::Medial;
  ParamRange alpha_deg{0.0, 0.0};
  ParamRange slide_mm{0.0, 0.0};
  ParamRange l_ot{0.0, 0.0};
  ParamRange l_it{0.0, 0.0};
  ParamRange r{0.0, 0.0};

  void validate() const;
};

struct PlannerConfig {
  double eps_meet = 1.0;
  double theta_lo = 0.0;
  double theta_hi = 180.0;
  double r_min = 10.0;
  double bmd_min = 0.0;
  ToolSpec tool;
  double sample_step = 0.5;
  int grid_points = 5;      // per free dimension, before the grid budget is applied
  int grid_budget = 4096;   // max coarse grid evaluations
  int refine_seeds = 6;     // best grid points handed to local refinement
  int random_seeds = 2;     // extra seeds drawn from `seed`
  int max_refine_evals = 1500;
  double penalty_weight = 10.0;
  std::uint64_t seed = 0;
  bool parallel = false;

  void validate() const;
};

struct ConstraintMargin {
  std::string constraint;
  double margin = 0.0;  // >= 0 means satisfied
};

struct ConstraintReport {
  bool containment_ok = false;
  bool corridor_ok = false;
  bool curvature_ok = false;
  bool bmd_ok = false;
  bool theta_ok = false;
  std::vector<ConstraintMargin> details;

  bool feasible() const {
    return containment_ok && corridor_ok && curvature_ok && bmd_ok && theta_ok;
  }
  double margin(const std::string& constraint) const;
};

class NoFeasiblePlan : public Error {
 public:
  NoFeasiblePlan(const std::string& what, BridgePlan best, ConstraintReport report)
      : Error(what), best_(std::move(best)), report_(std::move(report)) {}
  const BridgePlan& best_candidate() const noexcept { return best_; }
  const ConstraintReport& best_report() const noexcept { return report_; }

 private:
  BridgePlan best_;
  ConstraintReport report_;
};

// The four planning constraints, with the anatomical one split into body
// containment and pedicle-corridor clearance.
ConstraintReport check_constraints(const VertebraModel& model, const BmdGrid& grid,
                                   const BridgePlan& plan, const ToolSpec& tool,
                                   const PlannerConfig& cfg);

// Entry pose for a side given its corridor, heading and slide.
EntryPose side_entry(const VertebraModel& model, const std::string& corridor,
                     BendSide bend, double alpha_deg, double slide_mm);

// Plan with both sides built from corridors and explicit parameters.
BridgeSide make_side(const VertebraModel& model, const std::string& corridor, BendSide bend,
                     const SideParams& params, double slide_mm);

struct SolveStats {
  int evaluations = 0;
  int candidates = 0;
  int feasible_candidates = 0;
};

// Two-sided meeting solve: coarse grid + Nelder-Mead refinement of the tip gap
// with constraint penalties, then a hard re-check. Throws NoFeasiblePlan.
BridgePlan solve_bridge(const VertebraModel& model, const BmdGrid& grid, const SideSpec& left,
                        const SideSpec& right, const PlannerConfig& cfg,
                        SolveStats* stats = nullptr);

// Mean BMD along both paths. A density proxy only.
double score_plan(const BmdGrid& grid, const BridgePlan& plan, double step = 0.5);

struct FpsSpec {
  double l_r = 18.0;
  double l_f = 54.4;
  double od = 7.0;
  double id = 4.0;
  double pitch = 2.5;

  double total_length() const { return l_r + l_f; }
  void validate() const;
};

struct SideFit {
  bool rigid_ok = false;
  double length_delta = 0.0;  // (l_ot + l_it) - (l_r + l_f); negative = proud at entry
  bool diameter_ok = false;
};

struct FitReport {
  SideFit left;
  SideFit right;
};

// diameter_ok compares each side's corridor diameter against the screw OD; with
// no model (or an unassigned corridor) it is reported false.
FitReport check_fps_fit(const BridgePlan& plan, const FpsSpec& fps,
                        const VertebraModel* model = nullptr);

}  // namespace absf

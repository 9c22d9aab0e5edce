#pragma once

#include "absf/anatomy.hpp"
#include "absf/cementsim.hpp"
#include "absf/drillsim.hpp"
#include "absf/io.hpp"
#include "absf/metrology.hpp"
#include "absf/planner.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace absf {

struct InjectionSetup {
  InjectionConfig config;
  double fill_radius = 2.0;  // mm
  double dt = 0.5;           // s
  std::optional<Interval> bridge_span;
};

struct Scenario {
  std::string name;
  std::filesystem::path model_path;
  std::filesystem::path bmd_path;
  SideSpec left;
  SideSpec right;
  PlannerConfig planner;
  SimConfig sim;
  int repeats = 3;
  // Maps the phantom frame into the tracker frame the traces are recorded in.
  RigidTransform tracker_pose;
  MetrologyOptions metrology;
  FpsSpec fps;
  InjectionSetup injection;
};

// Paths in the file are resolved against the scenario's directory.
Scenario scenario_from_json(const Json& j, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);
// "S1"/"S2" (any case) name the bundled scenarios; anything else is a path.
std::filesystem::path resolve_scenario_path(const std::string& name_or_path);
std::filesystem::path data_dir();

// Pipeline stage failure; `stage` is one of load, solve, check, simulate,
// evaluate, inject.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& msg)
      : Error(stage + ": " + msg), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// Seed for one simulated repeat, derived from the run seed.
std::uint64_t repeat_seed(std::uint64_t seed, Side side, int repeat);

// Simulates every side `repeats` times in the tracker frame.
std::vector<Trace> simulate_plan(const BridgePlan& plan, const SimConfig& sim, int repeats,
                                 const RigidTransform& tracker_pose, std::uint64_t seed);

FillModel fill_model_for(const BridgePlan& plan, const Scenario& sc);

struct PipelineArtifacts {
  BridgePlan plan;
  ConstraintReport constraints;
  FitReport fps_fit;
  std::vector<Trace> traces;
  MetrologyReport report;
  FillModel fill_model;
  FillRun fill;
};

class Pipeline {
 public:
  // Throws MissingFile when the model or BMD file is absent.
  explicit Pipeline(Scenario sc);

  const Scenario& scenario() const { return sc_; }
  const VertebraModel& model() const { return model_; }
  const BmdGrid& bmd() const { return bmd_; }

  BridgePlan solve(std::uint64_t seed) const;
  ConstraintReport check(const BridgePlan& plan) const;
  std::vector<Trace> simulate(const BridgePlan& plan, std::uint64_t seed) const;
  MetrologyReport evaluate(const BridgePlan& plan, const std::vector<Trace>& traces) const;
  FillRun inject(const BridgePlan& plan) const;

  // Every stage in order; stage failures are rethrown as StageError.
  PipelineArtifacts run(std::uint64_t seed) const;

 private:
  Scenario sc_;
  VertebraModel model_;
  BmdGrid bmd_;
};

// Writes plan.json, check.json, report.json, traces.csv, fill_log.csv.
void write_artifacts(const std::filesystem::path& out_dir, const PipelineArtifacts& a);

}  // namespace absf

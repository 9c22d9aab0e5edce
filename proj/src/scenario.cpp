#include "absf/scenario.hpp"

#include "absf/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>

#ifndef ABSF_DATA_DIR
#define ABSF_DATA_DIR "data"
#endif

namespace absf {

namespace fs = std::filesystem;

namespace {

RigidTransform pose_from_json(const Json& j) {
  if (j.contains("rotation")) return transform_from_json(j, "tracker_pose");
  Vec3 euler = Vec3::Zero(), t = Vec3::Zero();
  if (j.contains("euler_zyx_deg")) euler = vec_from_json(j.at("euler_zyx_deg"), "tracker_pose.euler_zyx_deg");
  if (j.contains("translation")) t = vec_from_json(j.at("translation"), "tracker_pose.translation");
  return RigidTransform::from_euler_deg(euler, t);
}

MetrologyOptions metrology_from_json(const Json& j) {
  MetrologyOptions m;
  auto num = [&](const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw FormatError(std::string("metrology.") + key, "expected a number");
    return j.at(key).get<double>();
  };
  auto integer = [&](const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) throw FormatError(std::string("metrology.") + key, "expected an integer");
    return j.at(key).get<int>();
  };
  m.icp.max_iter = integer("icp_max_iter", m.icp.max_iter);
  m.icp.tol = num("icp_tol_mm", m.icp.tol);
  m.target_step = num("target_step_mm", m.target_step);
  m.init_axis_mm = num("init_axis_mm", m.init_axis_mm);
  m.changeover.tau_min = num("tau_min_mm", m.changeover.tau_min);
  m.changeover.tau_sigmas = num("tau_sigmas", m.changeover.tau_sigmas);
  m.changeover.k = integer("k", m.changeover.k);
  m.changeover.min_prefix = integer("min_prefix", m.changeover.min_prefix);
  m.changeover.tail_exclude = integer("tail_exclude", m.changeover.tail_exclude);
  if (m.icp.max_iter < 1) throw FormatError("metrology.icp_max_iter", "must be >= 1");
  if (!(m.target_step > 0.0)) throw FormatError("metrology.target_step_mm", "must be positive");
  return m;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

}  // namespace

fs::path data_dir() {
  if (const char* env = std::getenv("ABSF_DATA_DIR"); env && *env) return env;
  return ABSF_DATA_DIR;
}

fs::path resolve_scenario_path(const std::string& name_or_path) {
  std::string up = name_or_path;
  std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
  if (up == "S1" || up == "S2") return data_dir() / "scenarios" / (up + ".json");
  return name_or_path;
}

Scenario scenario_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw FormatError("$", "expected an object");
  if (j.value("format", std::string(kScenarioFormat)) != kScenarioFormat) {
    throw FormatError("format", std::string("expected \"") + kScenarioFormat + "\"");
  }
  Scenario sc;
  auto str = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_string()) throw FormatError(key, "expected a string");
    return j.at(key).get<std::string>();
  };
  sc.name = j.value("name", std::string("scenario"));
  sc.model_path = base_dir / str("model_path");
  sc.bmd_path = base_dir / str("bmd_path");
  if (!j.contains("sides")) throw FormatError("sides", "missing field");
  const Json& sides = j.at("sides");
  if (!sides.contains("left") || !sides.contains("right")) {
    throw FormatError("sides", "both left and right are required");
  }
  sc.left = side_spec_from_json(sides.at("left"), "sides.left");
  sc.right = side_spec_from_json(sides.at("right"), "sides.right");
  if (j.contains("planner")) sc.planner = planner_config_from_json(j.at("planner"), sc.planner, "planner");
  if (j.contains("sim")) sc.sim = sim_config_from_json(j.at("sim"), sc.sim, "sim");
  if (j.contains("repeats")) {
    if (!j.at("repeats").is_number_integer() || j.at("repeats").get<int>() < 1) {
      throw FormatError("repeats", "expected a positive integer");
    }
    sc.repeats = j.at("repeats").get<int>();
  }
  if (j.contains("tracker_pose")) sc.tracker_pose = pose_from_json(j.at("tracker_pose"));
  if (j.contains("metrology")) sc.metrology = metrology_from_json(j.at("metrology"));
  if (j.contains("fps")) sc.fps = fps_from_json(j.at("fps"), "fps");
  if (j.contains("injection")) {
    const Json& in = j.at("injection");
    sc.injection.config = injection_from_json(in, "injection");
    sc.injection.fill_radius = in.value("fill_radius_mm", sc.injection.fill_radius);
    sc.injection.dt = in.value("dt_s", sc.injection.dt);
    if (!(sc.injection.fill_radius > 0.0)) throw FormatError("injection.fill_radius_mm", "must be positive");
    if (!(sc.injection.dt > 0.0)) throw FormatError("injection.dt_s", "must be positive");
    if (in.contains("bridge_span_mm")) {
      const Json& b = in.at("bridge_span_mm");
      if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number()) {
        throw FormatError("injection.bridge_span_mm", "expected [s_a, s_b]");
      }
      sc.injection.bridge_span = Interval{b[0].get<double>(), b[1].get<double>()};
    }
  }
  return sc;
}

Scenario load_scenario(const fs::path& path) {
  const Json j = parse_json(read_text_file(path), path.string());
  return scenario_from_json(j, path.parent_path());
}

std::uint64_t repeat_seed(std::uint64_t seed, Side side, int repeat) {
  const std::uint64_t s = side == Side::Left ? 1 : 2;
  return splitmix64(splitmix64(seed) ^ (s << 32) ^ static_cast<std::uint64_t>(repeat));
}

std::vector<Trace> simulate_plan(const BridgePlan& plan, const SimConfig& sim, int repeats,
                                 const RigidTransform& tracker_pose, std::uint64_t seed) {
  std::vector<Trace> out;
  for (Side side : {Side::Left, Side::Right}) {
    const BridgeSide& bs = side == Side::Left ? plan.left : plan.right;
    const EntryPose entry = bs.entry.transformed(tracker_pose);
    for (int k = 0; k < repeats; ++k) {
      SimConfig cfg = sim;
      cfg.seed = repeat_seed(seed, side, k);
      Trace tr = execute_side(entry, bs.params, cfg, side);
      tr.metadata["repeat"] = std::to_string(k + 1);
      out.push_back(std::move(tr));
    }
  }
  return out;
}

FillModel fill_model_for(const BridgePlan& plan, const Scenario& sc) {
  return make_fill_model(plan, sc.injection.config, sc.injection.fill_radius, sc.fps.l_r,
                         sc.injection.bridge_span);
}

Pipeline::Pipeline(Scenario sc) : sc_(std::move(sc)) {
  model_ = load_model(sc_.model_path);
  bmd_ = load_bmd(sc_.bmd_path);
}

BridgePlan Pipeline::solve(std::uint64_t seed) const {
  PlannerConfig cfg = sc_.planner;
  cfg.seed = seed;
  BridgePlan plan = solve_bridge(model_, bmd_, sc_.left, sc_.right, cfg);
  plan.frame = model_.frame;
  return plan;
}

ConstraintReport Pipeline::check(const BridgePlan& plan) const {
  return check_constraints(model_, bmd_, plan, sc_.planner.tool, sc_.planner);
}

std::vector<Trace> Pipeline::simulate(const BridgePlan& plan, std::uint64_t seed) const {
  return simulate_plan(plan, sc_.sim, sc_.repeats, sc_.tracker_pose, seed);
}

MetrologyReport Pipeline::evaluate(const BridgePlan& plan, const std::vector<Trace>& traces) const {
  return evaluate_traces(plan, traces, sc_.metrology);
}

FillRun Pipeline::inject(const BridgePlan& plan) const {
  return simulate_fill(fill_model_for(plan, sc_), sc_.injection.dt);
}

PipelineArtifacts Pipeline::run(std::uint64_t seed) const {
  PipelineArtifacts a;
  a.plan = stage("solve", [&] { return solve(seed); });
  a.constraints = stage("check", [&] {
    ConstraintReport r = check(a.plan);
    if (!r.feasible()) throw Error("solved plan violates its constraints");
    return r;
  });
  a.fps_fit = check_fps_fit(a.plan, sc_.fps, &model_);
  a.traces = stage("simulate", [&] { return simulate(a.plan, seed); });
  a.report = stage("evaluate", [&] { return evaluate(a.plan, a.traces); });
  a.fill_model = stage("inject", [&] { return fill_model_for(a.plan, sc_); });
  a.fill = stage("inject", [&] { return simulate_fill(a.fill_model, sc_.injection.dt); });
  return a;
}

void write_artifacts(const fs::path& out_dir, const PipelineArtifacts& a) {
  fs::create_directories(out_dir);
  write_text_file(out_dir / "plan.json", dump_json(plan_to_json(a.plan)));
  Json check = constraints_to_json(a.constraints);
  check["format"] = kConstraintsFormat;
  check["fps_fit"] = fps_fit_to_json(a.fps_fit);
  write_text_file(out_dir / "check.json", dump_json(check));
  write_text_file(out_dir / "report.json", dump_json(report_to_json(a.report)));
  write_text_file(out_dir / "traces.csv", traces_to_csv(a.traces));
  write_text_file(out_dir / "fill_log.csv", fill_log_to_csv(a.fill));
}

}  // namespace absf

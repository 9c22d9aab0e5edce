#pragma once

#include "absf/anatomy.hpp"
#include "absf/cementsim.hpp"
#include "absf/drillsim.hpp"
#include "absf/geometry.hpp"
#include "absf/metrology.hpp"
#include "absf/planner.hpp"
#include "absf/rigid_transform.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace absf {

using Json = nlohmann::json;

inline constexpr const char* kModelFormat = "absf-model/1";
inline constexpr const char* kBmdFormat = "absf-bmd/1";
inline constexpr const char* kPlanFormat = "absf-plan/1";
inline constexpr const char* kReportFormat = "absf-report/1";
inline constexpr const char* kScenarioFormat = "absf-scenario/1";
inline constexpr const char* kTracesFormat = "absf-traces/1";
inline constexpr const char* kEvaluateFormat = "absf-evaluate/1";
inline constexpr const char* kSolveFormat = "absf-solve/1";
inline constexpr const char* kConstraintsFormat = "absf-constraints/1";
inline constexpr const char* kFillFormat = "absf-fill/1";

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
Json parse_json(const std::string& text, const std::string& what);
// Pretty-printed with a trailing newline; stable for identical input.
std::string dump_json(const Json& j);

// Shortest representation that round-trips.
std::string format_double(double v);

Json vec_to_json(const Vec3& v);
Vec3 vec_from_json(const Json& j, const std::string& field);

Json transform_to_json(const RigidTransform& T);
RigidTransform transform_from_json(const Json& j, const std::string& field);

// Vertebra model.
Json model_to_json(const VertebraModel& m);
VertebraModel model_from_json(const Json& j);
VertebraModel load_model(const std::filesystem::path& path);

// BMD grid: inline values, a raw little-endian float64 sidecar (resolved
// against base_dir) or a synthetic field description.
BmdGrid bmd_from_json(const Json& j, const std::filesystem::path& base_dir);
BmdGrid load_bmd(const std::filesystem::path& path);
Json bmd_to_json(const BmdGrid& g);

// Plans.
Json side_to_json(const BridgeSide& s);
BridgeSide side_from_json(const Json& j, const std::string& field);
Json plan_to_json(const BridgePlan& p);
BridgePlan plan_from_json(const Json& j);

Json constraints_to_json(const ConstraintReport& r);
Json fps_fit_to_json(const FitReport& r);

// Planner inputs.
Json side_spec_to_json(const SideSpec& s);
SideSpec side_spec_from_json(const Json& j, const std::string& field);
Json planner_config_to_json(const PlannerConfig& c);
// Fields absent from j keep the value they have in `base`.
PlannerConfig planner_config_from_json(const Json& j, const PlannerConfig& base,
                                       const std::string& field);
SimConfig sim_config_from_json(const Json& j, const SimConfig& base, const std::string& field);
Json sim_config_to_json(const SimConfig& c);
InjectionConfig injection_from_json(const Json& j, const std::string& field);
Json injection_to_json(const InjectionConfig& c);
FpsSpec fps_from_json(const Json& j, const std::string& field);

// Side parameters (the evaluate request body per side).
SideParams side_params_from_json(const Json& j, const std::string& field);

// Traces.
std::string traces_to_csv(const std::vector<Trace>& traces);
// Splits into separate traces whenever the side changes or time stops increasing.
std::vector<Trace> traces_from_csv(const std::string& text);
Json traces_to_json(const std::vector<Trace>& traces);
std::vector<Trace> traces_from_json(const Json& j, const std::string& field);

// Metrology report.
Json report_to_json(const MetrologyReport& r);

// Fill log.
std::string fill_log_to_csv(const FillRun& run);

BendSide bend_side_from_string(const std::string& s);
std::string to_string(BendSide b);

}  // namespace absf

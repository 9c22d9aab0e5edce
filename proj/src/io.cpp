#include "absf/io.hpp"

#include "absf/error.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace absf {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& field, const std::string& key) {
  return field.empty() ? key : field + "." + key;
}

const Json& require(const Json& j, const std::string& key, const std::string& field) {
  if (!j.is_object()) throw FormatError(field.empty() ? "$" : field, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(join(field, key), "missing field");
  return *it;
}

double as_number(const Json& v, const std::string& field) {
  if (!v.is_number()) throw FormatError(field, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw FormatError(field, "expected a finite number");
  return d;
}

double number(const Json& j, const std::string& key, const std::string& field) {
  return as_number(require(j, key, field), join(field, key));
}

double number_or(const Json& j, const std::string& key, double fallback,
                 const std::string& field) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return as_number(j.at(key), join(field, key));
}

int integer_or(const Json& j, const std::string& key, int fallback, const std::string& field) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number_integer()) throw FormatError(join(field, key), "expected an integer");
  return v.get<int>();
}

std::string string_field(const Json& j, const std::string& key, const std::string& field) {
  const Json& v = require(j, key, field);
  if (!v.is_string()) throw FormatError(join(field, key), "expected a string");
  return v.get<std::string>();
}

std::string string_or(const Json& j, const std::string& key, const std::string& fallback,
                      const std::string& field) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_string()) throw FormatError(join(field, key), "expected a string");
  return v.get<std::string>();
}

void check_format(const Json& j, const char* expected) {
  if (!j.is_object()) throw FormatError("$", "expected an object");
  if (!j.contains("format")) return;
  const Json& f = j.at("format");
  if (!f.is_string() || f.get<std::string>() != expected) {
    throw FormatError("format", std::string("expected \"") + expected + "\"");
  }
}

// Wraps a domain error raised while building a value from `field`.
template <typename F>
auto with_field(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const FormatError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw FormatError(field, e.what());
  } catch (const InvalidPose& e) {
    throw FormatError(field, e.what());
  }
}

Json margin_value(double m) { return std::isfinite(m) ? Json(m) : Json(nullptr); }

std::string side_label(Side s) { return s == Side::Left ? "left" : "right"; }

ParamRange range_from_json(const Json& j, const std::string& field) {
  if (j.is_number()) {
    const double v = as_number(j, field);
    return {v, v};
  }
  if (j.is_array() && j.size() == 2) {
    ParamRange r{as_number(j[0], field + "[0]"), as_number(j[1], field + "[1]")};
    if (r.lo > r.hi) throw FormatError(field, "lower bound exceeds upper bound");
    return r;
  }
  throw FormatError(field, "expected a number or [lo, hi]");
}

Json range_to_json(const ParamRange& r) {
  if (r.fixed()) return r.lo;
  return Json::array({r.lo, r.hi});
}

}  // namespace

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFile(path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError("$", what + " is not valid JSON (" + e.what() + ")");
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Json vec_to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from_json(const Json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 3) throw FormatError(field, "expected [x, y, z]");
  return {as_number(j[0], field + "[0]"), as_number(j[1], field + "[1]"),
          as_number(j[2], field + "[2]")};
}

Json transform_to_json(const RigidTransform& T) {
  Json rows = Json::array();
  for (int i = 0; i < 3; ++i) {
    rows.push_back(Json::array({T.rotation()(i, 0), T.rotation()(i, 1), T.rotation()(i, 2)}));
  }
  return {{"rotation", rows}, {"translation", vec_to_json(T.translation())}};
}

RigidTransform transform_from_json(const Json& j, const std::string& field) {
  const Json& rows = require(j, "rotation", field);
  const std::string rf = join(field, "rotation");
  if (!rows.is_array() || rows.size() != 3) throw FormatError(rf, "expected a 3x3 matrix");
  Eigen::Matrix3d R;
  for (int i = 0; i < 3; ++i) {
    const Vec3 row = vec_from_json(rows[i], rf + "[" + std::to_string(i) + "]");
    R.row(i) = row.transpose();
  }
  RigidTransform T(R, vec_from_json(require(j, "translation", field), join(field, "translation")));
  with_field(rf, [&] {
    T.validate();
    return 0;
  });
  return T;
}

// --- model ----------------------------------------------------------------

Json model_to_json(const VertebraModel& m) {
  Json section = Json::array();
  for (const auto& q : m.axial_section) section.push_back(Json::array({q.x(), q.y()}));
  Json corridors = Json::array();
  for (const auto& c : m.corridors) {
    corridors.push_back({{"side", c.side},
                         {"entry", vec_to_json(c.entry)},
                         {"axis", vec_to_json(c.axis)},
                         {"radius", c.radius},
                         {"length", c.length}});
  }
  return {{"format", kModelFormat}, {"name", m.name},     {"frame", m.frame},
          {"scale", m.scale},       {"height", m.height}, {"axial_section", section},
          {"corridors", corridors}};
}

VertebraModel model_from_json(const Json& j) {
  check_format(j, kModelFormat);
  VertebraModel m;
  m.name = string_or(j, "name", m.name, "");
  m.frame = string_or(j, "frame", m.frame, "");
  m.scale = number_or(j, "scale", m.scale, "");
  m.height = number(j, "height", "");
  const Json& sec = require(j, "axial_section", "");
  if (!sec.is_array()) throw FormatError("axial_section", "expected an array of [x, y]");
  for (std::size_t i = 0; i < sec.size(); ++i) {
    const std::string f = "axial_section[" + std::to_string(i) + "]";
    if (!sec[i].is_array() || sec[i].size() != 2) throw FormatError(f, "expected [x, y]");
    m.axial_section.emplace_back(as_number(sec[i][0], f), as_number(sec[i][1], f));
  }
  const Json& cor = require(j, "corridors", "");
  if (!cor.is_array()) throw FormatError("corridors", "expected an array");
  for (std::size_t i = 0; i < cor.size(); ++i) {
    const std::string f = "corridors[" + std::to_string(i) + "]";
    Capsule c;
    c.side = string_field(cor[i], "side", f);
    c.entry = vec_from_json(require(cor[i], "entry", f), f + ".entry");
    c.axis = vec_from_json(require(cor[i], "axis", f), f + ".axis");
    c.radius = number(cor[i], "radius", f);
    c.length = number(cor[i], "length", f);
    m.corridors.push_back(c);
  }
  try {
    m.validate();
  } catch (const InvalidModel& e) {
    throw FormatError("$", e.what());
  }
  return m;
}

VertebraModel load_model(const fs::path& path) {
  return model_from_json(parse_json(read_text_file(path), path.string()));
}

// --- bmd ------------------------------------------------------------------

BmdGrid bmd_from_json(const Json& j, const fs::path& base_dir) {
  check_format(j, kBmdFormat);
  BmdGrid g;
  g.origin = vec_from_json(require(j, "origin", ""), "origin");
  g.spacing = vec_from_json(require(j, "spacing", ""), "spacing");
  const Json& dims = require(j, "dims", "");
  if (!dims.is_array() || dims.size() != 3) throw FormatError("dims", "expected [nx, ny, nz]");
  for (int k = 0; k < 3; ++k) {
    if (!dims[k].is_number_integer()) throw FormatError("dims", "expected integers");
    g.dims[k] = dims[k].get<int>();
  }
  if (g.dims[0] < 2 || g.dims[1] < 2 || g.dims[2] < 2) {
    throw FormatError("dims", "each dimension needs at least 2 nodes");
  }
  const std::size_t n = static_cast<std::size_t>(g.dims[0]) * g.dims[1] * g.dims[2];
  if (j.contains("values")) {
    const Json& v = j.at("values");
    if (!v.is_array() || v.size() != n) {
      throw FormatError("values", "expected " + std::to_string(n) + " numbers");
    }
    g.values.reserve(n);
    for (std::size_t i = 0; i < n; ++i) g.values.push_back(as_number(v[i], "values"));
  } else if (j.contains("values_file")) {
    const fs::path file = base_dir / string_field(j, "values_file", "");
    const std::string raw = read_text_file(file);
    if (raw.size() != n * sizeof(double)) {
      throw FormatError("values_file", "expected " + std::to_string(n * sizeof(double)) +
                                           " bytes of little-endian float64");
    }
    g.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits = 0;
      for (int b = 7; b >= 0; --b) {
        bits = (bits << 8) | static_cast<unsigned char>(raw[i * 8 + static_cast<std::size_t>(b)]);
      }
      std::memcpy(&g.values[i], &bits, sizeof(double));
    }
  } else if (j.contains("synthetic")) {
    const Json& s = j.at("synthetic");
    SyntheticBmd field;
    field.base = number_or(s, "base", field.base, "synthetic");
    if (s.contains("ellipsoids")) {
      for (std::size_t i = 0; i < s.at("ellipsoids").size(); ++i) {
        const Json& e = s.at("ellipsoids")[i];
        const std::string f = "synthetic.ellipsoids[" + std::to_string(i) + "]";
        field.ellipsoids.push_back({vec_from_json(require(e, "center", f), f + ".center"),
                                    vec_from_json(require(e, "radii", f), f + ".radii"),
                                    number(e, "value", f)});
      }
    }
    if (s.contains("blocks")) {
      for (std::size_t i = 0; i < s.at("blocks").size(); ++i) {
        const Json& b = s.at("blocks")[i];
        const std::string f = "synthetic.blocks[" + std::to_string(i) + "]";
        field.blocks.push_back({vec_from_json(require(b, "min", f), f + ".min"),
                                vec_from_json(require(b, "max", f), f + ".max"),
                                number(b, "value", f)});
      }
    }
    g = BmdGrid::from_function(g.origin, g.spacing, g.dims,
                               [&](const Vec3& p) { return field.value_at(p); });
  } else {
    throw FormatError("values", "one of values, values_file or synthetic is required");
  }
  try {
    g.validate();
  } catch (const Error& e) {
    throw FormatError("$", e.what());
  }
  return g;
}

BmdGrid load_bmd(const fs::path& path) {
  return bmd_from_json(parse_json(read_text_file(path), path.string()), path.parent_path());
}

Json bmd_to_json(const BmdGrid& g) {
  return {{"format", kBmdFormat},
          {"origin", vec_to_json(g.origin)},
          {"spacing", vec_to_json(g.spacing)},
          {"dims", Json::array({g.dims[0], g.dims[1], g.dims[2]})},
          {"values", g.values}};
}

// --- plans ----------------------------------------------------------------

Json side_to_json(const BridgeSide& s) {
  Json j = {{"kind", to_string(s.params.kind)},
            {"alpha_deg", s.params.alpha_deg},
            {"entry", vec_to_json(s.entry.position)},
            {"direction", vec_to_json(s.entry.direction)},
            {"bend_normal", vec_to_json(s.entry.bend_normal)},
            {"l_ot", s.params.l_ot},
            {"l_it", s.params.l_it},
            {"r", s.params.r},
            {"slide_mm", s.slide_mm}};
  if (s.corridor >= 0) j["corridor"] = s.corridor;
  return j;
}

SideParams side_params_from_json(const Json& j, const std::string& field) {
  SideParams p;
  p.kind = with_field(join(field, "kind"), [&] {
    return trajectory_kind_from_string(string_field(j, "kind", field));
  });
  p.alpha_deg = number_or(j, "alpha_deg", 0.0, field);
  p.l_ot = number(j, "l_ot", field);
  p.l_it = number_or(j, "l_it", 0.0, field);
  p.r = number_or(j, "r", 0.0, field);
  with_field(field, [&] {
    p.validate();
    return 0;
  });
  return p;
}

BridgeSide side_from_json(const Json& j, const std::string& field) {
  BridgeSide s;
  s.params = side_params_from_json(j, field);
  const Vec3 entry = vec_from_json(require(j, "entry", field), join(field, "entry"));
  if (j.contains("direction")) {
    s.entry.position = entry;
    s.entry.direction = vec_from_json(j.at("direction"), join(field, "direction"));
    s.entry.bend_normal = vec_from_json(require(j, "bend_normal", field), join(field, "bend_normal"));
    s.entry.alpha_deg = s.params.alpha_deg;
  } else {
    // Axial-plane pose from the heading; bend_normal fixes the bend side.
    const Vec3 bn = vec_from_json(require(j, "bend_normal", field), join(field, "bend_normal"));
    const EntryPose plus = EntryPose::axial(entry, s.params.alpha_deg, 1.0);
    s.entry = EntryPose::axial(entry, s.params.alpha_deg, bn.dot(plus.bend_normal) >= 0.0 ? 1.0 : -1.0);
  }
  with_field(field, [&] {
    s.entry.validate();
    return 0;
  });
  s.corridor = integer_or(j, "corridor", -1, field);
  s.slide_mm = number_or(j, "slide_mm", 0.0, field);
  return s;
}

Json plan_to_json(const BridgePlan& p) {
  return {{"format", kPlanFormat},
          {"frame", p.frame},
          {"theta_convention", "directed-tangents"},
          {"sides", {{"left", side_to_json(p.left)}, {"right", side_to_json(p.right)}}},
          {"theta_deg", p.theta_deg},
          {"tip_gap", p.tip_gap},
          {"meeting_point", vec_to_json(p.meeting_point)}};
}

BridgePlan plan_from_json(const Json& j) {
  check_format(j, kPlanFormat);
  const Json& sides = require(j, "sides", "");
  const BridgeSide left = side_from_json(require(sides, "left", "sides"), "sides.left");
  const BridgeSide right = side_from_json(require(sides, "right", "sides"), "sides.right");
  return make_plan(left, right, string_or(j, "frame", "phantom", ""));
}

Json constraints_to_json(const ConstraintReport& r) {
  Json margins = Json::object();
  for (const auto& d : r.details) margins[d.constraint] = margin_value(d.margin);
  return {{"feasible", r.feasible()},
          {"containment", r.containment_ok},
          {"corridor", r.corridor_ok},
          {"curvature", r.curvature_ok},
          {"bmd", r.bmd_ok},
          {"theta", r.theta_ok},
          {"margins", margins}};
}

Json fps_fit_to_json(const FitReport& r) {
  auto side = [](const SideFit& s) {
    return Json{{"rigid_ok", s.rigid_ok},
                {"length_delta_mm", s.length_delta},
                {"diameter_ok", s.diameter_ok}};
  };
  return {{"left", side(r.left)}, {"right", side(r.right)}};
}

// --- planner inputs ---------------------------------------------------------

BendSide bend_side_from_string(const std::string& s) {
  if (s == "medial" || s == "Medial") return BendSide::Medial;
  if (s == "lateral" || s == "Lateral") return BendSide::Lateral;
  throw InvalidArgument("unknown bend side '" + s + "'");
}

std::string to_string(BendSide b) { return b == BendSide::Medial ? "medial" : "lateral"; }

Json side_spec_to_json(const SideSpec& s) {
  return {{"kind", to_string(s.kind)},
          {"corridor", s.corridor},
          {"bend", to_string(s.bend)},
          {"alpha_deg", range_to_json(s.alpha_deg)},
          {"slide_mm", range_to_json(s.slide_mm)},
          {"l_ot", range_to_json(s.l_ot)},
          {"l_it", range_to_json(s.l_it)},
          {"r", range_to_json(s.r)}};
}

SideSpec side_spec_from_json(const Json& j, const std::string& field) {
  SideSpec s;
  s.kind = with_field(join(field, "kind"), [&] {
    return trajectory_kind_from_string(string_field(j, "kind", field));
  });
  s.corridor = string_field(j, "corridor", field);
  s.bend = with_field(join(field, "bend"), [&] {
    return bend_side_from_string(string_or(j, "bend", "medial", field));
  });
  auto range = [&](const char* key, ParamRange fallback) {
    if (!j.contains(key)) return fallback;
    return range_from_json(j.at(key), join(field, key));
  };
  s.alpha_deg = range_from_json(require(j, "alpha_deg", field), join(field, "alpha_deg"));
  s.slide_mm = range("slide_mm", {0.0, 0.0});
  s.l_ot = range_from_json(require(j, "l_ot", field), join(field, "l_ot"));
  s.l_it = range("l_it", {0.0, 0.0});
  s.r = range("r", {0.0, 0.0});
  with_field(field, [&] {
    s.validate();
    return 0;
  });
  return s;
}

Json planner_config_to_json(const PlannerConfig& c) {
  return {{"eps_meet_mm", c.eps_meet},
          {"theta_range_deg", Json::array({c.theta_lo, c.theta_hi})},
          {"r_min_mm", c.r_min},
          {"bmd_min", c.bmd_min},
          {"tool",
           {{"drill_diameter_mm", c.tool.drill_diameter},
            {"niti_od_mm", c.tool.niti_od},
            {"niti_wall_mm", c.tool.niti_wall}}},
          {"sample_step_mm", c.sample_step},
          {"grid_points", c.grid_points},
          {"grid_budget", c.grid_budget},
          {"refine_seeds", c.refine_seeds},
          {"random_seeds", c.random_seeds},
          {"max_refine_evals", c.max_refine_evals},
          {"penalty_weight", c.penalty_weight},
          {"parallel", c.parallel}};
}

PlannerConfig planner_config_from_json(const Json& j, const PlannerConfig& base,
                                       const std::string& field) {
  if (!j.is_object()) throw FormatError(field, "expected an object");
  PlannerConfig c = base;
  c.eps_meet = number_or(j, "eps_meet_mm", c.eps_meet, field);
  if (j.contains("theta_range_deg")) {
    const ParamRange r = range_from_json(j.at("theta_range_deg"), join(field, "theta_range_deg"));
    c.theta_lo = r.lo;
    c.theta_hi = r.hi;
  }
  c.r_min = number_or(j, "r_min_mm", c.r_min, field);
  c.bmd_min = number_or(j, "bmd_min", c.bmd_min, field);
  if (j.contains("tool")) {
    const Json& t = j.at("tool");
    const std::string tf = join(field, "tool");
    c.tool.drill_diameter = number_or(t, "drill_diameter_mm", c.tool.drill_diameter, tf);
    c.tool.niti_od = number_or(t, "niti_od_mm", c.tool.niti_od, tf);
    c.tool.niti_wall = number_or(t, "niti_wall_mm", c.tool.niti_wall, tf);
  }
  c.sample_step = number_or(j, "sample_step_mm", c.sample_step, field);
  c.grid_points = integer_or(j, "grid_points", c.grid_points, field);
  c.grid_budget = integer_or(j, "grid_budget", c.grid_budget, field);
  c.refine_seeds = integer_or(j, "refine_seeds", c.refine_seeds, field);
  c.random_seeds = integer_or(j, "random_seeds", c.random_seeds, field);
  c.max_refine_evals = integer_or(j, "max_refine_evals", c.max_refine_evals, field);
  c.penalty_weight = number_or(j, "penalty_weight", c.penalty_weight, field);
  if (j.contains("parallel")) {
    if (!j.at("parallel").is_boolean()) throw FormatError(join(field, "parallel"), "expected a boolean");
    c.parallel = j.at("parallel").get<bool>();
  }
  with_field(field, [&] {
    c.validate();
    return 0;
  });
  return c;
}

Json sim_config_to_json(const SimConfig& c) {
  return {{"feed_mm_s", c.feed},       {"rpm_drill", c.rpm_drill},
          {"rpm_retract", c.rpm_retract}, {"dt_s", c.dt},
          {"noise_sigma_mm", c.noise_sigma}, {"springback", c.springback}};
}

SimConfig sim_config_from_json(const Json& j, const SimConfig& base, const std::string& field) {
  if (!j.is_object()) throw FormatError(field, "expected an object");
  SimConfig c = base;
  c.feed = number_or(j, "feed_mm_s", c.feed, field);
  c.rpm_drill = number_or(j, "rpm_drill", c.rpm_drill, field);
  c.rpm_retract = number_or(j, "rpm_retract", c.rpm_retract, field);
  c.dt = number_or(j, "dt_s", c.dt, field);
  c.noise_sigma = number_or(j, "noise_sigma_mm", c.noise_sigma, field);
  c.springback = number_or(j, "springback", c.springback, field);
  with_field(field, [&] {
    c.validate();
    return 0;
  });
  return c;
}

InjectionConfig injection_from_json(const Json& j, const std::string& field) {
  if (!j.is_object()) throw FormatError(field, "expected an object");
  InjectionConfig c;
  c.pressure = number_or(j, "pressure_pa", c.pressure, field);
  c.viscosity = number_or(j, "viscosity_pa_s", c.viscosity, field);
  c.tube_inner_radius = number_or(j, "tube_inner_radius_mm", c.tube_inner_radius, field);
  c.tube_length = number_or(j, "tube_length_mm", c.tube_length, field);
  if (j.contains("flow_rate_override_mm3_s") && !j.at("flow_rate_override_mm3_s").is_null()) {
    c.flow_rate_override =
        as_number(j.at("flow_rate_override_mm3_s"), join(field, "flow_rate_override_mm3_s"));
  }
  with_field(field, [&] {
    c.validate();
    return 0;
  });
  return c;
}

Json injection_to_json(const InjectionConfig& c) {
  Json j = {{"pressure_pa", c.pressure},
            {"viscosity_pa_s", c.viscosity},
            {"tube_inner_radius_mm", c.tube_inner_radius},
            {"tube_length_mm", c.tube_length}};
  if (c.flow_rate_override) j["flow_rate_override_mm3_s"] = *c.flow_rate_override;
  return j;
}

FpsSpec fps_from_json(const Json& j, const std::string& field) {
  if (!j.is_object()) throw FormatError(field, "expected an object");
  FpsSpec f;
  f.l_r = number_or(j, "l_r_mm", f.l_r, field);
  f.l_f = number_or(j, "l_f_mm", f.l_f, field);
  f.od = number_or(j, "od_mm", f.od, field);
  f.id = number_or(j, "id_mm", f.id, field);
  f.pitch = number_or(j, "pitch_mm", f.pitch, field);
  with_field(field, [&] {
    f.validate();
    return 0;
  });
  return f;
}

// --- traces -----------------------------------------------------------------

std::string traces_to_csv(const std::vector<Trace>& traces) {
  std::string out = "t_s,x_mm,y_mm,z_mm,phase,side\n";
  for (const auto& tr : traces) {
    const std::string side = side_label(tr.side);
    for (const auto& s : tr.samples) {
      out += format_double(s.t);
      for (int k = 0; k < 3; ++k) {
        out += ',';
        out += format_double(s.position[k]);
      }
      out += ',';
      out += to_string(s.phase);
      out += ',';
      out += side;
      out += '\n';
    }
  }
  return out;
}

std::vector<Trace> traces_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("trace", "empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t_s,x_mm,y_mm,z_mm,phase,side") throw FormatError("trace.header", "unexpected header");
  std::vector<Trace> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    const std::string field = "trace.row" + std::to_string(row);
    if (cells.size() != 6) throw FormatError(field, "expected 6 columns");
    TraceSample s;
    double vals[4];
    for (int k = 0; k < 4; ++k) {
      const char* b = cells[k].data();
      const char* e = b + cells[k].size();
      auto res = std::from_chars(b, e, vals[k]);
      if (res.ec != std::errc() || res.ptr != e) throw FormatError(field, "bad number '" + cells[k] + "'");
    }
    s.t = vals[0];
    s.position = {vals[1], vals[2], vals[3]};
    s.phase = with_field(field + ".phase", [&] { return phase_from_string(cells[4]); });
    const Side side = with_field(field + ".side", [&] { return side_from_string(cells[5]); });
    if (out.empty() || out.back().side != side || !(s.t > out.back().samples.back().t)) {
      out.emplace_back();
      out.back().side = side;
    }
    out.back().samples.push_back(s);
  }
  return out;
}

Json traces_to_json(const std::vector<Trace>& traces) {
  Json arr = Json::array();
  for (const auto& tr : traces) {
    Json samples = Json::array();
    for (const auto& s : tr.samples) {
      samples.push_back({{"t_s", s.t}, {"position", vec_to_json(s.position)},
                         {"phase", to_string(s.phase)}});
    }
    arr.push_back({{"side", side_label(tr.side)}, {"metadata", tr.metadata}, {"samples", samples}});
  }
  return {{"format", kTracesFormat}, {"traces", arr}};
}

std::vector<Trace> traces_from_json(const Json& j, const std::string& field) {
  const Json& arr = require(j, "traces", field);
  const std::string af = join(field, "traces");
  if (!arr.is_array()) throw FormatError(af, "expected an array");
  std::vector<Trace> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string f = af + "[" + std::to_string(i) + "]";
    Trace tr;
    tr.side = with_field(f + ".side", [&] { return side_from_string(string_field(arr[i], "side", f)); });
    if (auto md = arr[i].find("metadata"); md != arr[i].end() && !md->is_null()) {
      if (!md->is_object()) throw FormatError(f + ".metadata", "expected an object");
      for (const auto& [key, value] : md->items()) {
        if (!value.is_string()) throw FormatError(f + ".metadata." + key, "expected a string");
        tr.metadata[key] = value.get<std::string>();
      }
    }
    const Json& samples = require(arr[i], "samples", f);
    if (!samples.is_array()) throw FormatError(f + ".samples", "expected an array");
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const std::string sf = f + ".samples[" + std::to_string(k) + "]";
      TraceSample s;
      s.t = number(samples[k], "t_s", sf);
      s.position = vec_from_json(require(samples[k], "position", sf), sf + ".position");
      s.phase = with_field(sf + ".phase", [&] {
        return phase_from_string(string_field(samples[k], "phase", sf));
      });
      if (!tr.samples.empty() && !(s.t > tr.samples.back().t)) {
        throw FormatError(sf + ".t_s", "time must be strictly increasing");
      }
      tr.samples.push_back(s);
    }
    out.push_back(std::move(tr));
  }
  return out;
}

// --- report -----------------------------------------------------------------

Json report_to_json(const MetrologyReport& r) {
  auto opt = [](const auto& v) { return v ? Json(*v) : Json(nullptr); };
  Json per_side = Json::object();
  for (const auto& s : r.sides) {
    Json repeats = Json::array();
    for (const auto& rep : s.repeats) {
      repeats.push_back({{"icp_rmse_mm", rep.icp_rmse},
                         {"changeover_index", opt(rep.changeover_index)},
                         {"fitted_r_mm", opt(rep.fitted_r)},
                         {"fit_rmse_mm", opt(rep.fit_rmse)}});
    }
    per_side[side_label(s.side)] = {{"kind", to_string(s.kind)},
                                    {"transform", transform_to_json(s.transform)},
                                    {"icp_rmse_mm", s.icp_rmse},
                                    {"changeover_index", opt(s.changeover_index)},
                                    {"fitted_r_mm", opt(s.fitted_r)},
                                    {"ideal_r_mm", opt(s.ideal_r)},
                                    {"radius_error_pct", opt(s.radius_error_pct)},
                                    {"repeats", repeats}};
  }
  return {{"format", kReportFormat},
          {"per_side", per_side},
          {"combined_rmse_mm", r.combined_rmse},
          {"registration", {{"points", r.registration_points}, {"method", r.registration}}}};
}

std::string fill_log_to_csv(const FillRun& run) {
  std::string out = "t_s,s_lo_mm,s_hi_mm,volume_mm3,bridged\n";
  for (const auto& row : run.log) {
    out += format_double(row.t) + ',' + format_double(row.s_lo) + ',' + format_double(row.s_hi) +
           ',' + format_double(row.volume) + ',' + (row.bridged ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace absf

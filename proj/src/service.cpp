#include "absf/service.hpp"

#include "absf/error.hpp"

#include <httplib.h>

#include <iostream>

namespace absf {

namespace {

const Json& object_field(const Json& body, const char* key) {
  if (!body.is_object()) throw FormatError("$", "expected a JSON object");
  if (!body.contains(key)) throw FormatError(key, "missing field");
  return body.at(key);
}

std::uint64_t seed_of(const Json& body) {
  if (!body.contains("seed")) return 0;
  const Json& s = body.at("seed");
  if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
    throw FormatError("seed", "expected a non-negative integer");
  }
  return s.get<std::uint64_t>();
}

Json polyline_to_json(const Polyline& line) {
  Json arr = Json::array();
  for (const auto& p : line) arr.push_back(vec_to_json(p));
  return arr;
}

BridgeSide evaluate_side(const Pipeline& ctx, const Json& j, const std::string& field,
                         const std::string& default_corridor) {
  const SideParams params = side_params_from_json(j, field);
  const std::string corridor = j.value("corridor", default_corridor);
  BendSide bend = BendSide::Medial;
  if (j.contains("bend")) {
    try {
      bend = bend_side_from_string(j.at("bend").get<std::string>());
    } catch (const std::exception& e) {
      throw FormatError(field + ".bend", e.what());
    }
  }
  double slide = 0.0;
  if (j.contains("slide_mm")) {
    if (!j.at("slide_mm").is_number()) throw FormatError(field + ".slide_mm", "expected a number");
    slide = j.at("slide_mm").get<double>();
  }
  try {
    return make_side(ctx.model(), corridor, bend, params, slide);
  } catch (const InvalidModel& e) {
    throw FormatError(field + ".corridor", e.what());
  }
}

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

using Handler = Json (*)(const Pipeline&, const Json&);

void guarded(const Pipeline& ctx, const httplib::Request& req, httplib::Response& res,
             Handler h) {
  try {
    Json body = req.body.empty() ? Json::object() : parse_json(req.body, "request body");
    reply(res, 200, h(ctx, body));
  } catch (const FormatError& e) {
    reply(res, 400, {{"format", "absf-error/1"}, {"error", e.what()}, {"field", e.field()}});
  } catch (const Json::exception& e) {
    reply(res, 400, {{"format", "absf-error/1"}, {"error", e.what()}, {"field", "$"}});
  } catch (const Error& e) {
    reply(res, 422, {{"format", "absf-error/1"}, {"error", e.what()}});
  } catch (const std::exception& e) {
    reply(res, 500, {{"format", "absf-error/1"}, {"error", e.what()}});
  }
}

}  // namespace

Json handle_model(const Pipeline& ctx) {
  Json j = model_to_json(ctx.model());
  j["centroid"] = Json::array({ctx.model().centroid().x(), ctx.model().centroid().y()});
  j["scenario"] = ctx.scenario().name;
  return j;
}

Json handle_evaluate(const Pipeline& ctx, const Json& body) {
  const Json& sides = object_field(body, "sides");
  if (!sides.is_object() || !sides.contains("left") || !sides.contains("right")) {
    throw FormatError("sides", "both left and right are required");
  }
  double step = ctx.scenario().planner.sample_step;
  if (body.contains("sample_step_mm")) {
    if (!body.at("sample_step_mm").is_number() || !(body.at("sample_step_mm").get<double>() > 0.0)) {
      throw FormatError("sample_step_mm", "expected a positive number");
    }
    step = body.at("sample_step_mm").get<double>();
  }
  const BridgeSide left = evaluate_side(ctx, sides.at("left"), "sides.left", "left");
  const BridgeSide right = evaluate_side(ctx, sides.at("right"), "sides.right", "right");
  const BridgePlan plan = make_plan(left, right, ctx.model().frame);
  const TipPose lt = tip_pose(left.entry, left.params);
  const TipPose rt = tip_pose(right.entry, right.params);
  auto tip = [](const TipPose& t) {
    return Json{{"position", vec_to_json(t.position)}, {"tangent", vec_to_json(t.tangent)}};
  };
  return {{"format", kEvaluateFormat},
          {"tips", {{"left", tip(lt)}, {"right", tip(rt)}}},
          {"theta_deg", plan.theta_deg},
          {"tip_gap", plan.tip_gap},
          {"meeting_point", vec_to_json(plan.meeting_point)},
          {"constraints", constraints_to_json(ctx.check(plan))},
          {"paths",
           {{"left", polyline_to_json(sample_path(left.entry, left.params, step))},
            {"right", polyline_to_json(sample_path(right.entry, right.params, step))}}},
          {"plan", plan_to_json(plan)}};
}

Json handle_solve(const Pipeline& ctx, const Json& body) {
  if (!body.is_object()) throw FormatError("$", "expected a JSON object");
  SideSpec left = ctx.scenario().left;
  SideSpec right = ctx.scenario().right;
  if (body.contains("sides")) {
    const Json& sides = body.at("sides");
    if (!sides.is_object()) throw FormatError("sides", "expected an object");
    if (sides.contains("left")) left = side_spec_from_json(sides.at("left"), "sides.left");
    if (sides.contains("right")) right = side_spec_from_json(sides.at("right"), "sides.right");
  }
  PlannerConfig cfg = ctx.scenario().planner;
  if (body.contains("planner")) cfg = planner_config_from_json(body.at("planner"), cfg, "planner");
  cfg.seed = seed_of(body);
  try {
    BridgePlan plan = solve_bridge(ctx.model(), ctx.bmd(), left, right, cfg);
    plan.frame = ctx.model().frame;
    return {{"format", kSolveFormat},
            {"feasible", true},
            {"plan", plan_to_json(plan)},
            {"constraints", constraints_to_json(ctx.check(plan))}};
  } catch (const NoFeasiblePlan& e) {
    return {{"format", kSolveFormat},
            {"feasible", false},
            {"message", e.what()},
            {"best_candidate", plan_to_json(e.best_candidate())},
            {"constraints", constraints_to_json(e.best_report())}};
  } catch (const InvalidModel& e) {
    throw FormatError("sides", e.what());
  }
}

Json handle_simulate(const Pipeline& ctx, const Json& body) {
  const BridgePlan plan = plan_from_json(object_field(body, "plan"));
  SimConfig sim = ctx.scenario().sim;
  if (body.contains("sim")) sim = sim_config_from_json(body.at("sim"), sim, "sim");
  int repeats = 1;
  if (body.contains("repeats")) {
    if (!body.at("repeats").is_number_integer() || body.at("repeats").get<int>() < 1) {
      throw FormatError("repeats", "expected a positive integer");
    }
    repeats = body.at("repeats").get<int>();
  }
  const std::string frame = body.value("frame", std::string("phantom"));
  RigidTransform pose;
  if (frame == "tracker") {
    pose = ctx.scenario().tracker_pose;
  } else if (frame != "phantom") {
    throw FormatError("frame", "expected \"phantom\" or \"tracker\"");
  }
  Json out = traces_to_json(simulate_plan(plan, sim, repeats, pose, seed_of(body)));
  out["frame"] = frame;
  return out;
}

Json handle_metrology(const Pipeline& ctx, const Json& body) {
  const BridgePlan plan = plan_from_json(object_field(body, "plan"));
  const std::vector<Trace> traces = traces_from_json(body, "");
  if (traces.empty()) throw FormatError("traces", "at least one trace is required");
  return report_to_json(ctx.evaluate(plan, traces));
}

void setup_routes(httplib::Server& server, std::shared_ptr<const Pipeline> ctx) {
  // The planning UI is served from its own origin.
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.Get("/model", [ctx](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, handle_model(*ctx));
  });
  const std::pair<const char*, Handler> posts[] = {{"/evaluate", &handle_evaluate},
                                                   {"/solve", &handle_solve},
                                                   {"/simulate", &handle_simulate},
                                                   {"/metrology", &handle_metrology}};
  for (const auto& [path, h] : posts) {
    server.Post(path, [ctx, h = h](const httplib::Request& req, httplib::Response& res) {
      guarded(*ctx, req, res, h);
    });
  }
}

bool serve(std::shared_ptr<const Pipeline> ctx, int port) {
  httplib::Server server;
  setup_routes(server, std::move(ctx));
  if (!server.bind_to_port("127.0.0.1", port)) return false;
  std::cerr << "listening on http://127.0.0.1:" << port << "\n";
  return server.listen_after_bind();
}

}  // namespace absf

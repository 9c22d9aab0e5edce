#include "absf/error.hpp"
#include "absf/io.hpp"
#include "absf/metrology.hpp"
#include "absf/scenario.hpp"
#include "absf/service.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>

namespace fs = std::filesystem;
using namespace absf;

namespace {

struct Options {
  std::string scenario = "S1";
  std::uint64_t seed = 0;
  std::string out_dir = "absf_out";
  std::string plan_path;
  std::string traces_path;
  int port = kDefaultPort;
};

constexpr int kExitFailure = 1;
constexpr int kExitMissingFile = 2;

fs::path plan_file(const Options& o) {
  return o.plan_path.empty() ? fs::path(o.out_dir) / "plan.json" : fs::path(o.plan_path);
}

BridgePlan read_plan(const Options& o) {
  return plan_from_json(parse_json(read_text_file(plan_file(o)), plan_file(o).string()));
}

template <typename F>
auto at_stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const MissingFile&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void print_plan(const BridgePlan& p) {
  std::printf("theta %.2f deg, tip gap %.3f mm\n", p.theta_deg, p.tip_gap);
  for (const auto* s : {&p.left, &p.right}) {
    std::printf("  %-6s %-8s alpha %.3f  l_ot %.3f  l_it %.3f  r %.3f\n",
                s == &p.left ? "left" : "right", to_string(s->params.kind).c_str(),
                s->params.alpha_deg, s->params.l_ot, s->params.l_it, s->params.r);
  }
}

void print_report(const MetrologyReport& r) {
  std::printf("combined icp rmse %.3f mm\n", r.combined_rmse);
  for (const auto& s : r.sides) {
    std::printf("  %-6s icp rmse %.3f mm", s.side == Side::Left ? "left" : "right", s.icp_rmse);
    if (s.fitted_r) {
      std::printf("  ideal r %.1f  fitted r %.2f  error %.1f%%", *s.ideal_r, *s.fitted_r,
                  round1(*s.radius_error_pct));
    }
    std::printf("\n");
  }
}

int cmd_plan(const Pipeline& p, const Options& o) {
  try {
    const BridgePlan plan = p.solve(o.seed);
    write_text_file(fs::path(o.out_dir) / "plan.json", dump_json(plan_to_json(plan)));
    print_plan(plan);
    return 0;
  } catch (const NoFeasiblePlan& e) {
    Json j = {{"format", kSolveFormat},
              {"feasible", false},
              {"message", e.what()},
              {"best_candidate", plan_to_json(e.best_candidate())},
              {"constraints", constraints_to_json(e.best_report())}};
    write_text_file(fs::path(o.out_dir) / "best_candidate.json", dump_json(j));
    throw StageError("solve", e.what());
  } catch (const std::exception& e) {
    throw StageError("solve", e.what());
  }
}

int cmd_check(const Pipeline& p, const Options& o) {
  const BridgePlan plan = at_stage("load", [&] { return read_plan(o); });
  const ConstraintReport r = at_stage("check", [&] { return p.check(plan); });
  Json j = constraints_to_json(r);
  j["format"] = kConstraintsFormat;
  j["fps_fit"] = fps_fit_to_json(check_fps_fit(plan, p.scenario().fps, &p.model()));
  write_text_file(fs::path(o.out_dir) / "check.json", dump_json(j));
  std::cout << dump_json(j);
  return r.feasible() ? 0 : kExitFailure;
}

int cmd_simulate(const Pipeline& p, const Options& o) {
  const BridgePlan plan = at_stage("load", [&] { return read_plan(o); });
  const auto traces = at_stage("simulate", [&] { return p.simulate(plan, o.seed); });
  write_text_file(fs::path(o.out_dir) / "traces.csv", traces_to_csv(traces));
  std::printf("%zu traces written\n", traces.size());
  return 0;
}

int cmd_evaluate(const Pipeline& p, const Options& o) {
  const BridgePlan plan = at_stage("load", [&] { return read_plan(o); });
  const fs::path tp =
      o.traces_path.empty() ? fs::path(o.out_dir) / "traces.csv" : fs::path(o.traces_path);
  const auto traces = at_stage("load", [&] { return traces_from_csv(read_text_file(tp)); });
  const MetrologyReport r = at_stage("evaluate", [&] { return p.evaluate(plan, traces); });
  write_text_file(fs::path(o.out_dir) / "report.json", dump_json(report_to_json(r)));
  print_report(r);
  return 0;
}

int cmd_inject(const Pipeline& p, const Options& o) {
  const BridgePlan plan = at_stage("load", [&] { return read_plan(o); });
  const FillModel m = at_stage("inject", [&] { return fill_model_for(plan, p.scenario()); });
  const FillRun run = at_stage("inject", [&] { return p.inject(plan); });
  write_text_file(fs::path(o.out_dir) / "fill_log.csv", fill_log_to_csv(run));
  std::printf("flow %.3f mm^3/s, cavity %.1f mm^3, full after %.2f s", m.flow_rate, m.cavity,
              run.completion_time);
  if (run.bridged_time) std::printf(", bridged at %.2f s", *run.bridged_time);
  std::printf("\n");
  return run.bridged_time ? 0 : kExitFailure;
}

int cmd_run(const Pipeline& p, const Options& o) {
  const PipelineArtifacts a = p.run(o.seed);
  write_artifacts(o.out_dir, a);
  print_plan(a.plan);
  print_report(a.report);
  return 0;
}

int cmd_serve(std::shared_ptr<const Pipeline> p, const Options& o) {
  if (!serve(std::move(p), o.port)) {
    std::cerr << "serve: cannot bind 127.0.0.1:" << o.port << "\n";
    return kExitFailure;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bridge-fixation planning, drilling simulation and metrology"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "S1, S2 or a scenario file")->capture_default_str();
    sub->add_option("--seed", o.seed, "random seed")->capture_default_str();
    sub->add_option("--out-dir", o.out_dir, "output directory")->capture_default_str();
  };
  auto with_plan = [&](CLI::App* sub) {
    sub->add_option("--plan", o.plan_path, "plan file (default <out-dir>/plan.json)");
  };
  CLI::App* plan = app.add_subcommand("plan", "solve the bridge and write plan.json");
  CLI::App* check = app.add_subcommand("check", "check a plan against the constraints");
  CLI::App* simulate = app.add_subcommand("simulate", "simulate drilling traces for a plan");
  CLI::App* evaluate = app.add_subcommand("evaluate", "register traces and fit the arcs");
  CLI::App* inject = app.add_subcommand("inject", "run the cement fill model for a plan");
  CLI::App* run = app.add_subcommand("run", "full pipeline");
  CLI::App* serve_cmd = app.add_subcommand("serve", "JSON service on 127.0.0.1");
  for (CLI::App* s : {plan, check, simulate, evaluate, inject, run, serve_cmd}) common(s);
  for (CLI::App* s : {check, simulate, evaluate, inject}) with_plan(s);
  evaluate->add_option("--traces", o.traces_path, "trace CSV (default <out-dir>/traces.csv)");
  serve_cmd->add_option("--port", o.port, "port")->capture_default_str()->check(CLI::Range(1, 65535));

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path path = resolve_scenario_path(o.scenario);
    Scenario sc = at_stage("load", [&] { return load_scenario(path); });
    auto pipeline = std::make_shared<const Pipeline>(
        at_stage("load", [&] { return Pipeline(std::move(sc)); }));
    if (plan->parsed()) return cmd_plan(*pipeline, o);
    if (check->parsed()) return cmd_check(*pipeline, o);
    if (simulate->parsed()) return cmd_simulate(*pipeline, o);
    if (evaluate->parsed()) return cmd_evaluate(*pipeline, o);
    if (inject->parsed()) return cmd_inject(*pipeline, o);
    if (run->parsed()) return cmd_run(*pipeline, o);
    return cmd_serve(pipeline, o);
  } catch (const MissingFile& e) {
    std::cerr << "load: missing file " << e.path() << "\n";
    return kExitMissingFile;
  } catch (const StageError& e) {
    std::cerr << "stage " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

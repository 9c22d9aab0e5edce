#include "absf/planner.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <random>

namespace absf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGapTie = 1e-6;
constexpr double kScoreTie = 1e-12;

struct SampledPath {
  Polyline points;
  std::size_t straight_count = 0;  // leading samples on the straight segment
};

SampledPath sample_side(const BridgeSide& side, double step) {
  SampledPath out;
  out.points = sample_path(side.entry, side.params, step);
  out.straight_count = 1 + static_cast<std::size_t>(std::ceil(side.params.l_ot / step));
  out.straight_count = std::min(out.straight_count, out.points.size());
  return out;
}

const Capsule* side_corridor(const VertebraModel& model, const BridgeSide& side) {
  if (side.corridor < 0) return nullptr;
  if (side.corridor >= static_cast<int>(model.corridors.size())) {
    throw FrameError("plan references corridor " + std::to_string(side.corridor) +
                     " but model '" + model.name + "' has " +
                     std::to_string(model.corridors.size()));
  }
  return &model.corridors[static_cast<std::size_t>(side.corridor)];
}

struct Margins {
  double containment = kInf;
  double corridor = kInf;
  double curvature = kInf;
  double bmd = kInf;
  double theta = kInf;
};

Margins compute_margins(const VertebraModel& model, const BmdGrid& grid, const BridgePlan& plan,
                        const ToolSpec& tool, const PlannerConfig& cfg) {
  Margins m;
  const double drill_r = tool.drill_radius();
  for (const BridgeSide* side : {&plan.left, &plan.right}) {
    const SampledPath path = sample_side(*side, cfg.sample_step);
    for (const auto& p : path.points) {
      m.containment = std::min(m.containment, model.containment_margin(p, drill_r));
    }

    const Capsule* cap = side_corridor(model, *side);
    if (cap != nullptr) {
      const double clearance = cap->radius - drill_r;
      for (std::size_t i = 0; i < path.straight_count; ++i) {
        const double t = cap->axial(path.points[i]);
        if (t < 0.0 || t > cap->length) continue;
        m.corridor = std::min(m.corridor, clearance - cap->radial(path.points[i]));
      }
    }

    if (side->params.kind == TrajectoryKind::Curved) {
      m.curvature = std::min(m.curvature, side->params.r - cfg.r_min);
    }

    // Density is checked past the pedicle: the arc for curved sides, the part
    // beyond the corridor for straight ones.
    std::size_t first = 0;
    if (side->params.kind == TrajectoryKind::Curved) {
      first = path.straight_count > 0 ? path.straight_count - 1 : 0;
    } else if (cap != nullptr) {
      while (first + 1 < path.points.size() && cap->axial(path.points[first]) < cap->length) {
        ++first;
      }
    }
    for (std::size_t i = first; i < path.points.size(); ++i) {
      if (!grid.in_hull(path.points[i])) {
        m.bmd = std::min(m.bmd, -1.0);
        continue;
      }
      m.bmd = std::min(m.bmd, bmd_at(grid, path.points[i]) - cfg.bmd_min);
    }
  }
  m.theta = std::min(plan.theta_deg - cfg.theta_lo, cfg.theta_hi - plan.theta_deg);
  return m;
}

ConstraintReport report_from(const Margins& m) {
  ConstraintReport r;
  r.containment_ok = m.containment >= 0.0;
  r.corridor_ok = m.corridor >= 0.0;
  r.curvature_ok = m.curvature >= 0.0;
  r.bmd_ok = m.bmd >= 0.0;
  r.theta_ok = m.theta >= 0.0;
  r.details = {{"containment", m.containment},
               {"corridor", m.corridor},
               {"curvature", m.curvature},
               {"bmd", m.bmd},
               {"theta", m.theta}};
  return r;
}

double bend_sign(const VertebraModel& model, const Capsule& c, BendSide bend) {
  const double medial = (model.centroid().x() - c.entry.x()) >= 0.0 ? 1.0 : -1.0;
  return bend == BendSide::Medial ? medial : -medial;
}

// --- search space -----------------------------------------------------------

enum class Param { Alpha, Slide, Lot, Lit, Radius };

struct FreeDim {
  int side;  // 0 left, 1 right
  Param param;
  ParamRange range;
};

struct SearchSpace {
  const VertebraModel& model;
  const BmdGrid& grid;
  const SideSpec* specs[2];
  const PlannerConfig& cfg;
  std::vector<FreeDim> dims;

  SearchSpace(const VertebraModel& m, const BmdGrid& g, const SideSpec& l, const SideSpec& r,
              const PlannerConfig& c)
      : model(m), grid(g), specs{&l, &r}, cfg(c) {
    for (int s = 0; s < 2; ++s) {
      const SideSpec& sp = *specs[s];
      auto add = [&](Param p, const ParamRange& range) {
        if (!range.fixed()) dims.push_back({s, p, range});
      };
      add(Param::Alpha, sp.alpha_deg);
      add(Param::Slide, sp.slide_mm);
      add(Param::Lot, sp.l_ot);
      if (sp.kind == TrajectoryKind::Curved) {
        add(Param::Lit, sp.l_it);
        add(Param::Radius, sp.r);
      }
    }
  }

  struct Values {
    double alpha, slide;
    SideParams params;
  };

  std::array<Values, 2> decode(const std::vector<double>& x) const {
    std::array<Values, 2> v{};
    for (int s = 0; s < 2; ++s) {
      const SideSpec& sp = *specs[s];
      v[s].alpha = sp.alpha_deg.lo;
      v[s].slide = sp.slide_mm.lo;
      v[s].params.kind = sp.kind;
      v[s].params.l_ot = sp.l_ot.lo;
      v[s].params.l_it = sp.kind == TrajectoryKind::Curved ? sp.l_it.lo : 0.0;
      v[s].params.r = sp.kind == TrajectoryKind::Curved ? sp.r.lo : 0.0;
    }
    for (std::size_t i = 0; i < dims.size(); ++i) {
      const FreeDim& d = dims[i];
      const double val = d.range.lo + std::clamp(x[i], 0.0, 1.0) * (d.range.hi - d.range.lo);
      Values& tgt = v[d.side];
      switch (d.param) {
        case Param::Alpha: tgt.alpha = val; break;
        case Param::Slide: tgt.slide = val; break;
        case Param::Lot: tgt.params.l_ot = val; break;
        case Param::Lit: tgt.params.l_it = val; break;
        case Param::Radius: tgt.params.r = val; break;
      }
    }
    for (auto& s : v) s.params.alpha_deg = s.alpha;
    return v;
  }

  // Returns the plan, or nullopt when the sweep cap is violated (with the
  // excess in `sweep_excess`).
  std::optional<BridgePlan> build(const std::vector<double>& x, double* sweep_excess) const {
    const auto v = decode(x);
    double excess = 0.0;
    for (const auto& s : v) {
      if (s.params.kind == TrajectoryKind::Curved) {
        excess += std::max(0.0, s.params.l_it - std::numbers::pi * s.params.r);
      }
    }
    if (sweep_excess) *sweep_excess = excess;
    if (excess > 0.0) return std::nullopt;
    const BridgeSide left = make_side(model, specs[0]->corridor, specs[0]->bend, v[0].params,
                                      v[0].slide);
    const BridgeSide right = make_side(model, specs[1]->corridor, specs[1]->bend, v[1].params,
                                       v[1].slide);
    return make_plan(left, right, model.frame);
  }

  double objective(const std::vector<double>& x) const {
    double excess = 0.0;
    const auto plan = build(x, &excess);
    if (!plan) return 1e3 + cfg.penalty_weight * excess;
    const Margins m = compute_margins(model, grid, *plan, cfg.tool, cfg);
    auto neg = [](double v) { return v < 0.0 ? -v : 0.0; };
    const double penalty = neg(m.containment) + neg(m.corridor) + neg(m.curvature) +
                           10.0 * neg(m.bmd) + 0.1 * neg(m.theta);
    return plan->tip_gap + cfg.penalty_weight * penalty;
  }
};

struct Simplex {
  std::vector<std::vector<double>> pts;
  std::vector<double> vals;
};

std::vector<double> project(std::vector<double> x) {
  for (auto& v : x) v = std::clamp(v, 0.0, 1.0);
  return x;
}

// Bounded Nelder-Mead on the unit box (vertices are projected onto the box).
std::vector<double> nelder_mead(const SearchSpace& space, std::vector<double> x0, int max_evals,
                                int* evals) {
  const std::size_t d = x0.size();
  if (d == 0) return x0;
  auto f = [&](const std::vector<double>& x) {
    ++*evals;
    return space.objective(x);
  };

  std::vector<double> best = x0;
  double best_val = f(best);
  int used = 1;
  // A second pass from the best point recovers from a collapsed simplex.
  for (int pass = 0; pass < 2 && used < max_evals; ++pass) {
    const double h = pass == 0 ? 0.1 : 0.02;
    Simplex S;
    S.pts.push_back(best);
    S.vals.push_back(best_val);
    for (std::size_t i = 0; i < d; ++i) {
      std::vector<double> p = best;
      p[i] = p[i] + h <= 1.0 ? p[i] + h : p[i] - h;
      S.pts.push_back(project(p));
      S.vals.push_back(f(S.pts.back()));
      ++used;
    }
    while (used < max_evals) {
      std::vector<std::size_t> order(d + 1);
      for (std::size_t i = 0; i <= d; ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return S.vals[a] < S.vals[b]; });
      const std::size_t lo = order.front(), hi = order.back(), nh = order[d - 1];

      double diam = 0.0;
      for (std::size_t i = 0; i <= d; ++i) {
        for (std::size_t k = 0; k < d; ++k) {
          diam = std::max(diam, std::abs(S.pts[i][k] - S.pts[lo][k]));
        }
      }
      if (diam < 1e-11 || (S.vals[hi] - S.vals[lo] < 1e-14 && diam < 1e-8)) break;

      std::vector<double> c(d, 0.0);
      for (std::size_t i = 0; i <= d; ++i) {
        if (i == hi) continue;
        for (std::size_t k = 0; k < d; ++k) c[k] += S.pts[i][k] / static_cast<double>(d);
      }
      auto along = [&](double t) {
        std::vector<double> p(d);
        for (std::size_t k = 0; k < d; ++k) p[k] = c[k] + t * (S.pts[hi][k] - c[k]);
        return project(p);
      };
      const auto xr = along(-1.0);
      const double fr = f(xr);
      ++used;
      if (fr < S.vals[lo]) {
        const auto xe = along(-2.0);
        const double fe = f(xe);
        ++used;
        if (fe < fr) {
          S.pts[hi] = xe;
          S.vals[hi] = fe;
        } else {
          S.pts[hi] = xr;
          S.vals[hi] = fr;
        }
      } else if (fr < S.vals[nh]) {
        S.pts[hi] = xr;
        S.vals[hi] = fr;
      } else {
        const bool outside = fr < S.vals[hi];
        const auto xc = along(outside ? -0.5 : 0.5);
        const double fc = f(xc);
        ++used;
        if (fc < (outside ? fr : S.vals[hi])) {
          S.pts[hi] = xc;
          S.vals[hi] = fc;
        } else {
          for (std::size_t i = 0; i <= d; ++i) {
            if (i == lo) continue;
            for (std::size_t k = 0; k < d; ++k) {
              S.pts[i][k] = S.pts[lo][k] + 0.5 * (S.pts[i][k] - S.pts[lo][k]);
            }
            S.vals[i] = f(S.pts[i]);
            ++used;
          }
        }
      }
    }
    const auto it = std::min_element(S.vals.begin(), S.vals.end());
    const auto idx = static_cast<std::size_t>(it - S.vals.begin());
    if (S.vals[idx] <= best_val) {
      best_val = S.vals[idx];
      best = S.pts[idx];
    }
  }
  return best;
}

struct Candidate {
  BridgePlan plan;
  ConstraintReport report;
  double objective = kInf;
  double score = 0.0;
  std::vector<double> key;  // lexicographic parameter order
};

std::vector<double> param_key(const BridgePlan& p) {
  std::vector<double> k;
  for (const BridgeSide* s : {&p.left, &p.right}) {
    k.insert(k.end(), {s->params.alpha_deg, s->slide_mm, s->params.l_ot, s->params.l_it,
                       s->params.r});
  }
  return k;
}

}  // namespace

double ParamRange::clamp(double v) const { return std::clamp(v, lo, std::max(lo, hi)); }

void SideSpec::validate() const {
  auto check = [](const ParamRange& r, const char* name) {
    if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.hi < r.lo) {
      throw InvalidArgument(std::string("invalid bounds for ") + name);
    }
  };
  check(alpha_deg, "alpha_deg");
  check(slide_mm, "slide_mm");
  check(l_ot, "l_ot");
  if (l_ot.lo < 0.0) throw InvalidArgument("l_ot bounds must be >= 0");
  if (kind == TrajectoryKind::Curved) {
    check(l_it, "l_it");
    check(r, "r");
    if (!(l_it.lo > 0.0) || !(r.lo > 0.0)) {
      throw InvalidArgument("Curved side needs l_it > 0 and r > 0 bounds");
    }
  }
}

void PlannerConfig::validate() const {
  if (!(eps_meet > 0.0)) throw InvalidArgument("eps_meet must be positive");
  if (!(r_min > 0.0)) throw InvalidArgument("r_min must be positive");
  if (!(theta_lo >= 0.0 && theta_hi <= 180.0 && theta_lo <= theta_hi)) {
    throw InvalidArgument("theta band must lie within [0, 180]");
  }
  if (!(sample_step > 0.0)) throw InvalidArgument("sample_step must be positive");
  if (grid_points < 2 || refine_seeds < 1) {
    throw InvalidArgument("grid_points >= 2 and refine_seeds >= 1 required");
  }
  tool.validate();
}

double ConstraintReport::margin(const std::string& constraint) const {
  for (const auto& d : details) {
    if (d.constraint == constraint) return d.margin;
  }
  throw InvalidArgument("unknown constraint '" + constraint + "'");
}

ConstraintReport check_constraints(const VertebraModel& model, const BmdGrid& grid,
                                   const BridgePlan& plan, const ToolSpec& tool,
                                   const PlannerConfig& cfg) {
  if (plan.frame != model.frame) {
    throw FrameError("plan frame '" + plan.frame + "' does not match model frame '" +
                     model.frame + "'");
  }
  return report_from(compute_margins(model, grid, plan, tool, cfg));
}

EntryPose side_entry(const VertebraModel& model, const std::string& corridor, BendSide bend,
                     double alpha_deg, double slide_mm) {
  const Capsule& c = model.corridors[static_cast<std::size_t>(model.corridor_index(corridor))];
  return EntryPose::axial(c.entry + slide_mm * c.axis, alpha_deg, bend_sign(model, c, bend));
}

BridgeSide make_side(const VertebraModel& model, const std::string& corridor, BendSide bend,
                     const SideParams& params, double slide_mm) {
  BridgeSide side;
  side.entry = side_entry(model, corridor, bend, params.alpha_deg, slide_mm);
  side.params = params;
  side.corridor = model.corridor_index(corridor);
  side.slide_mm = slide_mm;
  return side;
}

BridgePlan solve_bridge(const VertebraModel& model, const BmdGrid& grid, const SideSpec& left,
                        const SideSpec& right, const PlannerConfig& cfg, SolveStats* stats) {
  cfg.validate();
  left.validate();
  right.validate();
  if (left.corridor == right.corridor) {
    throw InvalidArgument("both sides use the same corridor");
  }
  const SearchSpace space(model, grid, left, right, cfg);
  const std::size_t d = space.dims.size();
  int evals = 0;

  // Coarse grid.
  int per_dim = cfg.grid_points;
  if (d > 0) {
    const int cap = std::max(
        2, static_cast<int>(std::floor(std::pow(static_cast<double>(cfg.grid_budget),
                                                1.0 / static_cast<double>(d)) + 1e-9)));
    per_dim = std::min(per_dim, cap);
  }
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= static_cast<std::size_t>(per_dim);

  std::vector<std::pair<double, std::size_t>> grid_vals;
  std::vector<std::vector<double>> grid_pts;
  grid_pts.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::vector<double> x(d);
    std::size_t rem = idx;
    for (std::size_t k = 0; k < d; ++k) {
      x[k] = static_cast<double>(rem % per_dim) / static_cast<double>(per_dim - 1);
      rem /= per_dim;
    }
    grid_vals.emplace_back(space.objective(x), idx);
    ++evals;
    grid_pts.push_back(std::move(x));
  }
  std::sort(grid_vals.begin(), grid_vals.end());

  std::vector<std::vector<double>> seeds;
  for (std::size_t i = 0; i < grid_vals.size() && static_cast<int>(seeds.size()) < cfg.refine_seeds;
       ++i) {
    seeds.push_back(grid_pts[grid_vals[i].second]);
  }
  if (d > 0) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < cfg.random_seeds; ++i) {
      std::vector<double> x(d);
      for (auto& v : x) v = u(rng);
      seeds.push_back(std::move(x));
    }
  }

  // Local refinement; each seed is independent, results are reduced in seed order.
  auto refine = [&](const std::vector<double>& x0, int* n) {
    return nelder_mead(space, x0, cfg.max_refine_evals, n);
  };
  std::vector<std::vector<double>> refined(seeds.size());
  std::vector<int> counts(seeds.size(), 0);
  if (cfg.parallel && seeds.size() > 1) {
    std::vector<std::future<std::vector<double>>> jobs;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      jobs.push_back(std::async(std::launch::async, refine, seeds[i], &counts[i]));
    }
    for (std::size_t i = 0; i < seeds.size(); ++i) refined[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < seeds.size(); ++i) refined[i] = refine(seeds[i], &counts[i]);
  }
  for (int c : counts) evals += c;

  std::vector<Candidate> candidates;
  for (const auto& x : refined) {
    const auto plan = space.build(x, nullptr);
    if (!plan) continue;
    Candidate c;
    c.plan = *plan;
    c.report = check_constraints(model, grid, c.plan, cfg.tool, cfg);
    c.objective = space.objective(x);
    c.key = param_key(c.plan);
    if (c.report.feasible() && c.plan.tip_gap <= cfg.eps_meet) {
      c.score = score_plan(grid, c.plan, cfg.sample_step);
    }
    candidates.push_back(std::move(c));
  }

  std::vector<const Candidate*> feasible;
  for (const auto& c : candidates) {
    if (c.report.feasible() && c.plan.tip_gap <= cfg.eps_meet) feasible.push_back(&c);
  }
  if (stats) {
    stats->evaluations = evals;
    stats->candidates = static_cast<int>(candidates.size());
    stats->feasible_candidates = static_cast<int>(feasible.size());
  }

  if (feasible.empty()) {
    if (candidates.empty()) {
      throw InvalidArgument("no candidate satisfies the sweep cap l_it <= pi * r");
    }
    const Candidate* best = &candidates.front();
    for (const auto& c : candidates) {
      if (c.objective < best->objective ||
          (c.objective == best->objective && c.key < best->key)) {
        best = &c;
      }
    }
    throw NoFeasiblePlan("no feasible plan with tip gap <= " + std::to_string(cfg.eps_meet) +
                             " mm (best gap " + std::to_string(best->plan.tip_gap) + " mm)",
                         best->plan, best->report);
  }

  double best_gap = kInf;
  for (const auto* c : feasible) best_gap = std::min(best_gap, c->plan.tip_gap);
  const Candidate* chosen = nullptr;
  for (const auto* c : feasible) {
    if (c->plan.tip_gap > best_gap + kGapTie) continue;
    if (chosen == nullptr) {
      chosen = c;
      continue;
    }
    if (c->score > chosen->score + kScoreTie) {
      chosen = c;
    } else if (std::abs(c->score - chosen->score) <= kScoreTie) {
      if (c->plan.tip_gap < chosen->plan.tip_gap ||
          (c->plan.tip_gap == chosen->plan.tip_gap && c->key < chosen->key)) {
        chosen = c;
      }
    }
  }
  return chosen->plan;
}

double score_plan(const BmdGrid& grid, const BridgePlan& plan, double step) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const BridgeSide* s : {&plan.left, &plan.right}) {
    const BmdProfile prof = path_bmd_profile(grid, sample_path(s->entry, s->params, step), step);
    for (double v : prof.samples) sum += v;
    n += prof.samples.size();
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

void FpsSpec::validate() const {
  if (!(od > id) || !(id > 0.0) || !(l_r > 0.0) || !(l_f > 0.0)) {
    throw InvalidArgument("FPS requires od > id > 0 and positive lengths");
  }
}

FitReport check_fps_fit(const BridgePlan& plan, const FpsSpec& fps, const VertebraModel* model) {
  fps.validate();
  auto fit = [&](const BridgeSide& s) {
    SideFit f;
    f.rigid_ok = fps.l_r <= s.params.l_ot;
    f.length_delta = s.params.length() - fps.total_length();
    if (model != nullptr && s.corridor >= 0 &&
        s.corridor < static_cast<int>(model->corridors.size())) {
      f.diameter_ok =
          2.0 * model->corridors[static_cast<std::size_t>(s.corridor)].radius >= fps.od;
    }
    return f;
  };
  return {fit(plan.left), fit(plan.right)};
}

}  // namespace absf

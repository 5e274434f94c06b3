#include "asopt/optimizer.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "asopt/error.hpp"

namespace asopt {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void OptimizerConfig::validate() const {
  if (max_iters < 0) throw ValidationError("max_iters must be >= 0");
  if (!(step_init > 0.0)) throw ValidationError("step_init must be positive");
  if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw ValidationError("armijo c1 must be in (0, 1)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ValidationError("backtrack factor must be in (0, 1)");
  if (!(step_tol > 0.0)) throw ValidationError("step tolerance must be positive");
  if (!(stability_margin > 0.0)) throw ValidationError("stability margin must be positive");
  if (max_backtracks < 1) throw ValidationError("max_backtracks must be >= 1");
  if (multistart < 0) throw ValidationError("multistart count must be >= 0");
  if (pade_order < 1 || pade_order > kMaxPadeOrder) throw ValidationError("Pade order must be in [1, 12]");
}

const char* to_string(OptStatus s) {
  switch (s) {
    case OptStatus::Converged: return "converged";
    case OptStatus::MaxIters: return "max_iters";
    case OptStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

Objective::Objective(const StateSpace& grid, const Droops& droops, const LimitSet& limits,
                     const PerfWeights& weights, const AlphaParams& shape, int pade_order, double stability_margin)
    : grid_(augment_grid(grid, weights)),
      droops_(droops),
      limits_(limits),
      shape_(shape),
      pade_order_(pade_order),
      margin_(stability_margin) {
  droops_.validate();
  limits_.validate();
}

std::vector<bool> Objective::free() const {
  const auto mask = free_mask(shape_);
  return std::vector<bool>(mask.begin(), mask.end());
}

ClosedLoop Objective::loop(const Vector& x) const {
  ClosedLoop cl = close_loop(grid_, build_tdes(unpack(x, shape_), droops_, pade_order_));
  cl.alpha = x;
  return cl;
}

bool Objective::feasible(const Vector& x) const {
  try {
    return check_feasible(unpack(x, shape_), droops_, limits_).empty();
  } catch (const ValidationError&) {
    return false;
  }
}

double Objective::cost(const Vector& x) const {
  if (!feasible(x)) return kInf;
  try {
    const ClosedLoop cl = loop(x);
    if (!is_hurwitz(cl.A, margin_)) return kInf;
    return h2_norm_sq(cl);
  } catch (const NumericalError&) {
    return kInf;
  } catch (const ValidationError&) {
    return kInf;
  }
}

GradientResult Objective::gradient(const Vector& x) const {
  return h2_gradient([this](const Vector& v) { return loop(v); }, x, free());
}

namespace {

OptRun descend(const Objective& obj, const OptimizerConfig& cfg, const Droops& droops, const LimitSet& limits,
               const AlphaParams& alpha0) {
  const AlphaParams& shape = obj.shape();
  Vector x = pack(project(alpha0, droops, limits));
  if (!obj.feasible(x)) {
    throw NumericalError("infeasible", "starting point violates the device limits after projection");
  }
  double J = obj.cost(x);
  if (!std::isfinite(J)) {
    const ClosedLoop cl = obj.loop(x);
    if (is_hurwitz(cl.A, cfg.stability_margin)) h2_analysis(cl);  // surfaces a solver failure as itself
    throw NumericalError("unstable",
                         "closed loop at the starting point is unstable; review the grid scenario and droops");
  }

  OptRun run;
  run.status = OptStatus::MaxIters;
  double eta = cfg.step_init;
  double last_step = 0.0;
  bool stop = false;
  for (int iter = 0;; ++iter) {
    const Vector g = obj.gradient(x).grad;
    run.history.push_back({iter, x, J, g.norm(), last_step});
    if (stop) break;
    if (iter >= cfg.max_iters) {
      run.status = OptStatus::MaxIters;
      break;
    }
    double trial = iter == 0 ? cfg.step_init : std::min(4.0 * eta, 1e3);
    bool accepted = false;
    Vector cand;
    double j_cand = kInf;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
      cand = pack(project(unpack(x - trial * g, shape), droops, limits));
      const Vector d = cand - x;
      if (d.norm() == 0.0) break;
      j_cand = obj.cost(cand);
      if (j_cand <= J + cfg.armijo_c1 * g.dot(d)) {
        accepted = true;
        break;
      }
      trial *= cfg.backtrack;
    }
    if (!accepted) {
      run.status = OptStatus::Converged;
      break;
    }
    last_step = (cand - x).norm();
    x = cand;
    J = j_cand;
    eta = trial;
    if (last_step < cfg.step_tol) {
      run.status = OptStatus::Converged;
      stop = true;
    }
  }
  run.alpha_star = unpack(x, shape);
  run.J_star = J;
  return run;
}

// Uniform draw from a box that contains the linear feasible set, then
// projected onto it.
AlphaParams random_start(const AlphaParams& shape, const LimitSet& limits, std::mt19937_64& rng) {
  const auto& g = limits.grid_code;
  const auto& d = limits.device;
  auto unif = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  AlphaParams a;
  if (shape.fcr) {
    const double t_i = unif(kMinSegment, g.t_i_max_fcr);
    a.fcr = FcrParams{t_i, unif(t_i + kMinSegment, g.t_a_max_fcr)};
  }
  if (shape.ffr) {
    const double t_a = unif(kMinSegment, g.t_a_max_ffr);
    const double t_d = t_a + unif(g.t_d_min_offset_ffr, std::max(g.t_d_min_offset_ffr, d.t_d_max_ffr));
    const double t_r = t_d + unif(g.t_r_min_offset_ffr, std::max(g.t_r_min_offset_ffr, d.t_r_max_ffr));
    a.ffr = FfrParams{t_a, t_d, t_r, unif(1.0, g.x_max_ffr)};
  }
  if (shape.aux) {
    const double wl = unif(g.omega_min, g.omega_max);
    const double cap = d.m_max_p / limits.normalization.df_max;
    a.aux = AuxParams{wl, unif(wl, g.omega_max), unif(-cap, cap)};
  }
  if (shape.vq) {
    const double t90 = unif(kMinSegment, g.t90_max_vq);
    a.vq = VqParams{t90, unif(t90, g.t100_max_vq)};
  }
  return a;
}

}  // namespace

OptRun optimize(const StateSpace& grid, const Droops& droops, const LimitSet& limits, const PerfWeights& weights,
                const OptimizerConfig& cfg, const AlphaParams& alpha0) {
  cfg.validate();
  const Objective obj(grid, droops, limits, weights, alpha0, cfg.pade_order, cfg.stability_margin);
  OptRun best = descend(obj, cfg, droops, limits, alpha0);
  if (cfg.multistart > 0) {
    std::mt19937_64 rng(cfg.seed);
    for (int k = 0; k < cfg.multistart; ++k) {
      const AlphaParams start = random_start(alpha0, limits, rng);
      try {
        OptRun run = descend(obj, cfg, droops, limits, start);
        if (run.J_star < best.J_star) best = std::move(run);
      } catch (const NumericalError&) {
        // unusable start (unstable or outside the superposition limit)
      }
    }
  }
  return best;
}

namespace {

double pct(double before, double after) { return before == 0.0 ? 0.0 : 100.0 * (before - after) / before; }

}  // namespace

ComparisonReport compare_baseline(const StateSpace& grid, const Droops& droops, const LimitSet& limits,
                                  const PerfWeights& weights, const AlphaParams& alpha_star, int pade_order,
                                  const SimulationSettings& sim) {
  ComparisonReport rep;
  rep.alpha_star = alpha_star;
  rep.alpha0 = baseline_alpha(limits, alpha_star);
  const ExtendedGrid ext = augment_grid(grid, weights);
  const ClosedLoop cl0 = close_loop(ext, build_tdes(rep.alpha0, droops, pade_order));
  const ClosedLoop cls = close_loop(ext, build_tdes(alpha_star, droops, pade_order));
  const DisturbanceResult r0 = simulate_disturbance(cl0, sim.disturbance, sim.dt, sim.horizon);
  const DisturbanceResult rs = simulate_disturbance(cls, sim.disturbance, sim.dt, sim.horizon);
  rep.metrics0 = r0.metrics;
  rep.metrics_star = rs.metrics;
  rep.J0 = r0.metrics.J;
  rep.J_star = rs.metrics.J;
  rep.J_reduction_pct = pct(rep.J0, rep.J_star);
  rep.rocof_reduction_pct = pct(r0.metrics.rocof_max, rs.metrics.rocof_max);
  rep.nadir_improvement_pct = pct(std::abs(r0.metrics.nadir), std::abs(rs.metrics.nadir));
  rep.v_peak_reduction_pct = pct(r0.metrics.v_peak, rs.metrics.v_peak);
  rep.damping0 = dominant_damping(cl0, limits.grid_code.omega_min, limits.grid_code.omega_max);
  rep.damping_star = dominant_damping(cls, limits.grid_code.omega_min, limits.grid_code.omega_max);
  return rep;
}

SequentialResult sequential_po(const StateSpace& grid, const std::vector<ReserveUnit>& units,
                               const PerfWeights& weights, const OptimizerConfig& cfg) {
  if (units.empty()) throw ValidationError("sequential_po(): no reserve units");
  SequentialResult res;
  for (const auto& u : units) res.final_alpha.push_back(project(u.start, u.droops, u.limits));
  for (std::size_t i = 0; i < units.size(); ++i) {
    StateSpace effective = grid;
    for (std::size_t j = 0; j < units.size(); ++j) {
      if (j == i) continue;
      effective = close_into_grid(effective, build_tdes(res.final_alpha[j], units[j].droops, cfg.pade_order));
    }
    if (!(spectral_abscissa(effective.A) < 0.0)) {
      throw NumericalError("unstable", "effective grid is unstable in cycle " + std::to_string(i + 1));
    }
    OptRun run;
    try {
      run = optimize(effective, units[i].droops, units[i].limits, weights, cfg, res.final_alpha[i]);
    } catch (const NumericalError& e) {
      throw NumericalError(e.kind(), "cycle " + std::to_string(i + 1) + ": " + e.what());
    }
    res.final_alpha[i] = run.alpha_star;
    res.cycle_J.push_back(run.J_star);
    res.runs.push_back(std::move(run));
  }
  return res;
}

}  // namespace asopt

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "asopt/lti.hpp"
#include "asopt/services.hpp"

namespace asopt {

struct OptimizerConfig {
  int max_iters = 200;
  double step_init = 1.0;
  double armijo_c1 = 1e-4;
  double backtrack = 0.5;
  double step_tol = 1e-4;
  double stability_margin = 1e-6;
  int max_backtracks = 60;
  int multistart = 0;
  std::uint64_t seed = 0;
  int pade_order = kDefaultPadeOrder;

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  Vector alpha;  // flat layout, see kParamNames
  double J = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;  // |alpha_k - alpha_{k-1}|
};

enum class OptStatus { Converged, MaxIters, Infeasible };
const char* to_string(OptStatus s);

struct OptRun {
  AlphaParams alpha_star;
  double J_star = 0.0;
  std::vector<IterationRecord> history;
  OptStatus status = OptStatus::Converged;
};

/// J(alpha) for one grid, unit and weight set. Infeasible or unstable
/// parameter vectors cost +infinity.
class Objective {
 public:
  Objective(const StateSpace& grid, const Droops& droops, const LimitSet& limits, const PerfWeights& weights,
            const AlphaParams& shape, int pade_order, double stability_margin = 1e-6);

  ClosedLoop loop(const Vector& x) const;
  double cost(const Vector& x) const;
  GradientResult gradient(const Vector& x) const;
  bool feasible(const Vector& x) const;
  const AlphaParams& shape() const { return shape_; }
  std::vector<bool> free() const;

 private:
  ExtendedGrid grid_;
  Droops droops_;
  LimitSet limits_;
  AlphaParams shape_;
  int pade_order_;
  double margin_;
};

/// Projected gradient descent with Armijo backtracking from alpha0 (projected
/// first if needed). Throws NumericalError("unstable") when the starting loop
/// is unstable and ("infeasible") when no feasible start exists.
OptRun optimize(const StateSpace& grid, const Droops& droops, const LimitSet& limits, const PerfWeights& weights,
                const OptimizerConfig& cfg, const AlphaParams& alpha0);

struct SimulationSettings {
  double dt = 0.01;
  double horizon = 60.0;
  std::array<double, 2> disturbance{-1.0, -1.0};  // [p_d, q_d]: load increase
};

struct ComparisonReport {
  AlphaParams alpha0;
  AlphaParams alpha_star;
  double J0 = 0.0;
  double J_star = 0.0;
  double J_reduction_pct = 0.0;
  DisturbanceMetrics metrics0;
  DisturbanceMetrics metrics_star;
  double rocof_reduction_pct = 0.0;
  double nadir_improvement_pct = 0.0;
  double v_peak_reduction_pct = 0.0;
  std::optional<double> damping0;      // dominant oscillatory mode in the
  std::optional<double> damping_star;  // grid-code band, if any
};

ComparisonReport compare_baseline(const StateSpace& grid, const Droops& droops, const LimitSet& limits,
                                  const PerfWeights& weights, const AlphaParams& alpha_star, int pade_order,
                                  const SimulationSettings& sim = {});

struct ReserveUnit {
  std::string name;
  Droops droops;
  LimitSet limits;
  AlphaParams start;
};

struct SequentialResult {
  std::vector<OptRun> runs;      // one per unit, in order
  std::vector<double> cycle_J;   // closed-loop J after each unit's turn
  std::vector<AlphaParams> final_alpha;
};

/// One pass of perceive-and-optimize over units at the same terminal: each
/// unit optimizes against the grid with every other unit's current desired
/// response closed in.
SequentialResult sequential_po(const StateSpace& grid, const std::vector<ReserveUnit>& units,
                               const PerfWeights& weights, const OptimizerConfig& cfg);

}  // namespace asopt

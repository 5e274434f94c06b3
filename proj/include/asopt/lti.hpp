#pragma once

#include <array>
#include <functional>
#include <optional>

#include "asopt/services.hpp"
#include "asopt/state_space.hpp"

namespace asopt {

/// Performance weights R = diag(r_fdot, r_f, r_v) and the pole of the
/// approximate integrators.
struct PerfWeights {
  double r_fdot = 1.0;
  double r_f = 100.0;
  double r_v = 1.0;
  double epsilon = 1e-3;

  void validate() const;
};

/// Grid model with two appended filter states xi' = -eps xi + [df; dv].
/// `sys` keeps the measured outputs [df; dv]; `performance` maps the
/// extended state to R^{1/2} [df - eps xi_f; xi_f; xi_v].
struct ExtendedGrid {
  StateSpace sys;
  Matrix performance;
  PerfWeights weights;
};

ExtendedGrid augment_grid(const StateSpace& grid, const PerfWeights& w);

/// Closed loop of an extended grid and a desired response:
///   A = [A_e, B_e C_t; B_t C_e, A_t],  B = [B_e; 0],  C = [R^{1/2} E, 0].
struct ClosedLoop {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix measurement;  // [df; dv] as a function of the closed-loop state
  Matrix injection;    // [dp; dq] from the desired response
  Eigen::Index grid_states = 0;  // n_g + 2
  Vector alpha;  // parameters the loop was built from (may be empty)
};

ClosedLoop close_loop(const ExtendedGrid& grid, const StateSpace& tdes);

/// Positive feedback of `grid` with `tdes` (both 2x2) as a new 2x2 grid
/// model seen by a further unit at the same terminal.
StateSpace close_into_grid(const StateSpace& grid, const StateSpace& tdes);

/// Solves A P + P A^T + Q = 0 for Hurwitz A by complex Schur
/// back-substitution. Falls back to the Kronecker system for n <= 30 when the
/// residual check fails. Throws NumericalError("unstable") for non-Hurwitz A.
Matrix lyap_solve(const Matrix& a, const Matrix& q);

bool is_hurwitz(const Matrix& a, double margin = 1e-6);

struct H2Analysis {
  double J = 0.0;       // trace(C P C^T)
  double J_dual = 0.0;  // trace(B^T Q B)
  Matrix P;             // controllability Gramian
  Matrix Q;             // observability Gramian
};

/// Both Gramians and both trace expressions of the squared H2 norm.
/// Throws NumericalError("unstable") or ("duality") on failure.
H2Analysis h2_analysis(const Matrix& a, const Matrix& b, const Matrix& c);
H2Analysis h2_analysis(const ClosedLoop& cl);

/// Squared H2 norm; +infinity when the loop is not Hurwitz.
double h2_norm_sq(const ClosedLoop& cl);

using LoopBuilder = std::function<ClosedLoop(const Vector&)>;

struct GradientResult {
  double J = 0.0;
  Vector grad;
  double max_bc_term = 0.0;  // largest |B- or C-sensitivity trace term|
};

/// Trace-formula gradient of J over the entries of `alpha` flagged in
/// `free`; fixed entries get exactly zero. Matrix sensitivities come from
/// central differences of `builder`, falling back to a one-sided difference
/// when one side leaves the builder's domain.
GradientResult h2_gradient(const LoopBuilder& builder, const Vector& alpha, const std::vector<bool>& free);

struct DisturbanceMetrics {
  double rocof_max = 0.0;  // max |dfdot|
  double nadir = 0.0;      // min df
  double v_peak = 0.0;     // max |dv|
  double J = 0.0;
};

struct DisturbanceResult {
  TimeSeries traces;  // columns df, dfdot, dv, dp, dq
  DisturbanceMetrics metrics;
};

/// Step disturbance w = [p_d, q_d] entering alongside the injections.
/// Throws NumericalError("unstable") for a non-Hurwitz loop.
DisturbanceResult simulate_disturbance(const ClosedLoop& cl, const std::array<double, 2>& w_step, double dt,
                                       double horizon);

/// Damping ratio of the dominant oscillatory mode: among eigenvalues with
/// imaginary part in [omega_lo, omega_hi], the one whose term in the
/// disturbance-to-[df; dv] response has the largest resonant peak
/// |residue| / |Re(lambda)|. Nothing if no eigenvalue lies in the band.
std::optional<double> dominant_damping(const ClosedLoop& cl, double omega_lo, double omega_hi);

}  // namespace asopt

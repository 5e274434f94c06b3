#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asopt/pwl_tf.hpp"
#include "asopt/state_space.hpp"

namespace asopt {

struct FcrParams {
  double t_i = 0.0;  // initial delay [s]
  double t_a = 0.0;  // full activation time [s]
};

struct FfrParams {
  double t_a = 0.0;  // activation time [s]
  double t_d = 0.0;  // end of support [s]
  double t_r = 0.0;  // end of recovery [s]
  double x = 1.0;    // overdelivery factor
};

struct AuxParams {
  double omega_l = 0.0;  // lower band edge [rad/s]
  double omega_h = 0.0;  // upper band edge [rad/s]
  double m = 0.0;        // resonance magnitude, signed
};

struct VqParams {
  double t90 = 0.0;   // 90% reactive activation [s]
  double t100 = 0.0;  // 100% reactive activation [s]
};

/// Parameter vector of the desired response. A disengaged product is nullopt.
struct AlphaParams {
  std::optional<FcrParams> fcr;
  std::optional<FfrParams> ffr;
  std::optional<AuxParams> aux;
  std::optional<VqParams> vq;
};

/// Flat layout used by the optimizer and the gradient.
inline constexpr std::size_t kNumParams = 11;
enum ParamIndex : std::size_t {
  kFcrTi, kFcrTa, kFfrTa, kFfrTd, kFfrTr, kFfrX, kAuxOmegaL, kAuxOmegaH, kAuxM, kVqT90, kVqT100
};
inline constexpr std::array<std::string_view, kNumParams> kParamNames = {
    "fcr.t_i", "fcr.t_a", "ffr.t_a", "ffr.t_d", "ffr.t_r", "ffr.x",
    "aux.omega_l", "aux.omega_h", "aux.m", "vq.t90", "vq.t100"};

/// Entries of disabled products are zero.
Vector pack(const AlphaParams& alpha);
/// Inverse of pack; which products exist is taken from `shape`.
AlphaParams unpack(const Vector& values, const AlphaParams& shape);
/// True for entries that belong to enabled products.
std::array<bool, kNumParams> free_mask(const AlphaParams& alpha);

/// Droop gains: FCR droop, FFR gain, voltage droop. Negative by convention.
struct Droops {
  double d_p = -0.05;
  double k_p = -0.04;
  double d_q = -0.04;

  /// Throws ValidationError when a gain is zero or not finite.
  void validate() const;
};

struct GridCodeLimits {
  double t_i_max_fcr = 2.0;
  double t_a_max_fcr = 30.0;
  double t_a_max_ffr = 2.0;
  double t_d_min_offset_ffr = 8.0;
  double t_r_min_offset_ffr = 10.0;
  double x_max_ffr = 1.35;
  double omega_min = 2.0 * 3.14159265358979323846 * 0.1;
  double omega_max = 2.0 * 3.14159265358979323846 * 3.0;
  double t90_max_vq = 5.0;
  double t100_max_vq = 60.0;
};

/// Device limits of one reserve unit, already multiplied by the
/// normalization amplitudes (r = R * df_max etc.). Defaults: reserve unit 1.
struct DeviceLimits {
  double r_max_p = 1.11;  // p.u./s
  double r_max_q = 15.0;  // p.u./s
  double m_max_p = 0.7;   // p.u.
  double t_d_max_ffr = 20.0;  // longest support duration t_d - t_a [s]
  double t_r_max_ffr = 20.0;  // longest recovery duration t_r - t_d [s]
  /// Bound on |m| per unit of input. Default: m_max_p / df_max minus the
  /// FCR and FFR capacities of the enabled products.
  std::optional<double> m_aux_cap;
  /// Enforce the superposed FCR+FFR peak plus |m| against m_max_p.
  bool superposition_check = true;
};

struct Normalization {
  double df_max = 0.01;
  double dv_max = 0.1;
};

struct LimitSet {
  GridCodeLimits grid_code;
  DeviceLimits device;
  Normalization normalization;

  /// Throws ValidationError unless every limit is positive and the
  /// oscillation band is non-empty.
  void validate() const;
};

PwlCurve fcr_curve(const FcrParams& p, double d_p);
PwlCurve ffr_curve(const FfrParams& p, double k_p);
PwlCurve vq_curve(const VqParams& p, double d_q);
/// m (w_h - w_l) s / (s^2 + (w_h - w_l) s + w_l w_h).
RationalTf aux_tf(const AuxParams& p);

/// 2x2 desired response: inputs [df, dv], outputs [dp, dq]. Channel (1,1) is
/// the parallel sum of the enabled FCR, FFR and AUX realizations, channel
/// (2,2) the VQ realization; off-diagonal entries are zero.
StateSpace build_tdes(const AlphaParams& alpha, const Droops& droops, int pade_order = kDefaultPadeOrder);

/// Minimum grid-code boundary point: slowest admissible FCR, FFR and VQ,
/// zero auxiliary magnitude. Products disabled in `enabled` stay disabled.
AlphaParams baseline_alpha(const LimitSet& limits, const AlphaParams& enabled);
AlphaParams baseline_alpha(const LimitSet& limits);

/// a . alpha <= bound over the flat parameter layout.
struct LinearConstraint {
  std::string id;
  std::array<double, kNumParams> coeffs{};
  double bound = 0.0;
};

struct Violation {
  std::string id;
  double slack = 0.0;  // negative: amount by which the constraint is violated
};

/// Linear part of the grid-code and device-level sets for the enabled products.
std::vector<LinearConstraint> linear_constraints(const AlphaParams& shape, const Droops& droops,
                                                 const LimitSet& limits);

/// Superposed FCR+FFR peak plus |m|, scaled to p.u., minus m_max_p.
/// Non-positive when the superposition constraint holds.
double superposition_margin(const AlphaParams& alpha, const Droops& droops, const LimitSet& limits);

/// Every violated constraint (slack < -tol); empty means feasible.
std::vector<Violation> check_feasible(const AlphaParams& alpha, const Droops& droops, const LimitSet& limits,
                                      double tol = 1e-9);

/// Euclidean projection onto the linear constraints. The superposition
/// constraint is not part of the projection. Throws NumericalError
/// ("infeasible") when the constraint set is empty.
AlphaParams project(const AlphaParams& alpha, const Droops& droops, const LimitSet& limits);

/// Exact Euclidean projection of `point` onto {x : G x <= h} for small
/// dense problems, by searching active sets in order of size.
Vector project_polyhedron(const Vector& point, const Matrix& g, const Vector& h);

}  // namespace asopt

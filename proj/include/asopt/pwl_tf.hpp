#pragma once

#include <complex>
#include <vector>

#include "asopt/state_space.hpp"

namespace asopt {

/// Minimum length of any time segment of a capability curve (seconds).
inline constexpr double kMinSegment = 1e-3;
inline constexpr int kDefaultPadeOrder = 4;
inline constexpr int kMaxPadeOrder = 12;

struct Breakpoint {
  double time = 0.0;
  double value = 0.0;
};

/// Piecewise-linear time-domain capability curve. Linear between
/// breakpoints, constant after the last one. Starts at (0, 0).
class PwlCurve {
 public:
  /// Throws ValidationError unless there are >= 2 finite breakpoints with
  /// strictly increasing times, the first being (0, 0).
  explicit PwlCurve(std::vector<Breakpoint> points);

  const std::vector<Breakpoint>& breakpoints() const { return points_; }
  double value_at(double t) const;
  double final_value() const { return points_.back().value; }
  double max_abs() const;

 private:
  std::vector<Breakpoint> points_;
};

/// Slope change of a curve at one instant: its Laplace-domain step
/// response is (coefficient / s^2) * exp(-delay * s).
struct DelayTerm {
  double delay = 0.0;
  double coefficient = 0.0;
};

/// Rational transfer function with coefficients in ascending powers of s.
struct RationalTf {
  std::vector<double> num;
  std::vector<double> den;

  RationalTf() = default;
  /// Trims trailing zeros; throws ValidationError when improper or when the
  /// denominator vanishes.
  RationalTf(std::vector<double> numerator, std::vector<double> denominator);

  std::complex<double> operator()(std::complex<double> s) const;
  bool strictly_proper() const { return num.size() < den.size(); }
};

/// One term per nonzero slope change: c_k = slope_after(t_k) - slope_before(t_k).
std::vector<DelayTerm> pwl_to_delay_terms(const PwlCurve& curve);

/// Diagonal (order, order) Pade approximant of exp(-T s). T = 0 gives 1.
RationalTf pade_delay(double delay, int order);

/// Realizes coefficient * (Pade(exp(-delay s)) - 1) / s in real modal form.
/// The result is strictly proper with `order` stable states and DC gain
/// -coefficient * delay. Requires delay > 0.
StateSpace delay_term_ss(double delay, double coefficient, int order);

/// Transfer function whose unit-step response approximates `curve` scaled by
/// 1 / input_step:  T(s) = (1/input_step) * sum_k c_k (Pade_k(s) - 1) / s.
/// Because the slope changes of a curve that ends flat sum to zero this is the
/// same function as sum_k c_k Pade_k(s) / s, but has no pole at the origin.
/// One block of `pade_order` states per breakpoint after t = 0.
StateSpace pwl_step_tf(const PwlCurve& curve, double input_step, int pade_order = kDefaultPadeOrder);

/// Controllable canonical realization of a strictly proper transfer function.
StateSpace tf_to_ss(const RationalTf& tf);

}  // namespace asopt

#pragma once

#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace asopt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Continuous-time LTI system x' = A x + B u, y = C x. Feedthrough is
/// identically zero: every realization in this library is strictly proper.
struct StateSpace {
  Matrix A;
  Matrix B;
  Matrix C;

  StateSpace() = default;
  /// Throws ValidationError on inconsistent dimensions or non-finite entries.
  StateSpace(Matrix a, Matrix b, Matrix c);

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }
};

/// Zero-order-hold discretization of a StateSpace (same C).
struct DiscreteStateSpace {
  Matrix Ad;
  Matrix Bd;
  Matrix C;
  double dt = 0.0;
};

/// Uniformly sampled multi-channel signal; `values` is samples x channels.
struct TimeSeries {
  std::vector<double> t;
  Matrix values;
};

/// Stacks systems block-diagonally: inputs and outputs are concatenated.
StateSpace block_diag(std::span<const StateSpace> parts);

/// Parallel interconnection: all parts share the input vector and their
/// outputs are summed. Input/output counts must agree.
StateSpace parallel(std::span<const StateSpace> parts);

/// C (sI - A)^{-1} B at one complex frequency. Throws NumericalError
/// ("singular") when sI - A is singular.
ComplexMatrix evaluate(const StateSpace& sys, std::complex<double> s);

/// Frequency response C (jwI - A)^{-1} B for each w in `omegas` (rad/s, > 0).
std::vector<ComplexMatrix> freq_response(const StateSpace& sys, std::span<const double> omegas);

/// Static gain -C A^{-1} B. Throws NumericalError when A is singular.
Matrix dc_gain(const StateSpace& sys);

/// Exact ZOH discretization via the exponential of the block [A B; 0 0].
DiscreteStateSpace discretize_zoh(const StateSpace& sys, double dt);

/// Simulates the discretized system from x = 0 for the given input samples
/// (rows = samples). Returns outputs y[k] = C x[k], one row per sample.
Matrix simulate(const DiscreteStateSpace& sys, const Matrix& inputs);

/// Unit step on input `channel`, sampled every `dt` up to `horizon`.
TimeSeries step_response(const StateSpace& sys, Eigen::Index channel, double dt, double horizon);

/// Largest real part of the spectrum of a square matrix.
double spectral_abscissa(const Matrix& a);

}  // namespace asopt

#include "asopt/state_space.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "asopt/error.hpp"

namespace asopt {

StateSpace::StateSpace(Matrix a, Matrix b, Matrix c) : A(std::move(a)), B(std::move(b)), C(std::move(c)) {
  if (A.rows() != A.cols()) throw ValidationError("state matrix must be square");
  if (B.rows() != A.rows()) throw ValidationError("input matrix row count must equal state count");
  if (C.cols() != A.rows()) throw ValidationError("output matrix column count must equal state count");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite()) {
    throw ValidationError("state-space matrices must be finite");
  }
}

StateSpace block_diag(std::span<const StateSpace> parts) {
  Eigen::Index n = 0, m = 0, p = 0;
  for (const auto& s : parts) {
    n += s.states();
    m += s.inputs();
    p += s.outputs();
  }
  Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, m), c = Matrix::Zero(p, n);
  Eigen::Index on = 0, om = 0, op = 0;
  for (const auto& s : parts) {
    a.block(on, on, s.states(), s.states()) = s.A;
    b.block(on, om, s.states(), s.inputs()) = s.B;
    c.block(op, on, s.outputs(), s.states()) = s.C;
    on += s.states();
    om += s.inputs();
    op += s.outputs();
  }
  return StateSpace(std::move(a), std::move(b), std::move(c));
}

StateSpace parallel(std::span<const StateSpace> parts) {
  if (parts.empty()) throw ValidationError("parallel(): no systems given");
  const Eigen::Index m = parts.front().inputs(), p = parts.front().outputs();
  Eigen::Index n = 0;
  for (const auto& s : parts) {
    if (s.inputs() != m || s.outputs() != p) {
      throw ValidationError("parallel(): input/output counts differ");
    }
    n += s.states();
  }
  Matrix a = Matrix::Zero(n, n), b(n, m), c(p, n);
  Eigen::Index off = 0;
  for (const auto& s : parts) {
    a.block(off, off, s.states(), s.states()) = s.A;
    b.middleRows(off, s.states()) = s.B;
    c.middleCols(off, s.states()) = s.C;
    off += s.states();
  }
  return StateSpace(std::move(a), std::move(b), std::move(c));
}

ComplexMatrix evaluate(const StateSpace& sys, std::complex<double> s) {
  const Eigen::Index n = sys.states();
  if (n == 0) return ComplexMatrix::Zero(sys.outputs(), sys.inputs());
  ComplexMatrix m = -sys.A.cast<std::complex<double>>();
  m.diagonal().array() += s;
  Eigen::PartialPivLU<ComplexMatrix> lu(m);
  // PartialPivLU never reports failure; detect singularity from the pivots.
  const double scale = std::max(1.0, sys.A.cwiseAbs().maxCoeff() + std::abs(s));
  if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() <= 1e-13 * scale) {
    throw NumericalError("singular", "sI - A is singular at s = " + std::to_string(s.real()) + "+" +
                                         std::to_string(s.imag()) + "j");
  }
  return sys.C.cast<std::complex<double>>() * lu.solve(sys.B.cast<std::complex<double>>());
}

std::vector<ComplexMatrix> freq_response(const StateSpace& sys, std::span<const double> omegas) {
  std::vector<ComplexMatrix> out;
  out.reserve(omegas.size());
  for (double w : omegas) {
    if (!(w > 0.0)) throw ValidationError("freq_response(): frequencies must be positive");
    out.push_back(evaluate(sys, {0.0, w}));
  }
  return out;
}

Matrix dc_gain(const StateSpace& sys) {
  if (sys.states() == 0) return Matrix::Zero(sys.outputs(), sys.inputs());
  Eigen::FullPivLU<Matrix> lu(sys.A);
  if (!lu.isInvertible()) throw NumericalError("singular", "dc_gain(): state matrix is singular");
  return -sys.C * lu.solve(sys.B);
}

DiscreteStateSpace discretize_zoh(const StateSpace& sys, double dt) {
  if (!(dt > 0.0)) throw ValidationError("discretize_zoh(): dt must be positive");
  const Eigen::Index n = sys.states(), m = sys.inputs();
  Matrix aug = Matrix::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = sys.A * dt;
  aug.topRightCorner(n, m) = sys.B * dt;
  const Matrix e = aug.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m), sys.C, dt};
}

Matrix simulate(const DiscreteStateSpace& sys, const Matrix& inputs) {
  if (inputs.cols() != sys.Bd.cols()) throw ValidationError("simulate(): input channel count mismatch");
  const Eigen::Index samples = inputs.rows();
  Matrix y(samples, sys.C.rows());
  Vector x = Vector::Zero(sys.Ad.rows());
  Vector next(x.size());
  for (Eigen::Index k = 0; k < samples; ++k) {
    y.row(k).noalias() = (sys.C * x).transpose();
    next.noalias() = sys.Ad * x;
    next.noalias() += sys.Bd * inputs.row(k).transpose();
    x.swap(next);
  }
  return y;
}

TimeSeries step_response(const StateSpace& sys, Eigen::Index channel, double dt, double horizon) {
  if (!(dt > 0.0) || !(horizon >= dt)) throw ValidationError("step_response(): need dt > 0 and horizon >= dt");
  if (channel < 0 || channel >= sys.inputs()) throw ValidationError("step_response(): input channel out of range");
  const auto samples = static_cast<Eigen::Index>(std::floor(horizon / dt + 1e-9)) + 1;
  Matrix u = Matrix::Zero(samples, sys.inputs());
  u.col(channel).setOnes();
  TimeSeries ts;
  ts.values = simulate(discretize_zoh(sys, dt), u);
  ts.t.resize(static_cast<std::size_t>(samples));
  for (Eigen::Index k = 0; k < samples; ++k) ts.t[static_cast<std::size_t>(k)] = static_cast<double>(k) * dt;
  return ts;
}

double spectral_abscissa(const Matrix& a) {
  if (a.rows() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(a, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver", "eigenvalue computation did not converge");
  return es.eigenvalues().real().maxCoeff();
}

}  // namespace asopt

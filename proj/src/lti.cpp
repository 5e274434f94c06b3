#include "asopt/lti.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "asopt/error.hpp"

namespace asopt {

void PerfWeights::validate() const {
  for (double r : {r_fdot, r_f, r_v}) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ValidationError("performance weights must be finite and >= 0");
  }
  if (r_fdot + r_f + r_v <= 0.0) throw ValidationError("at least one performance weight must be positive");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ValidationError("epsilon must be positive");
}

namespace {

void require_2x2(const StateSpace& s, const char* what) {
  if (s.inputs() != 2 || s.outputs() != 2) {
    throw ValidationError(std::string(what) + " must have 2 inputs and 2 outputs");
  }
}

// [A1, B1 C2; B2 C1, A2] for two systems in positive feedback.
Matrix feedback_a(const Matrix& a1, const Matrix& b1, const Matrix& c1, const StateSpace& s2) {
  const Eigen::Index n1 = a1.rows(), n2 = s2.states();
  Matrix a(n1 + n2, n1 + n2);
  a.topLeftCorner(n1, n1) = a1;
  a.topRightCorner(n1, n2) = b1 * s2.C;
  a.bottomLeftCorner(n2, n1) = s2.B * c1;
  a.bottomRightCorner(n2, n2) = s2.A;
  return a;
}

}  // namespace

ExtendedGrid augment_grid(const StateSpace& grid, const PerfWeights& w) {
  require_2x2(grid, "grid model");
  w.validate();
  const Eigen::Index n = grid.states();
  Matrix a = Matrix::Zero(n + 2, n + 2);
  a.topLeftCorner(n, n) = grid.A;
  a.bottomLeftCorner(2, n) = grid.C;
  a.bottomRightCorner(2, 2) = -w.epsilon * Matrix::Identity(2, 2);
  Matrix b = Matrix::Zero(n + 2, 2);
  b.topRows(n) = grid.B;
  Matrix c = Matrix::Zero(2, n + 2);
  c.leftCols(n) = grid.C;

  Matrix e = Matrix::Zero(3, n + 2);
  e.row(0).head(n) = grid.C.row(0);
  e(0, n) = -w.epsilon;
  e(1, n) = 1.0;
  e(2, n + 1) = 1.0;
  e.row(0) *= std::sqrt(w.r_fdot);
  e.row(1) *= std::sqrt(w.r_f);
  e.row(2) *= std::sqrt(w.r_v);
  return {StateSpace(std::move(a), std::move(b), std::move(c)), std::move(e), w};
}

ClosedLoop close_loop(const ExtendedGrid& grid, const StateSpace& tdes) {
  const StateSpace& g = grid.sys;
  require_2x2(tdes, "desired response");
  if (g.inputs() != 2 || g.outputs() != 2 || grid.performance.cols() != g.states()) {
    throw ValidationError("extended grid dimensions are inconsistent");
  }
  const Eigen::Index ne = g.states(), nt = tdes.states();
  ClosedLoop cl;
  cl.A = feedback_a(g.A, g.B, g.C, tdes);
  cl.B = Matrix::Zero(ne + nt, 2);
  cl.B.topRows(ne) = g.B;
  cl.C = Matrix::Zero(grid.performance.rows(), ne + nt);
  cl.C.leftCols(ne) = grid.performance;
  cl.measurement = Matrix::Zero(2, ne + nt);
  cl.measurement.leftCols(ne) = g.C;
  cl.injection = Matrix::Zero(2, ne + nt);
  cl.injection.rightCols(nt) = tdes.C;
  cl.grid_states = ne;
  return cl;
}

StateSpace close_into_grid(const StateSpace& grid, const StateSpace& tdes) {
  require_2x2(grid, "grid model");
  require_2x2(tdes, "desired response");
  const Eigen::Index n = grid.states(), nt = tdes.states();
  Matrix b = Matrix::Zero(n + nt, 2);
  b.topRows(n) = grid.B;
  Matrix c = Matrix::Zero(2, n + nt);
  c.leftCols(n) = grid.C;
  return StateSpace(feedback_a(grid.A, grid.B, grid.C, tdes), std::move(b), std::move(c));
}

bool is_hurwitz(const Matrix& a, double margin) { return spectral_abscissa(a) < -margin; }

namespace {

double lyap_residual(const Matrix& a, const Matrix& p, const Matrix& q) {
  return (a * p + p * a.transpose() + q).norm();
}

Matrix lyap_kronecker(const Matrix& a, const Matrix& q) {
  const Eigen::Index n = a.rows();
  const Matrix eye = Matrix::Identity(n, n);
  Matrix k = Matrix::Zero(n * n, n * n);
  // vec(A P + P A^T) = (I (x) A + A (x) I) vec(P), column-major vec.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      k.block(i * n, j * n, n, n) += eye(i, j) * a;
      k.block(i * n, j * n, n, n) += a(i, j) * eye;
    }
  }
  const Vector rhs = -Eigen::Map<const Vector>(q.data(), n * n);
  const Vector x = k.fullPivLu().solve(rhs);
  return Eigen::Map<const Matrix>(x.data(), n, n);
}

}  // namespace

Matrix lyap_solve(const Matrix& a, const Matrix& q) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n) throw ValidationError("lyap_solve(): dimension mismatch");
  if (!a.allFinite() || !q.allFinite()) throw ValidationError("lyap_solve(): non-finite input");
  if (n == 0) return Matrix(0, 0);

  using CMat = Eigen::MatrixXcd;
  using CVec = Eigen::VectorXcd;
  Eigen::ComplexSchur<CMat> schur(a.cast<std::complex<double>>());
  if (schur.info() != Eigen::Success) throw NumericalError("eigensolver", "Schur decomposition failed");
  const CMat& t = schur.matrixT();
  const CMat& u = schur.matrixU();
  double abscissa = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) abscissa = std::max(abscissa, t(i, i).real());
  if (abscissa >= -1e-9) {
    throw NumericalError("unstable", "Lyapunov equation needs a Hurwitz matrix (spectral abscissa " +
                                         std::to_string(abscissa) + ")");
  }

  // T X + X T^H + Qt = 0 with X = U^H P U; columns from the last one down.
  auto schur_solve = [&](const Matrix& rhs_q) {
    const CMat qt = u.adjoint() * rhs_q.cast<std::complex<double>>() * u;
    CMat x = CMat::Zero(n, n);
    for (Eigen::Index j = n - 1; j >= 0; --j) {
      CVec rhs = -qt.col(j);
      for (Eigen::Index k = j + 1; k < n; ++k) rhs -= std::conj(t(j, k)) * x.col(k);
      CMat m = t;
      m.diagonal().array() += std::conj(t(j, j));
      x.col(j) = m.triangularView<Eigen::Upper>().solve(rhs);
    }
    Matrix sol = (u * x * u.adjoint()).real();
    return Matrix(0.5 * (sol + sol.transpose()));
  };
  Matrix p = schur_solve(q);
  // One refinement step on a residual formed in extended precision; the
  // equation is ill-conditioned when A has poles near the origin.
  {
    using LMat = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const LMat al = a.cast<long double>(), pl = p.cast<long double>();
    const LMat rl = al * pl + pl * al.transpose() + q.cast<long double>();
    p += schur_solve(rl.cast<double>());
  }

  const double tol = 1e-8 * (a.norm() * p.norm() + q.norm());
  if (lyap_residual(a, p, q) <= tol) return p;
  if (n <= 30) {
    Matrix pk = lyap_kronecker(a, q);
    pk = 0.5 * (pk + pk.transpose()).eval();
    if (lyap_residual(a, pk, q) <= 1e-8 * (a.norm() * pk.norm() + q.norm())) return pk;
  }
  throw NumericalError("lyapunov", "Lyapunov residual check failed");
}

H2Analysis h2_analysis(const Matrix& a, const Matrix& b, const Matrix& c) {
  H2Analysis r;
  r.P = lyap_solve(a, b * b.transpose());
  r.Q = lyap_solve(a.transpose(), c.transpose() * c);
  r.J = (c * r.P * c.transpose()).trace();
  r.J_dual = (b.transpose() * r.Q * b).trace();
  if (std::abs(r.J - r.J_dual) > 1e-8 * std::max(std::abs(r.J), std::numeric_limits<double>::min())) {
    throw NumericalError("duality", "primal and dual H2 traces disagree: " + std::to_string(r.J) + " vs " +
                                        std::to_string(r.J_dual));
  }
  return r;
}

H2Analysis h2_analysis(const ClosedLoop& cl) { return h2_analysis(cl.A, cl.B, cl.C); }

double h2_norm_sq(const ClosedLoop& cl) {
  if (!is_hurwitz(cl.A, 1e-9)) return std::numeric_limits<double>::infinity();
  try {
    return h2_analysis(cl).J;
  } catch (const NumericalError& e) {
    if (e.kind() == "unstable") return std::numeric_limits<double>::infinity();
    throw;
  }
}

GradientResult h2_gradient(const LoopBuilder& builder, const Vector& alpha, const std::vector<bool>& free) {
  if (free.size() != static_cast<std::size_t>(alpha.size())) {
    throw ValidationError("h2_gradient(): free mask length must match alpha");
  }
  const ClosedLoop cl = builder(alpha);
  const H2Analysis h2 = h2_analysis(cl);
  const Matrix pq = h2.P * h2.Q;

  GradientResult out;
  out.J = h2.J;
  out.grad = Vector::Zero(alpha.size());

  // Builds the loop at alpha + step e_i; nullopt when the point is outside
  // the builder's domain or the loop is unstable there.
  auto perturbed = [&](Eigen::Index i, double step) -> std::optional<ClosedLoop> {
    Vector x = alpha;
    x(i) += step;
    try {
      ClosedLoop c = builder(x);
      if (c.A.rows() != cl.A.rows()) throw NumericalError("structure", "realization size depends on parameters");
      if (!is_hurwitz(c.A, 1e-9)) return std::nullopt;
      return c;
    } catch (const ValidationError&) {
      return std::nullopt;
    }
  };

  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (!free[static_cast<std::size_t>(i)]) continue;
    double h = 1e-6 * std::max(1.0, std::abs(alpha(i)));
    std::optional<ClosedLoop> plus, minus;
    for (int attempt = 0; attempt < 2; ++attempt) {
      plus = perturbed(i, h);
      minus = perturbed(i, -h);
      if (plus || minus) break;
      h *= 0.1;
    }
    if (!plus && !minus) {
      throw NumericalError("unstable", "closed loop leaves the stable region when perturbing " +
                                           std::to_string(static_cast<long>(i)));
    }
    const ClosedLoop& hi = plus ? *plus : cl;
    const ClosedLoop& lo = minus ? *minus : cl;
    const double span = (plus ? h : 0.0) + (minus ? h : 0.0);
    const Matrix da = (hi.A - lo.A) / span;
    const Matrix dbb = (hi.B * hi.B.transpose() - lo.B * lo.B.transpose()) / span;
    const Matrix dcc = (hi.C.transpose() * hi.C - lo.C.transpose() * lo.C) / span;
    // trace(X Y) = sum(X .* Y^T)
    const double ta = (da.transpose().cwiseProduct(pq)).sum();
    const double tb = (dbb.cwiseProduct(h2.Q)).sum();
    const double tc = (h2.P.cwiseProduct(dcc)).sum();
    out.max_bc_term = std::max({out.max_bc_term, std::abs(tb), std::abs(tc)});
    out.grad(i) = 2.0 * ta + tb + tc;
  }
  return out;
}

DisturbanceResult simulate_disturbance(const ClosedLoop& cl, const std::array<double, 2>& w_step, double dt,
                                       double horizon) {
  if (!(dt > 0.0) || !(horizon >= dt)) throw ValidationError("simulate_disturbance(): need dt > 0 and horizon >= dt");
  if (!is_hurwitz(cl.A, 1e-9)) throw NumericalError("unstable", "closed loop is not Hurwitz");
  const Eigen::Index n = cl.A.rows();
  Matrix out_map(4, n);
  out_map << cl.measurement, cl.injection;
  const Vector w = Eigen::Vector2d(w_step[0], w_step[1]);
  const StateSpace driven(cl.A, cl.B * w, out_map);
  const auto samples = static_cast<Eigen::Index>(std::floor(horizon / dt + 1e-9)) + 1;
  const Matrix y = simulate(discretize_zoh(driven, dt), Matrix::Ones(samples, 1));

  DisturbanceResult r;
  r.traces.t.resize(static_cast<std::size_t>(samples));
  r.traces.values.resize(samples, 5);
  for (Eigen::Index k = 0; k < samples; ++k) {
    r.traces.t[static_cast<std::size_t>(k)] = static_cast<double>(k) * dt;
    const double dfdot = k == 0 ? 0.0 : (y(k, 0) - y(k - 1, 0)) / dt;
    r.traces.values.row(k) << y(k, 0), dfdot, y(k, 1), y(k, 2), y(k, 3);
  }
  r.metrics.rocof_max = r.traces.values.col(1).cwiseAbs().maxCoeff();
  r.metrics.nadir = r.traces.values.col(0).minCoeff();
  r.metrics.v_peak = r.traces.values.col(2).cwiseAbs().maxCoeff();
  r.metrics.J = h2_norm_sq(cl);
  return r;
}

std::optional<double> dominant_damping(const ClosedLoop& cl, double omega_lo, double omega_hi) {
  Eigen::EigenSolver<Matrix> es(cl.A, true);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver", "eigenvalue computation did not converge");
  const Eigen::VectorXcd lam = es.eigenvalues();
  const Eigen::MatrixXcd v = es.eigenvectors();
  const Eigen::MatrixXcd w = v.partialPivLu().inverse();
  const Eigen::MatrixXcd b = cl.B.cast<std::complex<double>>();
  const Eigen::MatrixXcd m = cl.measurement.cast<std::complex<double>>();
  std::optional<double> best;
  double best_gain = -1.0;
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    const auto z = lam(k);
    if (z.imag() < omega_lo || z.imag() > omega_hi) continue;
    // resonant peak of this mode's term in the disturbance response; a mode
    // the disturbance cannot excite or the terminal cannot see scores zero
    const double gain = (m * v.col(k)).norm() * (w.row(k) * b).norm() / std::max(-z.real(), 1e-300);
    if (gain > best_gain) {
      best_gain = gain;
      best = -z.real() / std::abs(z);
    }
  }
  return best;
}

}  // namespace asopt

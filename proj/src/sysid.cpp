#include "asopt/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <unsupported/Eigen/MatrixFunctions>

#include "asopt/error.hpp"
#include "asopt/lti.hpp"

namespace asopt {

Vector rbs(std::size_t length, double amplitude, double switch_prob, std::uint64_t seed) {
  if (!(amplitude > 0.0)) throw ValidationError("rbs(): amplitude must be positive");
  if (!(switch_prob > 0.0 && switch_prob <= 0.5)) throw ValidationError("rbs(): switch_prob must be in (0, 0.5]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector s(static_cast<Eigen::Index>(length));
  double sign = unif(rng) < 0.5 ? 1.0 : -1.0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (k > 0 && unif(rng) < switch_prob) sign = -sign;
    s(k) = sign * amplitude;
  }
  return s;
}

namespace {

const char* kInputNames[] = {"dp", "dq"};

std::string channel_name(const char* const* names, Eigen::Index i) {
  return i < 2 ? names[i] : "channel " + std::to_string(static_cast<long>(i));
}

void check_orders(const ArxOrders& o) {
  if (o.na < 1 || o.nb < 1 || o.nk < 0) throw ValidationError("ARX orders need na >= 1, nb >= 1, nk >= 0");
}

// First-order high-pass y[k] = g (y[k-1] + x[k] - x[k-1]) from rest.
Matrix highpass(const Matrix& x, double dt, double cutoff_hz) {
  const double tau = 1.0 / (2.0 * std::numbers::pi * cutoff_hz);
  const double g = tau / (tau + dt);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double prev_x = 0.0, prev_y = 0.0;
    for (Eigen::Index k = 0; k < x.rows(); ++k) {
      prev_y = g * (prev_y + x(k, c) - prev_x);
      prev_x = x(k, c);
      y(k, c) = prev_y;
    }
  }
  return y;
}

// Filters every column by 1 / A(q^-1), A = 1 + a_1 q^-1 + ..., from rest.
Matrix inverse_filter(const Vector& a, const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  const Eigen::Index na = a.size();
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index k = 0; k < x.rows(); ++k) {
      double v = x(k, c);
      for (Eigen::Index j = 1; j <= na && j <= k; ++j) v -= a(j - 1) * y(k - j, c);
      y(k, c) = v;
    }
  }
  return y;
}

Eigen::VectorXcd poly_roots(const Vector& a) {
  // z^na + a_1 z^(na-1) + ... + a_na
  const Eigen::Index n = a.size();
  Matrix comp = Matrix::Zero(n, n);
  comp.row(0) = -a.transpose();
  for (Eigen::Index i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  Eigen::EigenSolver<Matrix> es(comp, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver", "ARX pole computation failed");
  return es.eigenvalues();
}

// Reflects roots outside the unit circle to 1/conj(z) so that 1/A is stable.
Vector stabilize(const Vector& a) {
  const Eigen::VectorXcd r = poly_roots(a);
  bool changed = false;
  std::vector<std::complex<double>> roots(r.data(), r.data() + r.size());
  for (auto& z : roots) {
    if (std::abs(z) >= 1.0) {
      if (std::abs(z) > 1.0) z = 1.0 / std::conj(z);
      if (std::abs(z) > 0.999) z *= 0.999 / std::abs(z);
      changed = true;
    }
  }
  if (!changed) return a;
  std::vector<std::complex<double>> c{1.0};
  for (const auto& z : roots) {
    std::vector<std::complex<double>> next(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= z * c[i];
    }
    c = std::move(next);
  }
  Vector out(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out(i) = c[static_cast<std::size_t>(i) + 1].real();
  return out;
}

struct Regression {
  Matrix phi;
  Vector target;
};

Regression build_regression(const Matrix& u, const Vector& y, const ArxOrders& o) {
  const Eigen::Index n = y.size();
  const Eigen::Index st = std::max<Eigen::Index>(o.na, o.nb + o.nk - 1);
  const Eigen::Index rows = n - st;
  const Eigen::Index cols = o.na + o.nb * u.cols();
  Regression r{Matrix(rows, cols), y.tail(rows)};
  for (Eigen::Index j = 1; j <= o.na; ++j) r.phi.col(j - 1) = -y.segment(st - j, rows);
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    for (Eigen::Index j = 1; j <= o.nb; ++j) {
      r.phi.col(o.na + c * o.nb + j - 1) = u.col(c).segment(st - o.nk - j + 1, rows);
    }
  }
  return r;
}

// Least squares with unit-norm column scaling and Householder QR; exactly
// zero columns get a zero coefficient.
Vector solve_ls(const Matrix& phi, const Vector& target) {
  std::vector<Eigen::Index> keep;
  Vector scale = Vector::Zero(phi.cols());
  for (Eigen::Index j = 0; j < phi.cols(); ++j) {
    const double nrm = phi.col(j).norm();
    if (nrm > 0.0) {
      keep.push_back(j);
      scale(j) = nrm;
    }
  }
  Vector theta = Vector::Zero(phi.cols());
  if (keep.empty()) return theta;
  Matrix reduced(phi.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    reduced.col(static_cast<Eigen::Index>(i)) = phi.col(keep[i]) / scale(keep[i]);
  }
  const Vector sol = reduced.householderQr().solve(target);
  for (std::size_t i = 0; i < keep.size(); ++i) theta(keep[i]) = sol(static_cast<Eigen::Index>(i)) / scale(keep[i]);
  return theta;
}

// True when the column-scaled regressor has numerically dependent columns,
// which happens when noiseless data are explained exactly by a lower order.
// Genuine near-collinearity of lagged samples stays many decades above the
// threshold.
bool exactly_rank_deficient(const Matrix& phi) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < phi.cols(); ++j) {
    if (phi.col(j).norm() > 0.0) keep.push_back(j);
  }
  if (keep.size() < 2) return false;
  Matrix scaled(phi.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    scaled.col(static_cast<Eigen::Index>(i)) = phi.col(keep[i]).normalized();
  }
  const Eigen::Index k = scaled.cols();
  const Matrix r = scaled.householderQr().matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Vector sv = Eigen::JacobiSVD<Matrix>(r).singularValues();
  return sv(k - 1) < 1e-12 * sv(0);
}

void check_excitation(const Matrix& u, const ArxOrders& o) {
  const Eigen::Index st = std::max<Eigen::Index>(o.na, o.nb + o.nk - 1);
  const Eigen::Index rows = u.rows() - st;
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    Matrix block(rows, o.nb);
    for (Eigen::Index j = 1; j <= o.nb; ++j) block.col(j - 1) = u.col(c).segment(st - o.nk - j + 1, rows);
    Eigen::ColPivHouseholderQR<Matrix> qr(block);
    qr.setThreshold(1e-10);
    if (qr.rank() < o.nb) {
      throw ValidationError("rank-deficient regressor: input channel " + channel_name(kInputNames, c) +
                            " is not persistently exciting for nb = " + std::to_string(o.nb));
    }
  }
}

}  // namespace

ArxModel fit_arx(const TimeSeriesDataset& train, const ArxOrders& orders, const ArxOptions& options) {
  train.validate();
  check_orders(orders);
  if (options.refine_iterations < 0) throw ValidationError("refine_iterations must be >= 0");
  if (options.highpass && !(options.highpass_cutoff_hz > 0.0)) throw ValidationError("high-pass cutoff must be > 0");
  const Eigen::Index n_in = train.u.cols(), n_out = train.y.cols();
  if (train.samples() <= 10 * (orders.na + orders.nb * n_in)) {
    throw ValidationError("not enough samples for the requested ARX orders");
  }
  Matrix u = train.u, y = train.y;
  if (options.highpass) {
    u = highpass(u, train.dt, options.highpass_cutoff_hz);
    y = highpass(y, train.dt, options.highpass_cutoff_hz);
  }
  check_excitation(u, orders);

  ArxModel model;
  model.orders = orders;
  model.dt = train.dt;
  model.residual_variance = Vector::Zero(n_out);
  for (Eigen::Index i = 0; i < n_out; ++i) {
    const Vector yi = y.col(i);
    ArxOrders eff = orders;
    Regression reg = build_regression(u, yi, eff);
    while ((eff.na > 1 || eff.nb > 1) && exactly_rank_deficient(reg.phi)) {
      eff.na = std::max(1, eff.na - 1);
      eff.nb = std::max(1, eff.nb - 1);
      reg = build_regression(u, yi, eff);
    }
    Vector theta = solve_ls(reg.phi, reg.target);
    for (int it = 0; it < options.refine_iterations; ++it) {
      const Vector a = stabilize(theta.head(eff.na));
      const Matrix uf = inverse_filter(a, u);
      const Matrix yf = inverse_filter(a, yi);
      const Regression fr = build_regression(uf, yf.col(0), eff);
      const Vector next = solve_ls(fr.phi, fr.target);
      if (!next.allFinite()) break;
      const double change = (next - theta).norm();
      theta = next;
      if (change <= 1e-10 * theta.norm()) break;
    }
    const Vector resid = reg.target - reg.phi * theta;
    const double dof = std::max<double>(1.0, static_cast<double>(reg.phi.rows() - reg.phi.cols()));
    model.residual_variance(i) = resid.squaredNorm() / dof;
    model.a.push_back(theta.head(eff.na));
    std::vector<Vector> bi;
    for (Eigen::Index c = 0; c < n_in; ++c) bi.push_back(theta.segment(eff.na + c * eff.nb, eff.nb));
    model.b.push_back(std::move(bi));
  }
  return model;
}

Matrix arx_simulate(const ArxModel& model, const Matrix& u) {
  if (u.cols() != model.inputs()) throw ValidationError("arx_simulate(): input channel count mismatch");
  const auto& o = model.orders;
  Matrix y = Matrix::Zero(u.rows(), model.outputs());
  for (Eigen::Index i = 0; i < model.outputs(); ++i) {
    const Vector& a = model.a[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < u.rows(); ++k) {
      double v = 0.0;
      for (Eigen::Index j = 1; j <= a.size() && j <= k; ++j) v -= a(j - 1) * y(k - j, i);
      for (Eigen::Index c = 0; c < u.cols(); ++c) {
        const Vector& b = model.b[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        for (Eigen::Index j = 0; j < b.size(); ++j) {
          const Eigen::Index lag = o.nk + j;
          if (lag <= k) v += b(j) * u(k - lag, c);
        }
      }
      y(k, i) = v;
    }
  }
  return y;
}

double arx_spectral_radius(const ArxModel& model) {
  double r = 0.0;
  for (const auto& a : model.a) r = std::max(r, poly_roots(a).cwiseAbs().maxCoeff());
  return r;
}

ArxRealization arx_realize(const ArxModel& model) {
  const auto& o = model.orders;
  check_orders(o);
  const Eigen::Index p = model.outputs(), m = model.inputs();
  std::vector<Eigen::Index> blocks;
  Eigen::Index total = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    const auto& bi = model.b[static_cast<std::size_t>(i)];
    const Eigen::Index nb = bi.empty() ? 0 : bi.front().size();
    blocks.push_back(std::max<Eigen::Index>(model.a[static_cast<std::size_t>(i)].size(), nb + o.nk - 1));
    total += blocks.back();
  }
  ArxRealization r;
  r.sys.dt = model.dt;
  r.sys.Ad = Matrix::Zero(total, total);
  r.sys.Bd = Matrix::Zero(total, m);
  r.sys.C = Matrix::Zero(p, total);
  r.d = Matrix::Zero(p, m);
  Eigen::Index off = 0;
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::Index blk = blocks[static_cast<std::size_t>(i)];
    const Vector& ai = model.a[static_cast<std::size_t>(i)];
    Vector a = Vector::Zero(blk);
    a.head(ai.size()) = ai;
    for (Eigen::Index row = 0; row < blk; ++row) {
      r.sys.Ad(off + row, off) = -a(row);
      if (row + 1 < blk) r.sys.Ad(off + row, off + row + 1) = 1.0;
    }
    r.sys.C(i, off) = 1.0;
    for (Eigen::Index c = 0; c < m; ++c) {
      // coefficients by lag 0..blk
      Vector lagged = Vector::Zero(blk + 1);
      const Vector& b = model.b[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
      for (Eigen::Index j = 0; j < b.size(); ++j) lagged(o.nk + j) = b(j);
      const double b0 = lagged(0);
      r.d(i, c) = b0;
      for (Eigen::Index row = 0; row < blk; ++row) r.sys.Bd(off + row, c) = lagged(row + 1) - a(row) * b0;
    }
    off += blk;
  }
  return r;
}

Vector nrmse_fit(const Matrix& y, const Matrix& yhat) {
  if (y.rows() != yhat.rows() || y.cols() != yhat.cols()) throw ValidationError("nrmse_fit(): shape mismatch");
  Vector fit(y.cols());
  for (Eigen::Index c = 0; c < y.cols(); ++c) {
    const double err = (y.col(c) - yhat.col(c)).norm();
    const double spread = (y.col(c).array() - y.col(c).mean()).matrix().norm();
    if (spread == 0.0) {
      fit(c) = err == 0.0 ? 100.0 : -std::numeric_limits<double>::infinity();
    } else {
      fit(c) = 100.0 * (1.0 - err / spread);
    }
  }
  return fit;
}

OrderSelection select_order(const TimeSeriesDataset& train, const TimeSeriesDataset& val,
                            const std::vector<ArxOrders>& candidates, const ArxOptions& options) {
  if (candidates.empty()) throw ValidationError("select_order(): no candidate orders");
  val.validate();
  OrderSelection sel;
  sel.candidates = candidates;
  sel.mean_fit.assign(candidates.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<ArxModel> models(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    models[i] = fit_arx(train, candidates[i], options);
    if (!(arx_spectral_radius(models[i]) < 1.0)) continue;
    const Matrix yhat = arx_simulate(models[i], val.u);
    if (!yhat.allFinite()) continue;
    sel.mean_fit[i] = nrmse_fit(val.y, yhat).mean();
  }
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    return candidates[l].na + candidates[l].nb < candidates[r].na + candidates[r].nb;
  });
  std::optional<std::size_t> best;
  for (std::size_t i : order) {
    if (std::isnan(sel.mean_fit[i])) continue;
    if (!best || sel.mean_fit[i] > sel.mean_fit[*best] + 0.1) best = i;
  }
  if (!best) throw NumericalError("unstable", "every candidate ARX model is unstable in simulation");
  sel.best = models[*best];
  return sel;
}

ContinuousModel discrete_to_continuous(const DiscreteStateSpace& sys, const Matrix& d, D2cMethod method) {
  const Eigen::Index n = sys.Ad.rows(), m = sys.Bd.cols(), p = sys.C.rows();
  const double dt = sys.dt;
  if (!(dt > 0.0)) throw ValidationError("discrete model needs dt > 0");
  if (d.rows() != p || d.cols() != m) throw ValidationError("feedthrough dimension mismatch");
  if (n == 0) return {StateSpace(Matrix(0, 0), Matrix(0, m), Matrix(p, 0)), d};

  using CMat = Eigen::MatrixXcd;
  using cd = std::complex<double>;
  Eigen::EigenSolver<Matrix> es(sys.Ad, true);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver", "discrete pole computation failed");
  const Eigen::VectorXcd z = es.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(z(i) + 1.0) < 1e-8) throw NumericalError("d2c", "discrete pole at z = -1");
  }

  if (method == D2cMethod::Tustin) {
    const Eigen::PartialPivLU<Matrix> lu(sys.Ad + Matrix::Identity(n, n));
    const Matrix mb = lu.solve(sys.Bd);
    Matrix a = (2.0 / dt) * lu.solve(sys.Ad - Matrix::Identity(n, n));
    Matrix b = (4.0 / dt) * lu.solve(mb);
    return {StateSpace(std::move(a), std::move(b), sys.C), d - sys.C * mb};
  }

  bool real_log = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (z(i).real() <= 0.0 && std::abs(z(i).imag()) <= 1e-12 * std::max(1.0, std::abs(z(i)))) real_log = false;
  }
  if (real_log) {
    // Principal logarithm through the Schur form; unlike an eigenvector
    // basis this stays accurate for the clustered poles of fast sampling.
    Matrix a = sys.Ad.log() / dt;
    // Bd = Gamma Bc with Gamma = int_0^dt exp(A s) ds, read off exp([A I; 0 0] dt).
    Matrix aug = Matrix::Zero(2 * n, 2 * n);
    aug.topLeftCorner(n, n) = a * dt;
    aug.topRightCorner(n, n) = Matrix::Identity(n, n) * dt;
    const Matrix gamma = Matrix(aug.exp()).topRightCorner(n, n);
    Matrix b = gamma.partialPivLu().solve(sys.Bd);
    if (!a.allFinite() || !b.allFinite()) throw NumericalError("d2c", "matrix logarithm failed");
    return {StateSpace(std::move(a), std::move(b), sys.C), d};
  }

  const CMat v = es.eigenvectors();
  Eigen::JacobiSVD<CMat> svd(v);
  const auto& sv = svd.singularValues();
  if (!(sv(n - 1) > 1e-12 * sv(0))) throw NumericalError("d2c", "discrete model has a defective mode basis");
  const CMat vi = v.inverse();
  const CMat bm = vi * sys.Bd.cast<cd>();
  const CMat cm = sys.C.cast<cd>() * v;
  Eigen::VectorXcd lam(n), beta(n);
  CMat dc = d.cast<cd>();
  for (Eigen::Index i = 0; i < n; ++i) {
    const cd zi = z(i);
    if (zi.imag() == 0.0 && zi.real() <= 0.0) {
      lam(i) = (2.0 / dt) * (zi - 1.0) / (zi + 1.0);
      beta(i) = 4.0 / (dt * (1.0 + zi) * (1.0 + zi));
      dc -= cm.col(i) * bm.row(i) / (1.0 + zi);
    } else {
      lam(i) = std::log(zi) / dt;
      beta(i) = std::abs(zi - 1.0) < 1e-14 ? cd(1.0 / dt) : lam(i) / (zi - 1.0);
    }
  }
  const CMat ac = v * lam.asDiagonal() * vi;
  const CMat bc = v * beta.asDiagonal() * bm;
  const double imag_part = std::max(ac.imag().cwiseAbs().maxCoeff() / std::max(1.0, ac.real().cwiseAbs().maxCoeff()),
                                    bc.imag().cwiseAbs().maxCoeff() / std::max(1e-300, bc.real().cwiseAbs().maxCoeff()));
  if (imag_part > 1e-6) throw NumericalError("d2c", "mode basis is too ill-conditioned for conversion");
  return {StateSpace(ac.real(), bc.real(), sys.C), dc.real()};
}

StateSpace arx_to_ct(const ArxModel& model, const ArxToCtOptions& options) {
  const ArxRealization r = arx_realize(model);
  const Eigen::Index p = model.outputs(), m = model.inputs();
  // Observer-canonical blocks: output i reads the first state of its block.
  std::vector<Eigen::Index> start;
  for (Eigen::Index i = 0; i < p; ++i) {
    Eigen::Index col = 0;
    while (r.sys.C(i, col) == 0.0) ++col;
    start.push_back(col);
  }
  start.push_back(r.sys.Ad.rows());
  std::vector<StateSpace> rows;
  Matrix feed(p, m);
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::Index off = start[static_cast<std::size_t>(i)];
    const Eigen::Index blk = start[static_cast<std::size_t>(i) + 1] - off;
    DiscreteStateSpace part{r.sys.Ad.block(off, off, blk, blk), r.sys.Bd.middleRows(off, blk),
                            Matrix::Identity(1, blk), r.sys.dt};
    const ContinuousModel ct = discrete_to_continuous(part, r.d.row(i), options.method);
    feed.row(i) = ct.feedthrough;
    rows.push_back(ct.sys);
  }
  if (feed.norm() >= options.max_feedthrough) {
    throw NumericalError("d2c", "continuous model has a significant feedthrough term (norm " +
                                    std::to_string(feed.norm()) + ")");
  }
  // Outputs are separate blocks sharing the input vector.
  std::vector<StateSpace> padded;
  for (Eigen::Index i = 0; i < p; ++i) {
    const StateSpace& s = rows[static_cast<std::size_t>(i)];
    Matrix c = Matrix::Zero(p, s.states());
    c.row(i) = s.C;
    padded.emplace_back(s.A, s.B, std::move(c));
  }
  return parallel(padded);
}

namespace {

// Symmetric PSD square-root factor L with X = L L^T.
// Real modal coordinates with unit-norm mode vectors. Companion-type
// realizations of sampled models have Gramians whose small eigenvalues are
// lost to rounding; in modal coordinates they are not. Falls back to the
// given coordinates when the mode basis is close to defective.
StateSpace modal_coordinates(const StateSpace& sys) {
  const Eigen::Index n = sys.states();
  Eigen::EigenSolver<Matrix> es(sys.A, true);
  if (es.info() != Eigen::Success) return sys;
  const Eigen::VectorXcd lam = es.eigenvalues();
  const Eigen::MatrixXcd v = es.eigenvectors();
  Matrix t(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (lam(k).imag() == 0.0) {
      t.col(k) = v.col(k).real();
    } else if (lam(k).imag() > 0.0 && k + 1 < n) {
      t.col(k) = v.col(k).real();
      t.col(k + 1) = v.col(k).imag();
      ++k;
    } else {
      return sys;
    }
  }
  for (Eigen::Index k = 0; k < n; ++k) t.col(k).normalize();
  Eigen::JacobiSVD<Matrix> svd(t);
  const auto& sv = svd.singularValues();
  if (!(sv(n - 1) > 1e-12 * sv(0))) return sys;
  const Eigen::ColPivHouseholderQR<Matrix> qr(t);
  return StateSpace(qr.solve(sys.A * t), qr.solve(sys.B), sys.C * t);
}

Matrix psd_factor(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (x + x.transpose()));
  const Vector lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal();
}

}  // namespace

ReducedModel reduce(const StateSpace& sys, Eigen::Index order) {
  if (order < 0) throw ValidationError("reduce(): order must be >= 0");
  const Eigen::Index n = sys.states();
  if (n > 0 && !(spectral_abscissa(sys.A) < 0.0)) throw NumericalError("unstable", "reduce(): model is unstable");
  ReducedModel out;
  if (n == 0) {
    out.sys = sys;
    out.hankel_singular_values = Vector(0);
    return out;
  }
  const StateSpace modal = modal_coordinates(sys);
  const Matrix lc = psd_factor(lyap_solve(modal.A, modal.B * modal.B.transpose()));
  const Matrix lo = psd_factor(lyap_solve(modal.A.transpose(), modal.C.transpose() * modal.C));
  Eigen::JacobiSVD<Matrix> svd(lo.transpose() * lc, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.hankel_singular_values = svd.singularValues();
  const Vector& s = out.hankel_singular_values;
  Eigen::Index r = std::min(order, n);
  while (r > 0 && !(s(r - 1) > 1e-14 * s(0))) --r;  // numerically zero: unobservable or uncontrollable
  out.error_bound = 2.0 * s.tail(n - r).sum();
  const Vector inv_sqrt = s.head(r).cwiseSqrt().cwiseInverse();
  const Matrix t = lc * svd.matrixV().leftCols(r) * inv_sqrt.asDiagonal();
  const Matrix ti = inv_sqrt.asDiagonal() * svd.matrixU().leftCols(r).transpose() * lo.transpose();
  out.sys = StateSpace(ti * modal.A * t, ti * modal.B, modal.C * t);
  return out;
}

ReducedModel reduce_to_tolerance(const StateSpace& sys, double rel_tol) {
  if (!(rel_tol >= 0.0)) throw ValidationError("reduce_to_tolerance(): tolerance must be >= 0");
  const ReducedModel full = reduce(sys, sys.states());
  const Vector& s = full.hankel_singular_values;
  const Eigen::Index n = s.size();
  if (n == 0) return full;
  for (Eigen::Index r = 1; r <= n; ++r) {
    if (2.0 * s.tail(n - r).sum() <= rel_tol * s(0)) return reduce(sys, r);
  }
  return full;
}

std::pair<double, double> bode_error(const StateSpace& model, const StateSpace& truth, double lo_hz, double hi_hz,
                                     int points) {
  if (!(lo_hz > 0.0 && hi_hz > lo_hz) || points < 2) throw ValidationError("bode_error(): invalid band");
  std::vector<double> errs;
  for (int k = 0; k < points; ++k) {
    const double f = lo_hz * std::pow(hi_hz / lo_hz, static_cast<double>(k) / (points - 1));
    const std::complex<double> s(0.0, 2.0 * std::numbers::pi * f);
    const ComplexMatrix h = evaluate(model, s), ht = evaluate(truth, s);
    errs.push_back((h - ht).norm() / ht.norm());
  }
  std::vector<double> sorted = errs;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2), sorted.end());
  return {sorted[sorted.size() / 2], *std::max_element(errs.begin(), errs.end())};
}

FitReport validate(const StateSpace& model, const TimeSeriesDataset& data, const StateSpace* truth,
                   double band_lo_hz, double band_hi_hz) {
  data.validate();
  if (model.inputs() != data.u.cols() || model.outputs() != data.y.cols()) {
    throw ValidationError("validate(): model and data channel counts differ");
  }
  FitReport rep;
  rep.fit_percent = nrmse_fit(data.y, simulate(discretize_zoh(model, data.dt), data.u));
  if (truth) {
    const auto [med, mx] = bode_error(model, *truth, band_lo_hz, band_hi_hz);
    rep.bode_error_median = med;
    rep.bode_error_max = mx;
  }
  return rep;
}

FitReport validate(const ArxModel& model, const TimeSeriesDataset& data) {
  data.validate();
  FitReport rep;
  rep.fit_percent = nrmse_fit(data.y, arx_simulate(model, data.u));
  return rep;
}

}  // namespace asopt

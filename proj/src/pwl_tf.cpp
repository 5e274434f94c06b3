#include "asopt/pwl_tf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "asopt/error.hpp"

namespace asopt {

PwlCurve::PwlCurve(std::vector<Breakpoint> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw ValidationError("capability curve needs at least 2 breakpoints");
  if (points_.front().time != 0.0 || points_.front().value != 0.0) {
    throw ValidationError("capability curve must start at (0, 0)");
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!std::isfinite(points_[i].time) || !std::isfinite(points_[i].value)) {
      throw ValidationError("capability curve breakpoints must be finite");
    }
    if (i > 0 && !(points_[i].time > points_[i - 1].time)) {
      throw ValidationError("capability curve times must be strictly increasing (breakpoint " +
                            std::to_string(i) + ")");
    }
  }
}

double PwlCurve::value_at(double t) const {
  if (t <= 0.0) return 0.0;
  if (t >= points_.back().time) return points_.back().value;
  auto hi = std::upper_bound(points_.begin(), points_.end(), t,
                             [](double x, const Breakpoint& b) { return x < b.time; });
  auto lo = hi - 1;
  const double w = (t - lo->time) / (hi->time - lo->time);
  return lo->value + w * (hi->value - lo->value);
}

double PwlCurve::max_abs() const {
  double m = 0.0;
  for (const auto& b : points_) m = std::max(m, std::abs(b.value));
  return m;
}

RationalTf::RationalTf(std::vector<double> numerator, std::vector<double> denominator)
    : num(std::move(numerator)), den(std::move(denominator)) {
  while (!num.empty() && num.back() == 0.0) num.pop_back();
  while (!den.empty() && den.back() == 0.0) den.pop_back();
  if (den.empty()) throw ValidationError("transfer function denominator is zero");
  if (num.size() > den.size()) throw ValidationError("transfer function is improper");
  for (double c : num)
    if (!std::isfinite(c)) throw ValidationError("transfer function coefficients must be finite");
  for (double c : den)
    if (!std::isfinite(c)) throw ValidationError("transfer function coefficients must be finite");
}

std::complex<double> RationalTf::operator()(std::complex<double> s) const {
  auto horner = [s](const std::vector<double>& c) {
    std::complex<double> acc = 0.0;
    for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * s + *it;
    return acc;
  };
  return horner(num) / horner(den);
}

namespace {

// Slope change at every breakpoint, including zero ones.
std::vector<DelayTerm> all_slope_changes(const PwlCurve& curve) {
  const auto& p = curve.breakpoints();
  std::vector<DelayTerm> terms;
  terms.reserve(p.size());
  double before = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double after =
        (i + 1 < p.size()) ? (p[i + 1].value - p[i].value) / (p[i + 1].time - p[i].time) : 0.0;
    terms.push_back({p[i].time, after - before});
    before = after;
  }
  return terms;
}

// Denominator of the diagonal Pade approximant of exp(-s), ascending powers.
std::vector<long double> unit_pade_den(int order) {
  std::vector<long double> d(static_cast<std::size_t>(order) + 1);
  // d_k = (2n-k)! n! / ((2n)! k! (n-k)!), built by the ratio d_{k+1}/d_k.
  d[0] = 1.0L;
  for (int k = 0; k < order; ++k) {
    d[static_cast<std::size_t>(k) + 1] =
        d[static_cast<std::size_t>(k)] * static_cast<long double>(order - k) /
        (static_cast<long double>(2 * order - k) * static_cast<long double>(k + 1));
  }
  return d;
}

using cld = std::complex<long double>;

cld poly_eval(const std::vector<long double>& c, cld s) {
  cld acc = 0.0L;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * s + *it;
  return acc;
}

cld poly_deriv_eval(const std::vector<long double>& c, cld s) {
  cld acc = 0.0L;
  for (std::size_t k = c.size() - 1; k >= 1; --k) {
    acc = acc * s + static_cast<long double>(k) * c[k];
    if (k == 1) break;
  }
  return acc;
}

// (Pade(exp(-s)) - 1) / s for a unit delay, as a real modal realization:
// one 2x2 rotation block per complex pole pair, one scalar per real pole.
StateSpace build_unit_delay_modal(int order) {
  const auto den = unit_pade_den(order);
  std::vector<long double> num(den.size());
  for (std::size_t k = 0; k < den.size(); ++k) num[k] = (k % 2 == 0) ? den[k] : -den[k];

  const auto n = static_cast<Eigen::Index>(order);
  // Roots of D(scale z): the coefficients span ~15 decades at order 12,
  // so the companion matrix is built for the balanced polynomial.
  const long double scale = std::pow(den.front() / den.back(), 1.0L / static_cast<long double>(order));
  Matrix companion = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) companion(i, i + 1) = 1.0;
  long double sk = 1.0L;
  for (Eigen::Index j = 0; j < n; ++j) {
    companion(n - 1, j) =
        -static_cast<double>(den[static_cast<std::size_t>(j)] * sk / (den.back() * std::pow(scale, order)));
    sk *= scale;
  }
  Eigen::EigenSolver<Matrix> es(companion, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver", "Pade pole computation failed");

  std::vector<cld> poles;
  for (Eigen::Index i = 0; i < n; ++i) {
    cld p = scale * cld(es.eigenvalues()(i).real(), es.eigenvalues()(i).imag());
    for (int it = 0; it < 50; ++it) {
      const cld step = poly_eval(den, p) / poly_deriv_eval(den, p);
      p -= step;
      if (std::abs(step) < 1e-19L * std::abs(p)) break;
    }
    poles.push_back(p);
  }

  Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, 1), c = Matrix::Zero(1, n);
  Eigen::Index off = 0;
  for (const cld& p : poles) {
    if (p.imag() < -1e-9L) continue;  // represented by its conjugate
    const cld residue = poly_eval(num, p) / (p * poly_deriv_eval(den, p));
    if (p.imag() <= 1e-9L) {
      a(off, off) = static_cast<double>(p.real());
      b(off, 0) = 1.0;
      c(0, off) = static_cast<double>(residue.real());
      off += 1;
    } else {
      const double sigma = static_cast<double>(p.real()), omega = static_cast<double>(p.imag());
      a(off, off) = sigma;
      a(off, off + 1) = omega;
      a(off + 1, off) = -omega;
      a(off + 1, off + 1) = sigma;
      b(off + 1, 0) = 1.0;
      c(0, off) = static_cast<double>(-2.0L * residue.imag());
      c(0, off + 1) = static_cast<double>(2.0L * residue.real());
      off += 2;
    }
  }
  if (off != n) throw NumericalError("eigensolver", "Pade poles did not pair into conjugates");

  // Split each block's gain evenly between B and C, then remove the DC
  // error left by rounding the poles: the exact value is -1.
  long double dc = 0.0L;
  for (Eigen::Index i = 0; i < n;) {
    const Eigen::Index w = (i + 1 < n && a(i, i + 1) != 0.0) ? 2 : 1;
    const double gain = std::sqrt(c.block(0, i, 1, w).norm() / b.block(i, 0, w, 1).norm());
    if (std::isfinite(gain) && gain > 0.0) {
      b.block(i, 0, w, 1) *= gain;
      c.block(0, i, 1, w) /= gain;
    }
    if (w == 1) {
      dc -= static_cast<long double>(c(0, i)) * b(i, 0) / a(i, i);
    } else {
      // -c A^{-1} b for A = [[s, w], [-w, s]]: A^{-1} = [[s, -w], [w, s]] / (s^2 + w^2)
      const long double sg = a(i, i), om = a(i, i + 1), det = sg * sg + om * om;
      const long double x0 = (sg * b(i, 0) - om * b(i + 1, 0)) / det;
      const long double x1 = (om * b(i, 0) + sg * b(i + 1, 0)) / det;
      dc -= c(0, i) * x0 + c(0, i + 1) * x1;
    }
    i += w;
  }
  c *= static_cast<double>(-1.0L / dc);
  return StateSpace(std::move(a), std::move(b), std::move(c));
}

const StateSpace& unit_delay_modal(int order) {
  static const std::array<StateSpace, kMaxPadeOrder> cache = [] {
    std::array<StateSpace, kMaxPadeOrder> out;
    for (int k = 1; k <= kMaxPadeOrder; ++k) out[static_cast<std::size_t>(k) - 1] = build_unit_delay_modal(k);
    return out;
  }();
  return cache[static_cast<std::size_t>(order) - 1];
}

void check_order(int order) {
  if (order < 1 || order > kMaxPadeOrder) {
    throw ValidationError("Pade order must be in [1, " + std::to_string(kMaxPadeOrder) + "], got " +
                          std::to_string(order));
  }
}

}  // namespace

std::vector<DelayTerm> pwl_to_delay_terms(const PwlCurve& curve) {
  auto terms = all_slope_changes(curve);
  std::erase_if(terms, [](const DelayTerm& t) { return t.coefficient == 0.0; });
  return terms;
}

RationalTf pade_delay(double delay, int order) {
  check_order(order);
  if (!(delay >= 0.0) || !std::isfinite(delay)) throw ValidationError("delay must be finite and >= 0");
  if (delay == 0.0) return RationalTf({1.0}, {1.0});
  const auto d = unit_pade_den(order);
  std::vector<double> num(d.size()), den(d.size());
  long double tk = 1.0L;
  for (std::size_t k = 0; k < d.size(); ++k) {
    den[k] = static_cast<double>(d[k] * tk);
    num[k] = (k % 2 == 0) ? den[k] : -den[k];
    tk *= delay;
  }
  return RationalTf(std::move(num), std::move(den));
}

StateSpace delay_term_ss(double delay, double coefficient, int order) {
  check_order(order);
  if (!(delay > 0.0) || !std::isfinite(delay)) throw ValidationError("delay term needs a positive delay");
  // H(s) = T * H1(sT) with H1 the unit-delay term, realized as (A1/T, B1, C1).
  const StateSpace& unit = unit_delay_modal(order);
  return StateSpace(unit.A / delay, unit.B, unit.C * coefficient);
}

StateSpace pwl_step_tf(const PwlCurve& curve, double input_step, int pade_order) {
  check_order(pade_order);
  if (input_step == 0.0 || !std::isfinite(input_step)) throw ValidationError("input step must be nonzero");
  std::vector<StateSpace> blocks;
  for (const auto& term : all_slope_changes(curve)) {
    if (term.delay == 0.0) continue;  // (Pade(1) - 1)/s vanishes
    blocks.push_back(delay_term_ss(term.delay, term.coefficient / input_step, pade_order));
  }
  return parallel(blocks);
}

StateSpace tf_to_ss(const RationalTf& tf) {
  if (!tf.strictly_proper()) throw ValidationError("tf_to_ss(): transfer function must be strictly proper");
  const auto n = static_cast<Eigen::Index>(tf.den.size()) - 1;
  const double lead = tf.den.back();
  Matrix a = Matrix::Zero(n, n), b = Matrix::Zero(n, 1), c = Matrix::Zero(1, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) a(i, i + 1) = 1.0;
  for (Eigen::Index j = 0; j < n; ++j) a(n - 1, j) = -tf.den[static_cast<std::size_t>(j)] / lead;
  if (n > 0) b(n - 1, 0) = 1.0;
  for (std::size_t j = 0; j < tf.num.size(); ++j) c(0, static_cast<Eigen::Index>(j)) = tf.num[j] / lead;
  return StateSpace(std::move(a), std::move(b), std::move(c));
}

}  // namespace asopt

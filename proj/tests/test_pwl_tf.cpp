#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "asopt/error.hpp"
#include "asopt/pwl_tf.hpp"
#include "asopt/services.hpp"

using namespace asopt;
using doctest::Approx;

namespace {

double dc_of(const StateSpace& sys, Eigen::Index i = 0, Eigen::Index j = 0) {
  return std::real(oracle::eval_entry(sys.A, sys.B, sys.C, {0.0, 0.0}, i, j));
}

// Largest deviation of the ZOH step response from the exact polyline, ignoring
// +-window around every breakpoint.
double reconstruction_error(const PwlCurve& curve, int order, double window = 0.5) {
  const double dt = 0.01;
  const double horizon = curve.breakpoints().back().time + 20.0;
  const auto ts = step_response(pwl_step_tf(curve, 1.0, order), 0, dt, horizon);
  std::vector<std::pair<double, double>> pts;
  for (const auto& b : curve.breakpoints()) pts.emplace_back(b.time, b.value);
  double worst = 0.0;
  for (std::size_t k = 0; k < ts.t.size(); ++k) {
    const double t = ts.t[k];
    bool near = false;
    for (const auto& b : curve.breakpoints()) near = near || std::abs(t - b.time) <= window;
    if (near) continue;
    worst = std::max(worst, std::abs(ts.values(static_cast<Eigen::Index>(k), 0) - oracle::polyline(pts, t)));
  }
  return worst;
}

}  // namespace

TEST_CASE("delay terms of an FCR ramp") {
  const auto terms = pwl_to_delay_terms(PwlCurve({{0, 0}, {2, 0}, {30, 1}}));
  REQUIRE(terms.size() == 2);
  CHECK(terms[0].delay == Approx(2.0));
  CHECK(terms[0].coefficient == Approx(1.0 / 28.0));
  CHECK(terms[1].delay == Approx(30.0));
  CHECK(terms[1].coefficient == Approx(-1.0 / 28.0));
  // sum of c_k (t - t_k) at t = 30
  double v = 0.0;
  for (const auto& t : terms) v += t.coefficient * std::max(0.0, 30.0 - t.delay);
  CHECK(v == Approx(1.0));
}

TEST_CASE("flat curve has no delay terms") { CHECK(pwl_to_delay_terms(PwlCurve({{0, 0}, {1, 0}})).empty()); }

TEST_CASE("delay terms of an FFR polyline") {
  const auto terms = pwl_to_delay_terms(PwlCurve({{0, 0}, {2, 1}, {10, 1}, {20, 0}}));
  const double expect[4][2] = {{0, 0.5}, {2, -0.5}, {10, -0.1}, {20, 0.1}};
  REQUIRE(terms.size() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(terms[static_cast<std::size_t>(k)].delay == Approx(expect[k][0]));
    CHECK(terms[static_cast<std::size_t>(k)].coefficient == Approx(expect[k][1]));
  }
}

TEST_CASE("curve validation") {
  CHECK_THROWS_AS(PwlCurve({{0, 0}}), ValidationError);
  CHECK_THROWS_AS(PwlCurve({{0, 0}, {0, 1}}), ValidationError);
  CHECK_THROWS_AS(PwlCurve({{1, 0}, {2, 1}}), ValidationError);
  CHECK_THROWS_AS(PwlCurve({{0, 1}, {2, 1}}), ValidationError);
  CHECK_THROWS_AS(PwlCurve({{0, 0}, {2, NAN}}), ValidationError);
}

TEST_CASE("first-order Pade") {
  const RationalTf p = pade_delay(1.0, 1);
  for (double w : {0.1, 0.7, 3.0}) {
    const std::complex<double> s(0.3, w);
    const auto expect = (1.0 - 0.5 * s) / (1.0 + 0.5 * s);
    CHECK(std::abs(p(s) - expect) < 1e-14);
  }
}

TEST_CASE("zero delay is the identity") {
  for (int n = 1; n <= kMaxPadeOrder; ++n) {
    const RationalTf p = pade_delay(0.0, n);
    CHECK(std::abs(p({0.2, 5.0}) - 1.0) < 1e-15);
  }
}

TEST_CASE("Pade approximants are all-pass") {
  const RationalTf p = pade_delay(2.0, 4);
  for (double w : {0.1, 1.0, 10.0}) CHECK(std::abs(std::abs(p({0.0, w})) - 1.0) < 1e-12);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> delay(0.0, 60.0), logw(-3.0, 3.0);
  std::uniform_int_distribution<int> order(1, kMaxPadeOrder);
  for (int k = 0; k < 200; ++k) {
    const RationalTf q = pade_delay(delay(rng), order(rng));
    CHECK(std::abs(std::abs(q({0.0, std::pow(10.0, logw(rng))})) - 1.0) < 1e-10);
  }
}

TEST_CASE("Pade phase tracks the exact delay at low frequency") {
  const RationalTf p = pade_delay(1.0, 4);
  CHECK(std::abs(std::arg(p({0.0, 0.5})) + 0.5) < 1e-4);
  const StateSpace sys = delay_term_ss(1.0, 1.0, 4);
  // delay_term_ss realizes c (P(s) - 1) / s; its phase at 0.5 rad/s follows
  // from the rational form
  const auto h = evaluate(sys, {0.0, 0.5})(0, 0);
  const std::complex<double> s(0.0, 0.5);
  CHECK(std::abs(h - (p(s) - 1.0) / s) < 1e-10);
}

TEST_CASE("Pade order is validated") {
  CHECK_THROWS_AS(pade_delay(1.0, 0), ValidationError);
  CHECK_THROWS_AS(pade_delay(1.0, kMaxPadeOrder + 1), ValidationError);
  CHECK_THROWS_AS(pade_delay(-1.0, 2), ValidationError);
}

TEST_CASE("DC gain of curve transfer functions") {
  // unit-capacity ramp driven by a step of size D_p
  const PwlCurve fcr({{0.0, 0.0}, {10.0, 1.0}});
  for (int n : {1, 4, 8, 12}) {
    CHECK(std::abs(dc_of(pwl_step_tf(fcr, -0.05, n)) - 1.0 / -0.05) < 1e-9);
    CHECK(std::abs(dc_of(pwl_step_tf(ffr_curve({2, 10, 20, 1.2}, -0.04), 1.0, n))) < 1e-9);
    CHECK(std::abs(dc_of(pwl_step_tf(vq_curve({5, 60}, -0.04), 1.0, n)) - (-25.0)) < 1e-9);
  }
}

TEST_CASE("FCR step response at mid-ramp") {
  // input_step = D_p: the per-unit-input curve is scaled by the step
  const PwlCurve c = fcr_curve({2.0, 30.0}, -0.05);
  const auto ts = step_response(pwl_step_tf(c, 1.0, 4), 0, 0.01, 40.0);
  const double v16 = ts.values(1600, 0);
  CHECK(std::abs(v16 - (-10.0)) <= 0.02 * 20.0);
}

TEST_CASE("tf_to_ss canonical forms") {
  const StateSpace a = tf_to_ss(RationalTf({1.0}, {2.0, 1.0}));
  REQUIRE(a.states() == 1);
  CHECK(a.A(0, 0) == Approx(-2.0));
  CHECK(a.B(0, 0) * a.C(0, 0) == Approx(1.0));

  const StateSpace b = tf_to_ss(RationalTf({0.0, 1.0}, {2.0, 3.0, 1.0}));
  REQUIRE(b.states() == 2);
  Eigen::VectorXd ev = Eigen::EigenSolver<Matrix>(b.A).eigenvalues().real();
  std::sort(ev.data(), ev.data() + 2);
  CHECK(ev(0) == Approx(-2.0));
  CHECK(ev(1) == Approx(-1.0));

  const StateSpace r = tf_to_ss(aux_tf({1.0, 4.0, 2.0}));
  CHECK(std::abs(std::abs(evaluate(r, {0.0, 2.0})(0, 0)) - 2.0) < 1e-12);
}

TEST_CASE("tf_to_ss reproduces the transfer function") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> logw(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int deg = 1 + trial % 6;
    std::vector<double> den(static_cast<std::size_t>(deg + 1)), num(static_cast<std::size_t>(deg));
    for (auto& d : den) d = nd(rng);
    den.back() = 1.0 + std::abs(nd(rng));
    for (auto& n : num) n = nd(rng);
    const RationalTf tf(num, den);
    const StateSpace ss = tf_to_ss(tf);
    for (int k = 0; k < 20; ++k) {
      const std::complex<double> s(0.0, std::pow(10.0, logw(rng)));
      const auto want = tf(s);
      const auto got = oracle::eval_entry(ss.A, ss.B, ss.C, s, 0, 0);
      CHECK(std::abs(got - want) <= 1e-8 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("tf_to_ss rejects improper input") {
  CHECK_THROWS_AS(tf_to_ss(RationalTf({1.0, 1.0}, {1.0})), ValidationError);
  CHECK_THROWS_AS(RationalTf({1.0}, {0.0}), ValidationError);
}

TEST_CASE("first-order step response") {
  const StateSpace sys(Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  const auto ts = step_response(sys, 0, 0.1, 5.0);
  CHECK(ts.t.size() == 51);
  CHECK(std::abs(ts.values(10, 0) - (1.0 - std::exp(-1.0))) < 1e-9);

  const StateSpace zero(Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
  CHECK(step_response(zero, 0, 0.1, 5.0).values.isZero(0.0));
}

TEST_CASE("baseline FCR and FFR overlap") {
  // -0.01 p.u. frequency step: the response is the sum of the two scaled curves
  AlphaParams a;
  a.fcr = FcrParams{2, 30};
  a.ffr = FfrParams{2, 10, 20, 1};
  const Droops d;
  const auto ts = step_response(build_tdes(a, d, 10), 0, 0.01, 60.0);
  const std::vector<std::pair<double, double>> fcr = {{0, 0}, {2, 0}, {30, 20}};
  const std::vector<std::pair<double, double>> ffr = {{0, 0}, {2, 25}, {10, 25}, {20, 0}};
  double peak_exact = 0.0, peak = 0.0;
  for (std::size_t k = 0; k < ts.t.size(); ++k) {
    peak_exact = std::max(peak_exact, 0.01 * (oracle::polyline(fcr, ts.t[k]) + oracle::polyline(ffr, ts.t[k])));
    peak = std::max(peak, std::abs(-0.01 * ts.values(static_cast<Eigen::Index>(k), 0)));
  }
  CHECK(peak_exact == Approx(0.01 * (25.0 + 20.0 * 8.0 / 28.0)));
  CHECK(std::abs(peak - peak_exact) <= 0.02 * 0.01 * 45.0);
}

TEST_CASE("frequency response") {
  const StateSpace sys(Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  const std::vector<double> w = {1.0};
  const auto h = freq_response(sys, w)[0](0, 0);
  CHECK(std::abs(h) == Approx(1.0 / std::sqrt(2.0)));
  CHECK(std::arg(h) * 180.0 / std::numbers::pi == Approx(-45.0));

  const StateSpace zero(Matrix::Constant(1, 1, -1.0), Matrix::Ones(1, 1), Matrix::Zero(1, 1));
  for (const auto& m : freq_response(zero, std::vector<double>{0.1, 1.0, 100.0})) CHECK(std::abs(m(0, 0)) == 0.0);
}

TEST_CASE("reconstruction error falls with the Pade order") {
  // random curves over roughly [0, 30] s
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> gap(1.0, 8.0), val(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Breakpoint> pts = {{0.0, 0.0}};
    double t = 0.0;
    for (int k = 0; k < 4; ++k) {
      t += gap(rng);
      pts.push_back({t, val(rng)});
    }
    const PwlCurve c(pts);
    const double e4 = reconstruction_error(c, 4);
    const double e8 = reconstruction_error(c, 8);
    const double e12 = reconstruction_error(c, 12);
    CHECK(e8 < e4);
    CHECK(e12 < e8);
  }
}

TEST_CASE("baseline curves at Pade order 12") {
  CHECK(reconstruction_error(fcr_curve({2, 30}, -0.05), 12) <= 0.02 * 20.0);
  CHECK(reconstruction_error(ffr_curve({2, 10, 20, 1}, -0.04), 12) <= 0.02 * 25.0);
  CHECK(reconstruction_error(vq_curve({5, 60}, -0.04), 12) <= 0.02 * 25.0);
}

TEST_CASE("order 8 leaves a visible error on the FFR recovery ramp") {
  // The error of a diagonal Pade section on a delayed ramp grows with the
  // delay times the slope change, so the 20 s recovery knee is the worst case.
  const double fcr = reconstruction_error(fcr_curve({2, 30}, -0.05), 8) / 20.0;
  const double ffr = reconstruction_error(ffr_curve({2, 10, 20, 1}, -0.04), 8) / 25.0;
  const double vq = reconstruction_error(vq_curve({5, 60}, -0.04), 8) / 25.0;
  CHECK(fcr < 0.02);
  CHECK(vq < 0.02);
  CHECK(ffr > 0.02);
  CHECK(ffr < 0.03);
}

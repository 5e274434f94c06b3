#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "asopt/error.hpp"
#include "asopt/gridsim.hpp"
#include "asopt/sysid.hpp"

using namespace asopt;
using doctest::Approx;

namespace {

TimeSeriesDataset record(const StateSpace& g, std::optional<double> snr, std::uint64_t seed, std::size_t n = 40000) {
  Matrix u(static_cast<Eigen::Index>(n), 2);
  u.col(0) = rbs(n, 0.03, 0.5, 3 * seed);
  u.col(1) = rbs(n, 0.03, 0.5, 3 * seed + 1);
  return generate_dataset(g, u, NoiseSpec{snr, {}}, 1e-3, 3 * seed + 2);
}

// Two decoupled SISO recursions driven by independent binary sequences.
TimeSeriesDataset arx_data(const std::vector<double>& a0, const std::vector<double>& b0, const std::vector<double>& a1,
                           const std::vector<double>& b1, std::size_t n, std::uint64_t seed, double dt = 0.1) {
  TimeSeriesDataset d;
  d.dt = dt;
  d.u.resize(static_cast<Eigen::Index>(n), 2);
  d.u.col(0) = rbs(n, 1.0, 0.5, seed);
  d.u.col(1) = rbs(n, 1.0, 0.5, seed + 1);
  d.y.resize(static_cast<Eigen::Index>(n), 2);
  d.y.col(0) = oracle::arx_recursion(a0, b0, d.u.col(0));
  d.y.col(1) = oracle::arx_recursion(a1, b1, d.u.col(1));
  return d;
}

double fit_of(const Matrix& y, const Matrix& yhat, Eigen::Index c) {
  const double mean = y.col(c).mean();
  return 100.0 * (1.0 - (y.col(c) - yhat.col(c)).norm() / (y.col(c).array() - mean).matrix().norm());
}

// Frequency response of the ARX polynomials B(q)/A(q) at angular frequency w.
std::complex<double> arx_response(const ArxModel& m, Eigen::Index out, Eigen::Index in, double w) {
  const std::complex<double> zinv = std::exp(std::complex<double>(0.0, -w * m.dt));
  std::complex<double> a = 1.0, b = 0.0, zk = 1.0;
  const Vector& av = m.a[static_cast<std::size_t>(out)];
  for (Eigen::Index i = 0; i < av.size(); ++i) {
    zk *= zinv;
    a += av(i) * zk;
  }
  zk = std::pow(zinv, m.orders.nk);
  const Vector& bv = m.b[static_cast<std::size_t>(out)][static_cast<std::size_t>(in)];
  for (Eigen::Index i = 0; i < bv.size(); ++i) {
    b += bv(i) * zk;
    zk *= zinv;
  }
  return b / a;
}

}  // namespace

TEST_CASE("binary sequence") {
  const Vector s = rbs(40000, 0.03, 0.5, 1);
  CHECK((s.array().abs() - 0.03).abs().maxCoeff() == 0.0);
  const double r0 = s.squaredNorm() / (0.03 * 0.03 * 40000);
  const double r1 = s.head(39999).dot(s.tail(39999)) / (0.03 * 0.03 * 39999);
  CHECK(r0 == Approx(1.0));
  CHECK(std::abs(r1) <= 0.02);
  CHECK(rbs(1000, 1.0, 0.3, 5) == rbs(1000, 1.0, 0.3, 5));
  const Vector t = rbs(40000, 0.03, 0.5, 2);
  CHECK(std::abs(s.dot(t)) / (s.norm() * t.norm()) < 0.05);
  CHECK_THROWS_AS(rbs(10, 0.0, 0.5, 1), ValidationError);
  CHECK_THROWS_AS(rbs(10, 1.0, 0.7, 1), ValidationError);
}

TEST_CASE("first-order recursion is recovered") {
  const TimeSeriesDataset d = arx_data({-0.5}, {1.0}, {-0.8}, {0.3}, 2000, 3);
  const ArxModel m = fit_arx(d, {1, 1, 1});
  CHECK(std::abs(m.a[0](0) + 0.5) <= 1e-8);
  CHECK(std::abs(m.b[0][0](0) - 1.0) <= 1e-8);
  CHECK(std::abs(m.b[0][1](0)) <= 1e-8);
  CHECK(std::abs(m.a[1](0) + 0.8) <= 1e-8);
  CHECK(std::abs(m.b[1][1](0) - 0.3) <= 1e-8);
}

TEST_CASE("zero outputs give zero coefficients") {
  TimeSeriesDataset d = arx_data({-0.5}, {1.0}, {-0.8}, {0.3}, 500, 4);
  d.y.setZero();
  const ArxModel m = fit_arx(d, {2, 2, 1});
  for (std::size_t o = 0; o < 2; ++o) {
    CHECK(m.a[o].isZero(0.0));
    for (const auto& b : m.b[o]) CHECK(b.isZero(0.0));
  }
}

TEST_CASE("a dead input channel is reported") {
  TimeSeriesDataset d = arx_data({-0.5}, {1.0}, {-0.8}, {0.3}, 500, 4);
  d.u.col(1).setZero();
  try {
    fit_arx(d, {1, 1, 1});
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("dq") != std::string::npos);
  }
}

TEST_CASE("too few samples") {
  const TimeSeriesDataset d = arx_data({-0.5}, {1.0}, {-0.8}, {0.3}, 150, 4);
  CHECK_THROWS_AS(fit_arx(d, {12, 12, 1}), ValidationError);
}

TEST_CASE("order selection finds the true order") {
  const auto train = arx_data({-1.5, 0.7}, {1.0, 0.5}, {-1.2, 0.5}, {0.2, 0.1}, 3000, 5);
  const auto val = arx_data({-1.5, 0.7}, {1.0, 0.5}, {-1.2, 0.5}, {0.2, 0.1}, 3000, 7);
  const OrderSelection s = select_order(train, val, {{1, 1, 1}, {2, 2, 1}, {3, 3, 1}, {4, 4, 1}});
  CHECK(s.best.orders.na == 2);
  CHECK(s.mean_fit[1] == Approx(100.0));

  const OrderSelection one = select_order(train, val, {{1, 1, 1}});
  CHECK(one.best.orders.na == 1);
  CHECK_THROWS_AS(select_order(train, val, {}), ValidationError);
}

TEST_CASE("tie rule favours the smaller model") {
  const StateSpace g = make_nominal_grid(GridScenario{});
  const TimeSeriesDataset train = record(g, 40.0, 1), val = record(g, 40.0, 2);
  const OrderSelection s = select_order(train, val, {{2, 2, 1}, {12, 12, 1}});
  double fit[2];
  int k = 0;
  for (int n : {2, 12}) {
    const Matrix yhat = arx_simulate(fit_arx(train, {n, n, 1}), val.u);
    fit[k++] = 0.5 * (fit_of(val.y, yhat, 0) + fit_of(val.y, yhat, 1));
  }
  CHECK(s.mean_fit[0] == Approx(fit[0]).epsilon(1e-9));
  CHECK(s.best.orders.na == (fit[1] > fit[0] + 0.1 ? 12 : 2));
}

TEST_CASE("bilinear pole map") {
  const TimeSeriesDataset d = arx_data({-0.5}, {1.0}, {-0.5}, {1.0}, 1000, 8);
  const ArxModel m = fit_arx(d, {1, 1, 1});
  const StateSpace ct = arx_to_ct(m, {D2cMethod::Tustin, 1e3});
  Eigen::VectorXd ev = Eigen::EigenSolver<Matrix>(ct.A, false).eigenvalues().real();
  for (Eigen::Index i = 0; i < ev.size(); ++i) CHECK(ev(i) == Approx(-20.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("static model is rejected") {
  ArxModel m;
  m.orders = {1, 1, 0};
  m.dt = 0.01;
  m.a = {Vector::Zero(1), Vector::Zero(1)};
  m.b = {{Vector::Ones(1), Vector::Zero(1)}, {Vector::Zero(1), Vector::Ones(1)}};
  CHECK_THROWS(arx_to_ct(m));
}

TEST_CASE("continuous model matches the discrete polynomials") {
  const StateSpace g = make_nominal_grid(GridScenario{});
  const ArxModel m = fit_arx(record(g, std::nullopt, 1), {4, 4, 1});
  const StateSpace ct = arx_to_ct(m);
  // sampling the continuous model behind a hold gives back the ARX polynomials
  const DiscreteStateSpace back = discretize_zoh(ct, m.dt);
  const Eigen::Index n = back.Ad.rows();
  double worst_d = 0.0, worst_c = 0.0;
  for (int k = 0; k < 200; ++k) {
    const double hz = std::pow(10.0, -2.0 + k * (std::log10(15.0) + 2.0) / 199.0);
    const double w = 2.0 * std::numbers::pi * hz;
    const std::complex<double> z = std::exp(std::complex<double>(0.0, w * m.dt));
    const Eigen::MatrixXcd hd = back.C.cast<std::complex<double>>() *
                                (z * Eigen::MatrixXcd::Identity(n, n) - back.Ad.cast<std::complex<double>>())
                                    .partialPivLu()
                                    .solve(back.Bd.cast<std::complex<double>>());
    const ComplexMatrix hc = evaluate(ct, {0.0, w});
    for (Eigen::Index i = 0; i < 2; ++i) {
      const double scale = std::abs(arx_response(m, i, i, w));
      for (Eigen::Index j = 0; j < 2; ++j) {
        const auto ref = arx_response(m, i, j, w);
        const double denom = std::max(std::abs(ref), 1e-3 * scale);
        worst_d = std::max(worst_d, std::abs(hd(i, j) - ref) / denom);
        // the hold itself only matters well below the Nyquist rate
        if (hz <= 1.0) worst_c = std::max(worst_c, std::abs(hc(i, j) - ref) / denom);
      }
    }
  }
  CHECK(worst_d <= 1e-6);
  CHECK(worst_c <= 0.01);
}

TEST_CASE("noiseless identification of the nominal grid") {
  const StateSpace g = make_nominal_grid(GridScenario{});
  const TimeSeriesDataset train = record(g, std::nullopt, 1), val = record(g, std::nullopt, 2);
  const OrderSelection s = select_order(train, val, {{2, 2, 1}, {4, 4, 1}, {8, 8, 1}});
  const StateSpace ct = arx_to_ct(s.best);
  const auto [med, mx] = bode_error(ct, g, 0.01, 10.0);
  CHECK(mx <= 0.01);
  CHECK(med <= mx);
  const FitReport rep = validate(ct, val, &g);
  CHECK(rep.fit_percent.minCoeff() >= 99.0);
  CHECK(spectral_abscissa(ct.A) < 0.0);
}

TEST_CASE("noisy identification at high order") {
  const StateSpace g = make_nominal_grid(GridScenario{});
  const TimeSeriesDataset train = record(g, 40.0, 1), val = record(g, 40.0, 2);
  const ArxModel m = fit_arx(train, {12, 12, 1});
  CHECK(validate(m, val).fit_percent.minCoeff() >= 90.0);
  const ArxModel clean = fit_arx(record(g, std::nullopt, 1), {4, 4, 1});
  const ArxModel noisy = fit_arx(train, {4, 4, 1});
  const TimeSeriesDataset clean_val = record(g, std::nullopt, 2);
  CHECK(validate(noisy, val).fit_percent.mean() <= validate(clean, clean_val).fit_percent.mean());
}

TEST_CASE("balanced truncation") {
  std::mt19937_64 rng(30);
  const Matrix a = oracle::random_stable(20, rng);
  const StateSpace sys(a, oracle::random_matrix(20, 2, rng), oracle::random_matrix(2, 20, rng));
  const ReducedModel full = reduce(sys, 20);
  for (double w : {0.0, 0.3, 2.0, 40.0}) {
    CHECK((evaluate(full.sys, {0.0, w}) - evaluate(sys, {0.0, w})).norm() <= 1e-8 * evaluate(sys, {0.0, w}).norm());
  }
  const ReducedModel half = reduce(sys, 10);
  double hinf = 0.0;
  for (int k = 0; k < 4000; ++k) {
    const double w = std::pow(10.0, -3.0 + 7.0 * k / 3999.0);
    const Eigen::MatrixXcd e = evaluate(half.sys, {0.0, w}) - evaluate(sys, {0.0, w});
    hinf = std::max(hinf, Eigen::JacobiSVD<Eigen::MatrixXcd>(e).singularValues()(0));
  }
  CHECK(hinf <= half.error_bound * (1.0 + 1e-6));

  Matrix ad = Matrix::Zero(2, 2);
  ad.diagonal() << -1000.0, -1.0;
  Matrix b(2, 1), c(1, 2);
  b << 1e-3, 1.0;
  c << 1e-3, 1.0;
  const ReducedModel slow = reduce(StateSpace(ad, b, c), 1);
  CHECK(slow.sys.A(0, 0) == Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("truncation of an identified oscillatory model") {
  // the sampled ARX fit converts to badly scaled coordinates; its Hankel
  // singular values must still match those of the true grid
  GridScenario sc;
  sc.mode = OscillatoryMode{};
  const StateSpace g = make_oscillatory_grid(sc);
  const Vector want = reduce(g, g.states()).hankel_singular_values;
  for (std::uint64_t seed : {5, 7}) {
    const StateSpace ct = arx_to_ct(fit_arx(record(g, std::nullopt, seed), {4, 4, 1}));
    const ReducedModel full = reduce(ct, ct.states());
    for (Eigen::Index k = 0; k < want.size(); ++k) {
      CHECK(full.hankel_singular_values(k) == Approx(want(k)).epsilon(1e-3));
    }
    for (Eigen::Index r = 1; r <= ct.states(); ++r) CHECK(spectral_abscissa(reduce(ct, r).sys.A) < 0.0);
  }
}

TEST_CASE("fit report") {
  const StateSpace g = make_nominal_grid(GridScenario{});
  const TimeSeriesDataset d = record(g, std::nullopt, 3, 5000);
  CHECK(validate(g, d).fit_percent.minCoeff() == Approx(100.0));
  const StateSpace zero(g.A, g.B, Matrix::Zero(2, g.states()));
  const Vector f = validate(zero, d).fit_percent;
  // zero prediction scores 1 - |y| / |y - mean|, which is zero for zero-mean outputs
  for (Eigen::Index c = 0; c < 2; ++c) {
    const double mean = d.y.col(c).mean();
    const double expect = 100.0 * (1.0 - d.y.col(c).norm() / (d.y.col(c).array() - mean).matrix().norm());
    CHECK(f(c) == Approx(expect));
    CHECK(f(c) <= 0.0);
  }
}

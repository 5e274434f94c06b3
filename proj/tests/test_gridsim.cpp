#include <cmath>
#include <numbers>

#include "doctest.h"

#include "asopt/error.hpp"
#include "asopt/gridsim.hpp"
#include "asopt/sysid.hpp"

using namespace asopt;
using doctest::Approx;

namespace {

double mag(const StateSpace& g, double hz, Eigen::Index i = 0, Eigen::Index j = 0) {
  return std::abs(evaluate(g, {0.0, 2.0 * std::numbers::pi * hz})(i, j));
}

double peak_hz(const StateSpace& g, double lo, double hi) {
  double best = 0.0, at = lo;
  for (int k = 0; k <= 4000; ++k) {
    const double f = lo + (hi - lo) * k / 4000.0;
    const double m = mag(g, f);
    if (m > best) {
      best = m;
      at = f;
    }
  }
  return at;
}

Matrix excitation(std::size_t n, std::uint64_t seed) {
  Matrix u(static_cast<Eigen::Index>(n), 2);
  u.col(0) = rbs(n, 0.03, 0.5, seed);
  u.col(1) = rbs(n, 0.03, 0.5, seed + 1);
  return u;
}

}  // namespace

TEST_CASE("nominal grid") {
  const StateSpace g = make_nominal_grid(GridScenario{});
  CHECK(g.inputs() == 2);
  CHECK(g.outputs() == 2);
  CHECK(g.states() <= 8);
  CHECK(spectral_abscissa(g.A) < 0.0);
  const Matrix dc = dc_gain(g);
  CHECK(dc(0, 0) == Approx(1.0 / 21.0));
  CHECK(dc(1, 1) > 0.0);

  GridScenario sc;
  sc.k_pv = 0.0;
  sc.k_qf = 0.0;
  const StateSpace d = make_nominal_grid(sc);
  for (double f : {0.0, 0.1, 1.0, 10.0}) {
    CHECK(mag(d, f, 0, 1) == 0.0);
    CHECK(mag(d, f, 1, 0) == 0.0);
  }
}

TEST_CASE("scenario validation") {
  GridScenario sc;
  sc.inertia_h = 0.0;
  CHECK_THROWS_AS(make_grid(sc), ValidationError);
  sc = GridScenario{};
  sc.mode = OscillatoryMode{1.0, 0.0, 0.1};
  CHECK_THROWS_AS(make_grid(sc), ValidationError);
}

TEST_CASE("oscillatory grid resonance") {
  GridScenario sc;
  sc.mode = OscillatoryMode{};
  const StateSpace g = make_oscillatory_grid(sc);
  CHECK(spectral_abscissa(g.A) < 0.0);
  const double p = peak_hz(g, 0.3, 3.0);
  CHECK(p >= 0.9);
  CHECK(p <= 1.1);
  const double db = 20.0 * std::log10(mag(g, p) / std::max(mag(g, p / 10.0), mag(g, p * 10.0)));
  CHECK(db >= 10.0);
  // the mode also shows in the df/dq channel
  CHECK(peak_hz(StateSpace(g.A, g.B.col(1), g.C.row(0)), 0.3, 3.0) == Approx(p).epsilon(0.05));
}

TEST_CASE("heavily damped mode has no resonance") {
  GridScenario sc;
  sc.mode = OscillatoryMode{1.0, 0.5, 0.1};
  const StateSpace g = make_oscillatory_grid(sc);
  const double ref = std::max(mag(g, 0.1), mag(g, 10.0));
  CHECK(20.0 * std::log10(mag(g, 1.0) / ref) < 10.0);
}

TEST_CASE("peak grows as damping falls") {
  double last = 0.0;
  for (double z : {0.05, 0.03, 0.01}) {
    GridScenario sc;
    sc.mode = OscillatoryMode{1.0, z, 0.1};
    const StateSpace g = make_oscillatory_grid(sc);
    const double m = mag(g, peak_hz(g, 0.8, 1.2));
    CHECK(m > last);
    last = m;
  }
}

TEST_CASE("noiseless dataset equals the simulation") {
  const StateSpace g = make_nominal_grid(GridScenario{});
  const Matrix u = excitation(2000, 3);
  const TimeSeriesDataset d = generate_dataset(g, u, NoiseSpec{}, 1e-3, 5);
  const Matrix y = simulate(discretize_zoh(g, 1e-3), u);
  CHECK((d.y - y).norm() == 0.0);
  CHECK(d.u == u);
}

TEST_CASE("noise power at 40 dB") {
  const StateSpace g = make_nominal_grid(GridScenario{});
  const Matrix u = excitation(40000, 7);
  const Matrix clean = generate_dataset(g, u, NoiseSpec{}, 1e-3, 1).y;
  const Matrix noisy = generate_dataset(g, u, NoiseSpec{40.0, {}}, 1e-3, 1).y;
  for (Eigen::Index j = 0; j < 2; ++j) {
    const double signal = clean.col(j).squaredNorm() / static_cast<double>(clean.rows());
    const double noise = (noisy.col(j) - clean.col(j)).squaredNorm() / static_cast<double>(clean.rows());
    CHECK(std::abs(noise / (signal * 1e-4) - 1.0) <= 0.05);
  }
}

TEST_CASE("zero excitation gives pure noise") {
  const StateSpace g = make_nominal_grid(GridScenario{});
  const Matrix u = Matrix::Zero(5000, 2);
  const TimeSeriesDataset d = generate_dataset(g, u, NoiseSpec{40.0, 1e-4}, 1e-3, 2);
  const double var = d.y.col(0).squaredNorm() / 5000.0;
  CHECK(var == Approx(1e-8).epsilon(0.1));
}

TEST_CASE("dataset generation is reproducible") {
  const StateSpace g = make_nominal_grid(GridScenario{});
  const Matrix u = excitation(3000, 4);
  const TimeSeriesDataset a = generate_dataset(g, u, NoiseSpec{30.0, {}}, 1e-3, 9);
  const TimeSeriesDataset b = generate_dataset(g, u, NoiseSpec{30.0, {}}, 1e-3, 9);
  const TimeSeriesDataset c = generate_dataset(g, u, NoiseSpec{30.0, {}}, 1e-3, 10);
  CHECK(a.y == b.y);
  CHECK(a.y != c.y);
}

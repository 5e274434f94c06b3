#include "asopt/gridsim.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <array>

#include "asopt/error.hpp"

namespace asopt {

void TimeSeriesDataset::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dataset dt must be positive");
  if (u.cols() != 2 || y.cols() != 2) throw ValidationError("dataset needs 2 input and 2 output channels");
  if (u.rows() != y.rows()) throw ValidationError("dataset input and output lengths differ");
  if (u.rows() < 100) throw ValidationError("dataset needs at least 100 samples");
  if (!u.allFinite() || !y.allFinite()) throw ValidationError("dataset samples must be finite");
}

void GridScenario::validate() const {
  if (!(inertia_h > 0.0)) throw ValidationError("inertia H must be positive");
  if (!(tau_v > 0.0)) throw ValidationError("voltage time constant must be positive");
  if (!(governor_time > 0.0)) throw ValidationError("governor time constant must be positive");
  for (double v : {inertia_h, load_damping, governor_gain, governor_time, k_v, tau_v, k_pv, k_qf}) {
    if (!std::isfinite(v)) throw ValidationError("scenario parameters must be finite");
  }
  if (mode) {
    if (!(mode->zeta > 0.0)) throw ValidationError("oscillatory mode damping ratio must be positive");
    if (!(mode->freq_hz > 0.0)) throw ValidationError("oscillatory mode frequency must be positive");
    if (!std::isfinite(mode->participation)) throw ValidationError("mode participation must be finite");
  }
}

namespace {

void require_stable(const StateSpace& g) {
  if (!(spectral_abscissa(g.A) < 0.0)) throw ValidationError("scenario yields an unstable grid model");
}

}  // namespace

StateSpace make_nominal_grid(const GridScenario& sc) {
  sc.validate();
  const double m = 2.0 * sc.inertia_h;
  Matrix a(3, 3), b(3, 2), c = Matrix::Zero(2, 3);
  a << -sc.load_damping / m, 1.0 / m, 0.0,
       -sc.governor_gain / sc.governor_time, -1.0 / sc.governor_time, 0.0,
       0.0, 0.0, -1.0 / sc.tau_v;
  b << 1.0 / m, sc.k_qf / m,
       0.0, 0.0,
       sc.k_pv / sc.tau_v, sc.k_v / sc.tau_v;
  c(0, 0) = 1.0;
  c(1, 2) = 1.0;
  StateSpace g(std::move(a), std::move(b), std::move(c));
  require_stable(g);
  return g;
}

StateSpace make_oscillatory_grid(const GridScenario& sc) {
  if (!sc.mode) throw ValidationError("oscillatory grid needs a mode");
  const StateSpace base = make_nominal_grid(sc);
  const double w0 = 2.0 * std::numbers::pi * sc.mode->freq_hz;
  const double g = sc.mode->participation;
  const Eigen::Index n = base.states();
  Matrix a = Matrix::Zero(n + 2, n + 2), b = Matrix::Zero(n + 2, 2), c = Matrix::Zero(2, n + 2);
  a.topLeftCorner(n, n) = base.A;
  a(n, n + 1) = 1.0;
  a(n + 1, n) = -w0 * w0;
  a(n + 1, n + 1) = -2.0 * sc.mode->zeta * w0;
  b.topRows(n) = base.B;
  b(n + 1, 0) = g;
  b(n + 1, 1) = 0.3 * g;
  c.leftCols(n) = base.C;
  c(0, n + 1) = 1.0;
  c(1, n + 1) = 0.5;
  StateSpace out(std::move(a), std::move(b), std::move(c));
  require_stable(out);
  return out;
}

StateSpace make_grid(const GridScenario& sc) { return sc.mode ? make_oscillatory_grid(sc) : make_nominal_grid(sc); }

TimeSeriesDataset generate_dataset(const StateSpace& grid, const Matrix& excitation, const NoiseSpec& noise,
                                   double dt, std::uint64_t seed) {
  if (grid.inputs() != 2 || grid.outputs() != 2) throw ValidationError("grid model must be 2x2");
  if (excitation.cols() != 2) throw ValidationError("excitation needs 2 channels");
  if (!(dt > 0.0)) throw ValidationError("dt must be positive");
  TimeSeriesDataset ds;
  ds.dt = dt;
  ds.u = excitation;
  ds.y = simulate(discretize_zoh(grid, dt), excitation);
  if (noise.snr_db && std::isfinite(*noise.snr_db)) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<double, 2> sigma{};
    for (Eigen::Index j = 0; j < 2; ++j) {
      const double power = noise.reference_power ? *noise.reference_power : ds.y.col(j).squaredNorm() /
                                                                                static_cast<double>(ds.y.rows());
      sigma[static_cast<std::size_t>(j)] = std::sqrt(power / std::pow(10.0, *noise.snr_db / 10.0));
    }
    for (Eigen::Index k = 0; k < ds.y.rows(); ++k) {
      for (Eigen::Index j = 0; j < 2; ++j) ds.y(k, j) += sigma[static_cast<std::size_t>(j)] * normal(rng);
    }
  }
  ds.validate();
  return ds;
}

}  // namespace asopt

#pragma once

#include <cstdint>
#include <optional>

#include "asopt/state_space.hpp"

namespace asopt {

/// Input/output record of the terminal: u = [dp, dq], y = [df, dv].
struct TimeSeriesDataset {
  double dt = 0.0;
  Matrix u;  // samples x 2
  Matrix y;  // samples x 2

  Eigen::Index samples() const { return u.rows(); }
  /// Throws ValidationError unless dt > 0, both blocks have the same
  /// length (>= 100) and every sample is finite.
  void validate() const;
};

struct OscillatoryMode {
  double freq_hz = 1.0;
  double zeta = 0.03;
  double participation = 0.1;
};

/// Aggregate swing/governor frequency dynamics, first-order voltage
/// dynamics, weak cross couplings and an optional lightly damped mode.
struct GridScenario {
  double inertia_h = 5.0;       // s
  double load_damping = 1.0;    // p.u.
  double governor_gain = 20.0;  // p.u.
  double governor_time = 0.5;   // s
  double k_v = 0.05;            // p.u./p.u.
  double tau_v = 0.2;           // s
  double k_pv = 0.02;           // dp -> dv
  double k_qf = 0.02;           // dq -> df
  std::optional<OscillatoryMode> mode;

  void validate() const;
};

/// States [df, governor power, dv]. Positive dp raises frequency and
/// positive dq raises voltage; G11(0) = 1 / (load_damping + governor_gain).
StateSpace make_nominal_grid(const GridScenario& sc);

/// Nominal grid plus a second-order mode excited by both injections and
/// seen in both measurements. Requires sc.mode with 0 < zeta.
StateSpace make_oscillatory_grid(const GridScenario& sc);

/// Nominal or oscillatory depending on whether sc.mode is set.
StateSpace make_grid(const GridScenario& sc);

struct NoiseSpec {
  /// Output signal-to-noise ratio in dB; nullopt means noiseless.
  std::optional<double> snr_db;
  /// Power the SNR refers to, per output. When unset the power of the
  /// noiseless output channel is used.
  std::optional<double> reference_power;
};

/// ZOH simulation of `grid` under `excitation` (samples x 2) plus additive
/// white Gaussian output noise. Deterministic in `seed`.
TimeSeriesDataset generate_dataset(const StateSpace& grid, const Matrix& excitation, const NoiseSpec& noise,
                                   double dt, std::uint64_t seed);

}  // namespace asopt

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "asopt/gridsim.hpp"
#include "asopt/state_space.hpp"

namespace asopt {

/// Random binary sequence in {+amplitude, -amplitude}; the sign flips with
/// probability switch_prob at every sample.
Vector rbs(std::size_t length, double amplitude, double switch_prob, std::uint64_t seed);

/// na, nb >= 1; nk >= 0 (nk = 0 gives a direct feedthrough term).
struct ArxOrders {
  int na = 1;
  int nb = 1;
  int nk = 1;
};

/// Per-output MISO ARX model
///   y_i[k] + sum_j a_i[j] y_i[k-1-j] = sum_c sum_j b_ic[j] u_c[k-nk-j] + e_i[k].
struct ArxModel {
  ArxOrders orders;
  double dt = 0.0;
  std::vector<Vector> a;               // per output, length na
  std::vector<std::vector<Vector>> b;  // [output][input], length nb
  Vector residual_variance;            // per output

  Eigen::Index outputs() const { return static_cast<Eigen::Index>(a.size()); }
  Eigen::Index inputs() const { return b.empty() ? 0 : static_cast<Eigen::Index>(b.front().size()); }
};

struct ArxOptions {
  /// First-order high-pass on inputs and outputs (same filter on both).
  bool highpass = true;
  double highpass_cutoff_hz = 0.01;
  /// Steiglitz-McBride passes: refit on data filtered by 1/A of the previous
  /// estimate. Zero gives the plain equation-error estimate.
  int refine_iterations = 20;
};

/// Least-squares ARX fit, one regression per output, solved by orthogonal
/// factorization. Throws ValidationError when an input channel is not
/// persistently exciting for the requested order.
ArxModel fit_arx(const TimeSeriesDataset& train, const ArxOrders& orders, const ArxOptions& options = {});

/// Simulated (not one-step-ahead) output of the model from rest.
Matrix arx_simulate(const ArxModel& model, const Matrix& u);

/// Largest pole magnitude over all outputs.
double arx_spectral_radius(const ArxModel& model);

struct ArxRealization {
  DiscreteStateSpace sys;
  Matrix d;  // nonzero only for nk = 0
};

/// Observer-canonical realization, one block of max(na, nb + nk - 1)
/// states per output.
ArxRealization arx_realize(const ArxModel& model);

/// 100 (1 - |y - yhat| / |y - mean(y)|) per channel.
Vector nrmse_fit(const Matrix& y, const Matrix& yhat);

struct OrderSelection {
  ArxModel best;
  std::vector<ArxOrders> candidates;
  std::vector<double> mean_fit;  // NaN for candidates that were unstable
};

/// Picks the candidate with the best mean validation fit. A larger model
/// (by na + nb) only replaces a smaller one when it improves the fit by more
/// than 0.1 percentage points.
OrderSelection select_order(const TimeSeriesDataset& train, const TimeSeriesDataset& val,
                            const std::vector<ArxOrders>& candidates, const ArxOptions& options = {});

enum class D2cMethod { ZohInverse, Tustin };

struct ContinuousModel {
  StateSpace sys;
  Matrix feedthrough;
};

/// Continuous equivalent of a discrete system x[k+1] = Ad x + Bd u,
/// y = C x + D u. ZohInverse maps every mode z to log(z)/dt, which is exact
/// for data sampled behind a zero-order hold; modes on the non-positive real
/// axis have no real logarithm and use the bilinear map instead. Tustin uses
/// the bilinear map for all modes. Throws NumericalError for a pole at
/// z = -1 or a defective mode basis.
ContinuousModel discrete_to_continuous(const DiscreteStateSpace& sys, const Matrix& d, D2cMethod method);

struct ArxToCtOptions {
  D2cMethod method = D2cMethod::ZohInverse;
  double max_feedthrough = 1e-3;
};

/// Strictly proper continuous model of an ARX fit. The feedthrough of the
/// conversion is dropped when its norm is below max_feedthrough; otherwise
/// the conversion is rejected.
StateSpace arx_to_ct(const ArxModel& model, const ArxToCtOptions& options = {});

struct ReducedModel {
  StateSpace sys;
  Vector hankel_singular_values;
  double error_bound = 0.0;  // 2 * sum of discarded Hankel singular values
};

/// Balanced truncation (square-root method). The result is in balanced
/// coordinates even when every state is kept; states with numerically zero
/// Hankel singular values are always dropped. Throws NumericalError for
/// unstable input.
ReducedModel reduce(const StateSpace& sys, Eigen::Index order);

/// Smallest truncation whose error bound is at most rel_tol times the
/// largest Hankel singular value.
ReducedModel reduce_to_tolerance(const StateSpace& sys, double rel_tol);

struct FitReport {
  Vector fit_percent;
  std::optional<double> bode_error_max;  // relative, vs truth
  std::optional<double> bode_error_median;
};

/// Simulated-output fit on `data`, plus the relative frequency-response error
/// against `truth` over [band_lo_hz, band_hi_hz] when a truth model is given.
FitReport validate(const StateSpace& model, const TimeSeriesDataset& data, const StateSpace* truth = nullptr,
                   double band_lo_hz = 0.01, double band_hi_hz = 10.0);
FitReport validate(const ArxModel& model, const TimeSeriesDataset& data);

/// Relative error |H(jw) - H_truth(jw)|_F / |H_truth(jw)|_F at `points`
/// log-spaced frequencies in the band; returns (median, max).
std::pair<double, double> bode_error(const StateSpace& model, const StateSpace& truth, double lo_hz, double hi_hz,
                                     int points = 200);

}  // namespace asopt

#pragma once

#include <optional>
#include <string>

#include "asopt/config.hpp"
#include "asopt/optimizer.hpp"
#include "asopt/sysid.hpp"

namespace asopt {

struct DatasetPair {
  TimeSeriesDataset train;
  TimeSeriesDataset val;
};

/// Grid model of a simulated scenario. Throws ValidationError for
/// kind == "dataset", which has no known truth.
StateSpace scenario_truth(const ScenarioConfig& scenario);

/// Simulated identification experiment: independent random binary sequences
/// on dp and dq, measured df and dv with optional white noise at the given
/// SNR. The validation record uses an independent draw.
DatasetPair synthesize_datasets(const StateSpace& grid, const IdentificationConfig& cfg);

/// Leading `train_fraction` of the samples for estimation, the rest for
/// validation.
DatasetPair split_dataset(const TimeSeriesDataset& data, double train_fraction = 0.7);

/// Datasets for the configured scenario: the CSV file when kind == "dataset",
/// simulated records otherwise.
DatasetPair scenario_datasets(const PipelineConfig& cfg);

struct IdentificationResult {
  OrderSelection selection;
  StateSpace full;        // continuous realization of the selected ARX model
  ReducedModel reduced;   // balanced truncation of `full`
  FitReport report;       // reduced model on the validation record
  std::optional<double> peak_hz;        // resonance of |df/dp|, if interior
  std::optional<double> truth_peak_hz;  // same for the true grid
};

/// ARX order selection over (n, n, 1) for n in cfg.orders, conversion to
/// continuous time and reduction. Throws NumericalError("unstable") if the
/// identified model is not stable.
IdentificationResult identify_model(const DatasetPair& data, const IdentificationConfig& cfg,
                                    const StateSpace* truth = nullptr);

/// Frequency of the largest |G(jw)(0,0)| in [lo_hz, hi_hz], or nothing if
/// the maximum lies on an edge of the band.
std::optional<double> resonance_hz(const StateSpace& sys, double lo_hz = 0.1, double hi_hz = 3.0);

std::string identification_to_json(const IdentificationResult& result);

struct PipelineResult {
  IdentificationResult identification;
  AlphaParams alpha0;
  OptRun run;
  ComparisonReport comparison;
};

/// Identification, then optimization and baseline comparison on the
/// identified model.
PipelineResult run_pipeline(const PipelineConfig& cfg);

}  // namespace asopt

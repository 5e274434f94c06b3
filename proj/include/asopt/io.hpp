#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "asopt/gridsim.hpp"
#include "asopt/lti.hpp"
#include "asopt/optimizer.hpp"
#include "asopt/services.hpp"
#include "asopt/state_space.hpp"
#include "asopt/sysid.hpp"

namespace asopt {

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

std::string read_file(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_file(const std::filesystem::path& path, const std::string& content);

struct CsvTable {
  std::vector<std::string> header;
  Matrix data;  // rows x header.size()

  /// Index of a named column; throws ValidationError if absent.
  Eigen::Index column(const std::string& name) const;
};

std::string to_csv(const std::vector<std::string>& header, const Matrix& data);
/// Numeric CSV with one header line. Throws ValidationError on ragged rows
/// or non-numeric cells.
CsvTable parse_csv(const std::string& text);

/// `t,dp,dq,df,dv`
std::string dataset_to_csv(const TimeSeriesDataset& data);
/// Reads `t,dp,dq,df,dv` (column order free). The sample time is inferred
/// from t and must be uniform to 1e-9 s.
TimeSeriesDataset dataset_from_csv(const CsvTable& table);
TimeSeriesDataset read_dataset(const std::filesystem::path& path);

/// `t,df,dfdot,dv,dp,dq`
std::string traces_to_csv(const DisturbanceResult& result);

/// `iter,J,grad_norm,step,<parameter names of the enabled products>`
std::string history_to_csv(const std::vector<IterationRecord>& history, const AlphaParams& shape);

/// Log-spaced frequency sweep of 2x2 models, one magnitude [dB] and phase
/// [deg] column per model and channel: `freq_hz,omega,<name>_g11_mag_db,...`.
std::string bode_to_csv(const std::vector<std::pair<std::string, StateSpace>>& models, double lo_hz, double hi_hz,
                        int points = 400);

/// Exact curves and Pade-realized step responses of every enabled product:
/// `t,fcr_exact,fcr_tf,ffr_exact,ffr_tf,aux_tf,vq_exact,vq_tf`.
std::string step_curves_to_csv(const AlphaParams& alpha, const Droops& droops, int pade_order, double dt,
                               double horizon);

/// {"format": "asopt.state_space", "A": [[...]], "B": ..., "C": ...}
std::string model_to_json(const StateSpace& sys);
StateSpace model_from_json(const std::string& text);
StateSpace read_model(const std::filesystem::path& path);

/// Curves, delay terms and realizations of the desired response.
std::string tdes_to_json(const AlphaParams& alpha, const Droops& droops, int pade_order);

std::string metrics_to_json(const DisturbanceMetrics& metrics, const PerfWeights& weights);
std::string comparison_to_json(const ComparisonReport& report, const PerfWeights& weights);
std::string optimization_to_json(const OptRun& run, const PerfWeights& weights);

}  // namespace asopt

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "asopt/gridsim.hpp"
#include "asopt/lti.hpp"
#include "asopt/optimizer.hpp"
#include "asopt/services.hpp"
#include "asopt/sysid.hpp"

namespace asopt {

/// Value of one key in the configuration file.
using ConfigValue = std::variant<double, bool, std::string, std::vector<double>>;

/// Parsed configuration: section name ("limits.device") -> key -> value.
using ConfigDocument = std::map<std::string, std::map<std::string, ConfigValue>>;

/// Parses the TOML subset used by configuration files: [section] and
/// [dotted.section] headers, `key = value` with numbers, booleans, quoted
/// strings, inf/nan and flat numeric arrays, and # comments. Throws
/// ValidationError with the line number on malformed input.
ConfigDocument parse_config(const std::string& text);

struct ScenarioConfig {
  /// "nominal", "oscillatory" or "dataset".
  std::string kind = "nominal";
  /// CSV `t,dp,dq,df,dv`, used when kind == "dataset".
  std::string dataset;
  GridScenario grid;
};

struct IdentificationConfig {
  double dt = 1e-3;
  double duration = 40.0;
  double amplitude = 0.03;
  double switch_prob = 0.5;
  std::optional<double> snr_db = 40.0;
  std::uint64_t seed = 1;
  std::vector<int> orders = {2, 4, 6, 8, 12};
  ArxOptions arx;
  D2cMethod d2c = D2cMethod::ZohInverse;
  double reduce_tol = 1e-6;
};

struct PipelineConfig {
  ScenarioConfig scenario;
  IdentificationConfig identification;
  /// Enabled products and starting values (baseline where unspecified).
  AlphaParams start;
  Droops droops;
  LimitSet limits;
  PerfWeights weights;
  OptimizerConfig optimizer;
  SimulationSettings simulation;
};

/// Builds a validated PipelineConfig. Unknown sections or keys and wrongly
/// typed values throw ValidationError. Relative dataset paths are resolved
/// against `base_dir`.
PipelineConfig pipeline_config(const ConfigDocument& doc, const std::string& base_dir = ".");
PipelineConfig load_pipeline_config(const std::string& path);

/// Writes a configuration that parses back to the same PipelineConfig.
std::string to_config_text(const PipelineConfig& cfg);

/// [fcr]/[ffr]/[aux]/[vq] sections for a parameter vector.
std::string alpha_to_config_text(const AlphaParams& alpha);

/// Reads products from [fcr]/[ffr]/[aux]/[vq]; missing values are taken from
/// `defaults`. A section with `enabled = false` disables the product.
AlphaParams alpha_from_config(const ConfigDocument& doc, const AlphaParams& defaults);

}  // namespace asopt

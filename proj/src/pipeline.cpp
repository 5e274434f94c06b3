#include "asopt/pipeline.hpp"

#include <cmath>
#include <numbers>

#include "asopt/error.hpp"
#include "asopt/io.hpp"
#include "json.hpp"

namespace asopt {

StateSpace scenario_truth(const ScenarioConfig& scenario) {
  if (scenario.kind == "dataset") throw ValidationError("a dataset scenario has no reference grid model");
  return make_grid(scenario.grid);
}

DatasetPair synthesize_datasets(const StateSpace& grid, const IdentificationConfig& cfg) {
  if (!(cfg.dt > 0.0) || !(cfg.duration > cfg.dt)) throw ValidationError("identification needs dt > 0 and duration > dt");
  const auto n = static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
  // Three streams per record (dp, dq, noise), records at seed and seed + 1.
  auto record = [&](std::uint64_t seed) {
    Matrix u(static_cast<Eigen::Index>(n), 2);
    u.col(0) = rbs(n, cfg.amplitude, cfg.switch_prob, 3 * seed);
    u.col(1) = rbs(n, cfg.amplitude, cfg.switch_prob, 3 * seed + 1);
    return generate_dataset(grid, u, NoiseSpec{cfg.snr_db, {}}, cfg.dt, 3 * seed + 2);
  };
  return {record(cfg.seed), record(cfg.seed + 1)};
}

DatasetPair split_dataset(const TimeSeriesDataset& data, double train_fraction) {
  data.validate();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train fraction must be in (0, 1)");
  const Eigen::Index n = data.samples();
  const auto k = static_cast<Eigen::Index>(std::floor(train_fraction * static_cast<double>(n)));
  if (k < 2 || n - k < 2) throw ValidationError("dataset too short to split into estimation and validation parts");
  DatasetPair p;
  p.train = {data.dt, data.u.topRows(k), data.y.topRows(k)};
  p.val = {data.dt, data.u.bottomRows(n - k), data.y.bottomRows(n - k)};
  return p;
}

DatasetPair scenario_datasets(const PipelineConfig& cfg) {
  if (cfg.scenario.kind == "dataset") return split_dataset(read_dataset(cfg.scenario.dataset));
  return synthesize_datasets(scenario_truth(cfg.scenario), cfg.identification);
}

std::optional<double> resonance_hz(const StateSpace& sys, double lo_hz, double hi_hz) {
  constexpr int kPoints = 4000;
  std::vector<double> omegas(kPoints);
  for (int k = 0; k < kPoints; ++k) {
    omegas[static_cast<std::size_t>(k)] =
        2.0 * std::numbers::pi * (lo_hz + (hi_hz - lo_hz) * static_cast<double>(k) / (kPoints - 1));
  }
  const auto resp = freq_response(sys, omegas);
  int best = 0;
  for (int k = 1; k < kPoints; ++k) {
    if (std::abs(resp[static_cast<std::size_t>(k)](0, 0)) > std::abs(resp[static_cast<std::size_t>(best)](0, 0))) {
      best = k;
    }
  }
  if (best == 0 || best == kPoints - 1) return std::nullopt;
  return omegas[static_cast<std::size_t>(best)] / (2.0 * std::numbers::pi);
}

IdentificationResult identify_model(const DatasetPair& data, const IdentificationConfig& cfg,
                                    const StateSpace* truth) {
  if (cfg.orders.empty()) throw ValidationError("no candidate ARX orders");
  std::vector<ArxOrders> candidates;
  for (int n : cfg.orders) {
    if (n < 1) throw ValidationError("ARX orders must be >= 1");
    candidates.push_back({n, n, 1});
  }
  IdentificationResult r;
  r.selection = select_order(data.train, data.val, candidates, cfg.arx);
  r.full = arx_to_ct(r.selection.best, ArxToCtOptions{cfg.d2c});
  r.reduced = reduce_to_tolerance(r.full, cfg.reduce_tol);
  if (!(spectral_abscissa(r.reduced.sys.A) < 0.0)) {
    throw NumericalError("unstable", "identified continuous-time model is not stable");
  }
  r.report = validate(r.reduced.sys, data.val, truth);
  r.peak_hz = resonance_hz(r.reduced.sys);
  if (truth) r.truth_peak_hz = resonance_hz(*truth);
  return r;
}

std::string identification_to_json(const IdentificationResult& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v && std::isfinite(*v) ? json(*v) : json(nullptr); };
  json cands = json::array();
  for (std::size_t i = 0; i < r.selection.candidates.size(); ++i) {
    const auto& c = r.selection.candidates[i];
    const double f = r.selection.mean_fit[i];
    cands.push_back({{"na", c.na}, {"nb", c.nb}, {"nk", c.nk}, {"mean_fit", std::isfinite(f) ? json(f) : json(nullptr)}});
  }
  const ArxModel& m = r.selection.best;
  json lengths = json::array();
  for (std::size_t i = 0; i < m.a.size(); ++i) {
    lengths.push_back({{"na", m.a[i].size()}, {"nb", m.b[i].empty() ? 0 : m.b[i].front().size()}});
  }
  json hsv = json::array();
  for (Eigen::Index i = 0; i < r.reduced.hankel_singular_values.size(); ++i) hsv.push_back(r.reduced.hankel_singular_values(i));
  json fit = json::array();
  for (Eigen::Index i = 0; i < r.report.fit_percent.size(); ++i) fit.push_back(r.report.fit_percent(i));
  json j;
  j["candidates"] = cands;
  j["selected"] = {{"na", m.orders.na}, {"nb", m.orders.nb}, {"nk", m.orders.nk}};
  j["effective_orders"] = lengths;
  j["full_states"] = r.full.states();
  j["reduced_states"] = r.reduced.sys.states();
  j["hankel_singular_values"] = hsv;
  j["reduction_error_bound"] = r.reduced.error_bound;
  j["validation_fit_percent"] = fit;
  j["bode_error_max"] = opt(r.report.bode_error_max);
  j["bode_error_median"] = opt(r.report.bode_error_median);
  j["peak_hz"] = opt(r.peak_hz);
  j["truth_peak_hz"] = opt(r.truth_peak_hz);
  return j.dump(2) + "\n";
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  PipelineResult res;
  std::optional<StateSpace> truth;
  if (cfg.scenario.kind != "dataset") truth = scenario_truth(cfg.scenario);
  res.identification = identify_model(scenario_datasets(cfg), cfg.identification, truth ? &*truth : nullptr);
  const StateSpace& model = res.identification.reduced.sys;
  res.alpha0 = project(cfg.start, cfg.droops, cfg.limits);
  res.run = optimize(model, cfg.droops, cfg.limits, cfg.weights, cfg.optimizer, res.alpha0);
  res.comparison = compare_baseline(model, cfg.droops, cfg.limits, cfg.weights, res.run.alpha_star,
                                    cfg.optimizer.pade_order, cfg.simulation);
  return res;
}

}  // namespace asopt

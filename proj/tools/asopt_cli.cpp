#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "asopt/config.hpp"
#include "asopt/error.hpp"
#include "asopt/io.hpp"
#include "asopt/pipeline.hpp"

namespace fs = std::filesystem;
using namespace asopt;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<int> pade_order;
  std::optional<double> epsilon;
  std::optional<std::string> snr;
  std::string data;
  std::string model;
  std::string alpha;
  std::string run;
  bool out_given = false;
};

PipelineConfig effective_config(const Options& o) {
  PipelineConfig cfg = o.config.empty() ? pipeline_config({}) : load_pipeline_config(o.config);
  if (o.seed) {
    cfg.identification.seed = *o.seed;
    cfg.optimizer.seed = *o.seed;
  }
  if (o.pade_order) cfg.optimizer.pade_order = *o.pade_order;
  if (o.epsilon) cfg.weights.epsilon = *o.epsilon;
  if (o.snr) {
    if (*o.snr == "inf" || *o.snr == "none") {
      cfg.identification.snr_db.reset();
    } else {
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(*o.snr, &used);
        if (used != o.snr->size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ValidationError("--snr expects a number in dB or 'inf', got '" + *o.snr + "'");
      }
      cfg.identification.snr_db = v;
    }
  }
  cfg.optimizer.validate();
  cfg.weights.validate();
  return cfg;
}

AlphaParams resolve_alpha(const Options& o, const PipelineConfig& cfg) {
  if (o.alpha.empty()) return cfg.start;
  const ConfigDocument doc = parse_config(read_file(o.alpha));
  for (const auto& [section, _] : doc) {
    if (section != "fcr" && section != "ffr" && section != "aux" && section != "vq") {
      throw ValidationError("parameter file '" + o.alpha + "' may only contain [fcr], [ffr], [aux] and [vq], found [" +
                            section + "]");
    }
  }
  AlphaParams a = alpha_from_config(doc, cfg.start);
  if (!a.fcr && !a.ffr && !a.aux && !a.vq) throw ValidationError("every product is disabled");
  return a;
}

StateSpace resolve_plant(const Options& o, const PipelineConfig& cfg) {
  if (!o.model.empty()) return read_model(o.model);
  if (cfg.scenario.kind == "dataset") throw ValidationError("a dataset scenario needs --model for this command");
  return scenario_truth(cfg.scenario);
}

std::optional<StateSpace> known_truth(const PipelineConfig& cfg) {
  if (cfg.scenario.kind == "dataset") return std::nullopt;
  return scenario_truth(cfg.scenario);
}

void put(const Options& o, const std::string& name, const std::string& content) { write_file(fs::path(o.out) / name, content); }

std::string bode_csv(const StateSpace& model, const std::optional<StateSpace>& truth) {
  std::vector<std::pair<std::string, StateSpace>> models = {{"model", model}};
  if (truth) models.emplace_back("truth", *truth);
  return bode_to_csv(models, 0.01, 10.0);
}

ClosedLoop stable_loop(const StateSpace& plant, const AlphaParams& alpha, const PipelineConfig& cfg) {
  ClosedLoop cl = close_loop(augment_grid(plant, cfg.weights), build_tdes(alpha, cfg.droops, cfg.optimizer.pade_order));
  if (!is_hurwitz(cl.A, cfg.optimizer.stability_margin)) {
    throw NumericalError("unstable", "closed loop is unstable for the given parameters");
  }
  return cl;
}

void cmd_translate(const Options& o) {
  const PipelineConfig cfg = effective_config(o);
  const AlphaParams a = resolve_alpha(o, cfg);
  put(o, "config.toml", to_config_text(cfg));
  put(o, "tdes.json", tdes_to_json(a, cfg.droops, cfg.optimizer.pade_order));
  put(o, "step_response.csv",
      step_curves_to_csv(a, cfg.droops, cfg.optimizer.pade_order, cfg.simulation.dt, cfg.simulation.horizon));
}

void cmd_baseline(const Options& o) {
  const PipelineConfig cfg = effective_config(o);
  put(o, "config.toml", to_config_text(cfg));
  put(o, "alpha0.toml", alpha_to_config_text(baseline_alpha(cfg.limits, resolve_alpha(o, cfg))));
}

void cmd_generate(const Options& o) {
  const PipelineConfig cfg = effective_config(o);
  if (cfg.scenario.kind == "dataset") throw ValidationError("generate needs a simulated scenario");
  const DatasetPair d = synthesize_datasets(scenario_truth(cfg.scenario), cfg.identification);
  put(o, "config.toml", to_config_text(cfg));
  put(o, "dataset_train.csv", dataset_to_csv(d.train));
  put(o, "dataset_val.csv", dataset_to_csv(d.val));
}

void write_identification(const Options& o, const IdentificationResult& r, const std::optional<StateSpace>& truth) {
  put(o, "model.json", model_to_json(r.reduced.sys));
  put(o, "identification.json", identification_to_json(r));
  put(o, "bode.csv", bode_csv(r.reduced.sys, truth));
}

void cmd_identify(const Options& o) {
  const PipelineConfig cfg = effective_config(o);
  std::optional<StateSpace> truth;
  DatasetPair data;
  if (!o.data.empty()) {
    data = split_dataset(read_dataset(o.data));
  } else {
    truth = known_truth(cfg);
    data = scenario_datasets(cfg);
  }
  const IdentificationResult r = identify_model(data, cfg.identification, truth ? &*truth : nullptr);
  put(o, "config.toml", to_config_text(cfg));
  write_identification(o, r, truth);
}

void cmd_optimize(const Options& o) {
  const PipelineConfig cfg = effective_config(o);
  const StateSpace plant = resolve_plant(o, cfg);
  const OptRun run = optimize(plant, cfg.droops, cfg.limits, cfg.weights, cfg.optimizer, resolve_alpha(o, cfg));
  put(o, "config.toml", to_config_text(cfg));
  put(o, "alpha_star.toml", alpha_to_config_text(run.alpha_star));
  put(o, "history.csv", history_to_csv(run.history, run.alpha_star));
  put(o, "optimize.json", optimization_to_json(run, cfg.weights));
}

void cmd_simulate(const Options& o) {
  const PipelineConfig cfg = effective_config(o);
  const ClosedLoop cl = stable_loop(resolve_plant(o, cfg), resolve_alpha(o, cfg), cfg);
  const DisturbanceResult r = simulate_disturbance(cl, cfg.simulation.disturbance, cfg.simulation.dt,
                                                   cfg.simulation.horizon);
  put(o, "config.toml", to_config_text(cfg));
  put(o, "traces.csv", traces_to_csv(r));
  put(o, "metrics.json", metrics_to_json(r.metrics, cfg.weights));
}

void write_comparison(const Options& o, const StateSpace& plant, const PipelineConfig& cfg, const ComparisonReport& rep) {
  const auto sim = [&](const AlphaParams& a) {
    return simulate_disturbance(stable_loop(plant, a, cfg), cfg.simulation.disturbance, cfg.simulation.dt,
                                cfg.simulation.horizon);
  };
  const DisturbanceResult r0 = sim(rep.alpha0);
  const DisturbanceResult rs = sim(rep.alpha_star);
  put(o, "compare.json", comparison_to_json(rep, cfg.weights));
  put(o, "traces_baseline.csv", traces_to_csv(r0));
  put(o, "traces_optimal.csv", traces_to_csv(rs));
  put(o, "metrics.json", metrics_to_json(rs.metrics, cfg.weights));
}

void cmd_compare(const Options& o) {
  const PipelineConfig cfg = effective_config(o);
  const StateSpace plant = resolve_plant(o, cfg);
  const AlphaParams a = resolve_alpha(o, cfg);
  stable_loop(plant, a, cfg);
  const ComparisonReport rep =
      compare_baseline(plant, cfg.droops, cfg.limits, cfg.weights, a, cfg.optimizer.pade_order, cfg.simulation);
  put(o, "config.toml", to_config_text(cfg));
  write_comparison(o, plant, cfg, rep);
}

void cmd_pipeline(const Options& o) {
  PipelineConfig cfg = effective_config(o);
  cfg.start = resolve_alpha(o, cfg);
  const PipelineResult res = run_pipeline(cfg);
  const std::optional<StateSpace> truth = known_truth(cfg);
  put(o, "config.toml", to_config_text(cfg));
  write_identification(o, res.identification, truth);
  put(o, "alpha0.toml", alpha_to_config_text(res.comparison.alpha0));
  put(o, "alpha_star.toml", alpha_to_config_text(res.run.alpha_star));
  put(o, "history.csv", history_to_csv(res.run.history, res.run.alpha_star));
  put(o, "optimize.json", optimization_to_json(res.run, cfg.weights));
  write_comparison(o, res.identification.reduced.sys, cfg, res.comparison);
}

// Joins two trace files on their time column: t,<col>_alpha0,<col>_alpha_star.
std::string merged_traces(const CsvTable& base, const CsvTable& opt) {
  if (base.header != opt.header || base.data.rows() != opt.data.rows()) {
    throw ValidationError("baseline and optimal traces have different layouts");
  }
  std::vector<std::string> header = {"t"};
  Matrix m(base.data.rows(), 2 * base.data.cols() - 1);
  m.col(0) = base.data.col(base.column("t"));
  Eigen::Index c = 1;
  for (std::size_t i = 0; i < base.header.size(); ++i) {
    if (base.header[i] == "t") continue;
    header.push_back(base.header[i] + "_alpha0");
    header.push_back(base.header[i] + "_alpha_star");
    m.col(c++) = base.data.col(static_cast<Eigen::Index>(i));
    m.col(c++) = opt.data.col(static_cast<Eigen::Index>(i));
  }
  return to_csv(header, m);
}

std::string metrics_csv(const nlohmann::json& cmp) {
  std::string out = "metric,alpha0,alpha_star,change_pct\n";
  auto num = [](const nlohmann::json& v) { return v.is_number() ? format_number(v.get<double>()) : std::string("nan"); };
  auto row = [&](const std::string& name, const nlohmann::json& a, const nlohmann::json& b, const nlohmann::json& pct) {
    out += name + "," + num(a) + "," + num(b) + "," + num(pct) + "\n";
  };
  const auto& b = cmp.at("baseline");
  const auto& s = cmp.at("optimal");
  row("J", cmp.at("J0"), cmp.at("J_star"), cmp.at("J_reduction_pct"));
  row("rocof_max", b.at("rocof_max"), s.at("rocof_max"), cmp.at("rocof_reduction_pct"));
  row("nadir", b.at("nadir"), s.at("nadir"), cmp.at("nadir_improvement_pct"));
  row("v_peak", b.at("v_peak"), s.at("v_peak"), cmp.at("v_peak_reduction_pct"));
  row("damping", cmp.at("damping0"), cmp.at("damping_star"), nlohmann::json(nullptr));
  return out;
}

void cmd_plotdata(Options o) {
  if (o.run.empty()) throw ValidationError("plotdata needs --run <artifact directory>");
  const fs::path run = o.run;
  for (const char* name : {"config.toml", "compare.json", "traces_baseline.csv", "traces_optimal.csv"}) {
    if (!fs::exists(run / name)) throw ValidationError("missing artifact '" + (run / name).string() + "'");
  }
  const PipelineConfig cfg = load_pipeline_config((run / "config.toml").string());
  if (!o.out_given) o.out = (run / "plotdata").string();
  const int pade = o.pade_order.value_or(cfg.optimizer.pade_order);
  const auto alpha_file = [&](const char* name) {
    return alpha_from_config(parse_config(read_file(run / name)), cfg.start);
  };
  const AlphaParams a0 = fs::exists(run / "alpha0.toml") ? alpha_file("alpha0.toml") : baseline_alpha(cfg.limits, cfg.start);
  put(o, "step_response_alpha0.csv",
      step_curves_to_csv(a0, cfg.droops, pade, cfg.simulation.dt, cfg.simulation.horizon));
  if (fs::exists(run / "alpha_star.toml")) {
    put(o, "step_response_alpha_star.csv",
        step_curves_to_csv(alpha_file("alpha_star.toml"), cfg.droops, pade, cfg.simulation.dt, cfg.simulation.horizon));
  }
  if (fs::exists(run / "model.json")) put(o, "bode.csv", bode_csv(read_model(run / "model.json"), known_truth(cfg)));
  put(o, "traces.csv",
      merged_traces(parse_csv(read_file(run / "traces_baseline.csv")), parse_csv(read_file(run / "traces_optimal.csv"))));
  nlohmann::json cmp;
  try {
    cmp = nlohmann::json::parse(read_file(run / "compare.json"));
    put(o, "metrics.csv", metrics_csv(cmp));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("compare.json is malformed: ") + e.what());
  }
  if (fs::exists(run / "history.csv")) put(o, "history.csv", read_file(run / "history.csv"));
}

void report_error(const std::string& command, const std::string& kind, const std::string& message) {
  nlohmann::json rec = {{"error", command}, {"kind", kind}, {"message", message}};
  std::cerr << rec.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ancillary-service parameter optimization: translate grid codes, identify the grid, tune in closed loop"};
  app.require_subcommand(1);
  Options o;

  struct Command {
    const char* name;
    const char* help;
    void (*fn)(const Options&);
  };
  const Command commands[] = {
      {"translate", "Desired response T_des and open-loop step curves", cmd_translate},
      {"baseline", "Cheapest grid-code compliant parameters alpha0", cmd_baseline},
      {"generate", "Simulated identification records for the scenario", cmd_generate},
      {"identify", "ARX identification, model and Bode data", cmd_identify},
      {"optimize", "Projected-gradient H2 optimization from the starting parameters", cmd_optimize},
      {"simulate", "Closed-loop step-disturbance traces and metrics", cmd_simulate},
      {"compare", "Baseline alpha0 versus the given parameters", cmd_compare},
      {"pipeline", "identify, optimize and compare in one run", cmd_pipeline},
  };

  std::string active;
  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "Configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Seed for excitation, noise and multistart draws");
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--pade-order", o.pade_order, "Pade order of every delay term (1-12)");
    sub->add_option("--epsilon", o.epsilon, "Integrator leak of the performance output");
    sub->add_option("--snr", o.snr, "Measurement SNR in dB for simulated records, or 'inf'");
    sub->add_option("--model", o.model, "Grid model JSON (default: the scenario's grid)")->check(CLI::ExistingFile);
    sub->add_option("--alpha", o.alpha, "Parameter file with [fcr]/[ffr]/[aux]/[vq] sections")
        ->check(CLI::ExistingFile);
  };
  std::vector<std::pair<CLI::App*, void (*)(const Options&)>> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    add_common(sub);
    if (std::string(c.name) == "identify") {
      sub->add_option("--data", o.data, "Dataset CSV t,dp,dq,df,dv (split 70/30)")->check(CLI::ExistingFile);
    }
    subs.emplace_back(sub, c.fn);
  }
  CLI::App* plot = app.add_subcommand("plotdata", "CSV bundles for plotting from a run directory");
  add_common(plot);
  plot->add_option("--run", o.run, "Artifact directory of a previous run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    report_error("usage", "validation", e.what());
    return 1;
  }

  try {
    for (const auto& [sub, fn] : subs) {
      if (sub->parsed()) {
        active = sub->get_name();
        fn(o);
      }
    }
    if (plot->parsed()) {
      active = "plotdata";
      o.out_given = plot->get_option("--out")->count() > 0;
      cmd_plotdata(o);
    }
  } catch (const ValidationError& e) {
    report_error(active, "validation", e.what());
    return 1;
  } catch (const NumericalError& e) {
    report_error(active, e.kind(), e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    report_error(active, "validation", e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error(active, "internal", e.what());
    return 2;
  }
  return 0;
}

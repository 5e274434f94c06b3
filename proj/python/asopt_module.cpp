#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "asopt/config.hpp"
#include "asopt/error.hpp"
#include "asopt/gridsim.hpp"
#include "asopt/io.hpp"
#include "asopt/lti.hpp"
#include "asopt/optimizer.hpp"
#include "asopt/pipeline.hpp"
#include "asopt/pwl_tf.hpp"
#include "asopt/services.hpp"
#include "asopt/sysid.hpp"

namespace py = pybind11;
using namespace asopt;

namespace {

py::dict metrics_dict(const DisturbanceMetrics& m) {
  py::dict d;
  d["rocof_max"] = m.rocof_max;
  d["nadir"] = m.nadir;
  d["v_peak"] = m.v_peak;
  d["J"] = m.J;
  return d;
}

py::dict comparison_dict(const ComparisonReport& r) {
  py::dict d;
  d["alpha0"] = r.alpha0;
  d["alpha_star"] = r.alpha_star;
  d["J0"] = r.J0;
  d["J_star"] = r.J_star;
  d["J_reduction_pct"] = r.J_reduction_pct;
  d["rocof_reduction_pct"] = r.rocof_reduction_pct;
  d["nadir_improvement_pct"] = r.nadir_improvement_pct;
  d["v_peak_reduction_pct"] = r.v_peak_reduction_pct;
  d["metrics0"] = metrics_dict(r.metrics0);
  d["metrics_star"] = metrics_dict(r.metrics_star);
  d["damping0"] = r.damping0;
  d["damping_star"] = r.damping_star;
  return d;
}

void bind_params(py::module_& m) {
  py::class_<FcrParams>(m, "FcrParams")
      .def(py::init<>())
      .def(py::init([](double t_i, double t_a) { return FcrParams{t_i, t_a}; }), py::arg("t_i"), py::arg("t_a"))
      .def_readwrite("t_i", &FcrParams::t_i)
      .def_readwrite("t_a", &FcrParams::t_a);
  py::class_<FfrParams>(m, "FfrParams")
      .def(py::init<>())
      .def(py::init([](double t_a, double t_d, double t_r, double x) { return FfrParams{t_a, t_d, t_r, x}; }),
           py::arg("t_a"), py::arg("t_d"), py::arg("t_r"), py::arg("x") = 1.0)
      .def_readwrite("t_a", &FfrParams::t_a)
      .def_readwrite("t_d", &FfrParams::t_d)
      .def_readwrite("t_r", &FfrParams::t_r)
      .def_readwrite("x", &FfrParams::x);
  py::class_<AuxParams>(m, "AuxParams")
      .def(py::init<>())
      .def(py::init([](double wl, double wh, double mag) { return AuxParams{wl, wh, mag}; }), py::arg("omega_l"),
           py::arg("omega_h"), py::arg("m"))
      .def_readwrite("omega_l", &AuxParams::omega_l)
      .def_readwrite("omega_h", &AuxParams::omega_h)
      .def_readwrite("m", &AuxParams::m);
  py::class_<VqParams>(m, "VqParams")
      .def(py::init<>())
      .def(py::init([](double t90, double t100) { return VqParams{t90, t100}; }), py::arg("t90"), py::arg("t100"))
      .def_readwrite("t90", &VqParams::t90)
      .def_readwrite("t100", &VqParams::t100);
  py::class_<AlphaParams>(m, "AlphaParams")
      .def(py::init<>())
      .def_readwrite("fcr", &AlphaParams::fcr)
      .def_readwrite("ffr", &AlphaParams::ffr)
      .def_readwrite("aux", &AlphaParams::aux)
      .def_readwrite("vq", &AlphaParams::vq)
      .def("to_vector", [](const AlphaParams& a) { return pack(a); })
      .def("__repr__", [](const AlphaParams& a) { return "AlphaParams(\n" + alpha_to_config_text(a) + ")"; });
  m.attr("PARAM_NAMES") = std::vector<std::string>(kParamNames.begin(), kParamNames.end());
  m.def("unpack", &unpack, py::arg("values"), py::arg("shape"));

  py::class_<Droops>(m, "Droops")
      .def(py::init<>())
      .def_readwrite("d_p", &Droops::d_p)
      .def_readwrite("k_p", &Droops::k_p)
      .def_readwrite("d_q", &Droops::d_q);
  py::class_<GridCodeLimits>(m, "GridCodeLimits")
      .def(py::init<>())
      .def_readwrite("t_i_max_fcr", &GridCodeLimits::t_i_max_fcr)
      .def_readwrite("t_a_max_fcr", &GridCodeLimits::t_a_max_fcr)
      .def_readwrite("t_a_max_ffr", &GridCodeLimits::t_a_max_ffr)
      .def_readwrite("t_d_min_offset_ffr", &GridCodeLimits::t_d_min_offset_ffr)
      .def_readwrite("t_r_min_offset_ffr", &GridCodeLimits::t_r_min_offset_ffr)
      .def_readwrite("x_max_ffr", &GridCodeLimits::x_max_ffr)
      .def_readwrite("omega_min", &GridCodeLimits::omega_min)
      .def_readwrite("omega_max", &GridCodeLimits::omega_max)
      .def_readwrite("t90_max_vq", &GridCodeLimits::t90_max_vq)
      .def_readwrite("t100_max_vq", &GridCodeLimits::t100_max_vq);
  py::class_<DeviceLimits>(m, "DeviceLimits")
      .def(py::init<>())
      .def_readwrite("r_max_p", &DeviceLimits::r_max_p)
      .def_readwrite("r_max_q", &DeviceLimits::r_max_q)
      .def_readwrite("m_max_p", &DeviceLimits::m_max_p)
      .def_readwrite("t_d_max_ffr", &DeviceLimits::t_d_max_ffr)
      .def_readwrite("t_r_max_ffr", &DeviceLimits::t_r_max_ffr)
      .def_readwrite("m_aux_cap", &DeviceLimits::m_aux_cap)
      .def_readwrite("superposition_check", &DeviceLimits::superposition_check);
  py::class_<Normalization>(m, "Normalization")
      .def(py::init<>())
      .def_readwrite("df_max", &Normalization::df_max)
      .def_readwrite("dv_max", &Normalization::dv_max);
  py::class_<LimitSet>(m, "LimitSet")
      .def(py::init<>())
      .def_readwrite("grid_code", &LimitSet::grid_code)
      .def_readwrite("device", &LimitSet::device)
      .def_readwrite("normalization", &LimitSet::normalization);
  py::class_<PerfWeights>(m, "PerfWeights")
      .def(py::init<>())
      .def_readwrite("r_fdot", &PerfWeights::r_fdot)
      .def_readwrite("r_f", &PerfWeights::r_f)
      .def_readwrite("r_v", &PerfWeights::r_v)
      .def_readwrite("epsilon", &PerfWeights::epsilon);
  py::class_<OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("max_iters", &OptimizerConfig::max_iters)
      .def_readwrite("step_init", &OptimizerConfig::step_init)
      .def_readwrite("step_tol", &OptimizerConfig::step_tol)
      .def_readwrite("multistart", &OptimizerConfig::multistart)
      .def_readwrite("seed", &OptimizerConfig::seed)
      .def_readwrite("pade_order", &OptimizerConfig::pade_order);
  py::class_<OscillatoryMode>(m, "OscillatoryMode")
      .def(py::init<>())
      .def_readwrite("freq_hz", &OscillatoryMode::freq_hz)
      .def_readwrite("zeta", &OscillatoryMode::zeta)
      .def_readwrite("participation", &OscillatoryMode::participation);
  py::class_<GridScenario>(m, "GridScenario")
      .def(py::init<>())
      .def_readwrite("inertia_h", &GridScenario::inertia_h)
      .def_readwrite("load_damping", &GridScenario::load_damping)
      .def_readwrite("governor_gain", &GridScenario::governor_gain)
      .def_readwrite("governor_time", &GridScenario::governor_time)
      .def_readwrite("k_v", &GridScenario::k_v)
      .def_readwrite("tau_v", &GridScenario::tau_v)
      .def_readwrite("k_pv", &GridScenario::k_pv)
      .def_readwrite("k_qf", &GridScenario::k_qf)
      .def_readwrite("mode", &GridScenario::mode);
}

}  // namespace

PYBIND11_MODULE(_asopt, m) {
  m.doc() = "Grid-aware tuning of ancillary-service response curves";

  static py::handle validation_type;
  static py::handle numerical_type;
  validation_type = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  numerical_type = py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      PyErr_SetString(validation_type.ptr(), e.what());
    } catch (const NumericalError& e) {
      py::object exc = py::reinterpret_borrow<py::object>(numerical_type)(e.what());
      exc.attr("kind") = e.kind();
      PyErr_SetObject(numerical_type.ptr(), exc.ptr());
    }
  });

  py::class_<StateSpace>(m, "StateSpace")
      .def(py::init<Matrix, Matrix, Matrix>(), py::arg("A"), py::arg("B"), py::arg("C"))
      .def_readonly("A", &StateSpace::A)
      .def_readonly("B", &StateSpace::B)
      .def_readonly("C", &StateSpace::C)
      .def_property_readonly("states", &StateSpace::states)
      .def("__call__", [](const StateSpace& s, std::complex<double> z) { return ComplexMatrix(evaluate(s, z)); })
      .def("dc_gain", [](const StateSpace& s) { return dc_gain(s); })
      .def(
          "step",
          [](const StateSpace& s, Eigen::Index channel, double dt, double horizon) {
            const TimeSeries ts = step_response(s, channel, dt, horizon);
            return py::make_tuple(ts.t, ts.values);
          },
          py::arg("channel"), py::arg("dt"), py::arg("horizon"))
      .def("__repr__", [](const StateSpace& s) {
        return "StateSpace(states=" + std::to_string(s.states()) + ", inputs=" + std::to_string(s.inputs()) +
               ", outputs=" + std::to_string(s.outputs()) + ")";
      });

  bind_params(m);

  m.def(
      "pade_delay",
      [](double delay, int order) {
        const RationalTf tf = pade_delay(delay, order);
        return py::make_tuple(tf.num, tf.den);
      },
      py::arg("delay"), py::arg("order"), "Numerator and denominator in ascending powers of s.");
  m.def(
      "curve_tf",
      [](const std::vector<std::pair<double, double>>& points, double input_step, int order) {
        std::vector<Breakpoint> bp;
        for (const auto& [t, v] : points) bp.push_back({t, v});
        return pwl_step_tf(PwlCurve(bp), input_step, order);
      },
      py::arg("points"), py::arg("input_step") = 1.0, py::arg("pade_order") = kDefaultPadeOrder);
  m.def("aux_magnitude_at_center", [](const AuxParams& p) {
    const RationalTf tf = aux_tf(p);
    return std::abs(tf({0.0, std::sqrt(p.omega_l * p.omega_h)}));
  });
  m.def("build_tdes", &build_tdes, py::arg("alpha"), py::arg("droops") = Droops{},
        py::arg("pade_order") = kDefaultPadeOrder);
  m.def("baseline_alpha", py::overload_cast<const LimitSet&>(&baseline_alpha), py::arg("limits") = LimitSet{});
  m.def("project", &project, py::arg("alpha"), py::arg("droops") = Droops{}, py::arg("limits") = LimitSet{});
  m.def(
      "violations",
      [](const AlphaParams& a, const Droops& d, const LimitSet& l, double tol) {
        std::vector<std::pair<std::string, double>> out;
        for (const auto& v : check_feasible(a, d, l, tol)) out.emplace_back(v.id, v.slack);
        return out;
      },
      py::arg("alpha"), py::arg("droops") = Droops{}, py::arg("limits") = LimitSet{}, py::arg("tol") = 1e-9);

  m.def("nominal_grid", &make_nominal_grid, py::arg("scenario") = GridScenario{});
  m.def("oscillatory_grid", [](double freq_hz, double zeta, double participation) {
    GridScenario sc;
    sc.mode = OscillatoryMode{freq_hz, zeta, participation};
    return make_oscillatory_grid(sc);
  }, py::arg("freq_hz") = 1.0, py::arg("zeta") = 0.03, py::arg("participation") = 0.1);
  m.def("lyap", &lyap_solve, py::arg("A"), py::arg("Q"), "Solves A P + P A^T + Q = 0.");

  m.def(
      "cost",
      [](const StateSpace& grid, const AlphaParams& alpha, const Droops& d, const LimitSet& l, const PerfWeights& w,
         int order) {
        const Objective obj(grid, d, l, w, alpha, order);
        return obj.cost(pack(alpha));
      },
      py::arg("grid"), py::arg("alpha"), py::arg("droops") = Droops{}, py::arg("limits") = LimitSet{},
      py::arg("weights") = PerfWeights{}, py::arg("pade_order") = kDefaultPadeOrder,
      "Squared H2 norm of the closed loop; inf when infeasible or unstable.");
  m.def(
      "gradient",
      [](const StateSpace& grid, const AlphaParams& alpha, const Droops& d, const LimitSet& l, const PerfWeights& w,
         int order) {
        const Objective obj(grid, d, l, w, alpha, order);
        const GradientResult g = obj.gradient(pack(alpha));
        return py::make_tuple(g.J, g.grad);
      },
      py::arg("grid"), py::arg("alpha"), py::arg("droops") = Droops{}, py::arg("limits") = LimitSet{},
      py::arg("weights") = PerfWeights{}, py::arg("pade_order") = kDefaultPadeOrder);
  m.def(
      "optimize",
      [](const StateSpace& grid, const AlphaParams& alpha0, const Droops& d, const LimitSet& l, const PerfWeights& w,
         const OptimizerConfig& cfg) {
        const OptRun run = optimize(grid, d, l, w, cfg, alpha0);
        py::list history;
        for (const auto& rec : run.history) {
          py::dict h;
          h["iter"] = rec.iter;
          h["J"] = rec.J;
          h["grad_norm"] = rec.grad_norm;
          h["step"] = rec.step;
          h["alpha"] = rec.alpha;
          history.append(h);
        }
        py::dict out;
        out["alpha_star"] = run.alpha_star;
        out["J_star"] = run.J_star;
        out["status"] = std::string(to_string(run.status));
        out["history"] = history;
        return out;
      },
      py::arg("grid"), py::arg("alpha0"), py::arg("droops") = Droops{}, py::arg("limits") = LimitSet{},
      py::arg("weights") = PerfWeights{}, py::arg("config") = OptimizerConfig{});
  m.def(
      "compare",
      [](const StateSpace& grid, const AlphaParams& alpha_star, const Droops& d, const LimitSet& l,
         const PerfWeights& w, int order) { return comparison_dict(compare_baseline(grid, d, l, w, alpha_star, order)); },
      py::arg("grid"), py::arg("alpha_star"), py::arg("droops") = Droops{}, py::arg("limits") = LimitSet{},
      py::arg("weights") = PerfWeights{}, py::arg("pade_order") = kDefaultPadeOrder);

  m.def(
      "simulate_dataset",
      [](const StateSpace& grid, const Matrix& u, double dt, std::optional<double> snr_db, std::uint64_t seed) {
        const TimeSeriesDataset d = generate_dataset(grid, u, NoiseSpec{snr_db, {}}, dt, seed);
        return d.y;
      },
      py::arg("grid"), py::arg("u"), py::arg("dt") = 1e-3, py::arg("snr_db") = std::nullopt, py::arg("seed") = 0);
  m.def("rbs", &rbs, py::arg("length"), py::arg("amplitude") = 0.03, py::arg("switch_prob") = 0.5,
        py::arg("seed") = 0);
  m.def(
      "identify",
      [](const StateSpace& grid, std::optional<double> snr_db, std::uint64_t seed, std::vector<int> orders) {
        IdentificationConfig cfg;
        cfg.snr_db = snr_db;
        cfg.seed = seed;
        cfg.orders = std::move(orders);
        const IdentificationResult r = identify_model(synthesize_datasets(grid, cfg), cfg, &grid);
        py::dict out;
        out["model"] = r.reduced.sys;
        out["fit_percent"] = r.report.fit_percent;
        out["bode_error_max"] = r.report.bode_error_max;
        out["peak_hz"] = r.peak_hz;
        out["truth_peak_hz"] = r.truth_peak_hz;
        out["hankel_singular_values"] = r.reduced.hankel_singular_values;
        return out;
      },
      py::arg("grid"), py::arg("snr_db") = 40.0, py::arg("seed") = 1,
      py::arg("orders") = std::vector<int>{2, 4, 6, 8, 12},
      "Simulated identification experiment on a known grid.");
  m.def(
      "run_pipeline",
      [](const std::string& config_path) {
        const PipelineConfig cfg = config_path.empty() ? pipeline_config({}) : load_pipeline_config(config_path);
        const PipelineResult r = run_pipeline(cfg);
        py::dict out;
        out["model"] = r.identification.reduced.sys;
        out["alpha0"] = r.alpha0;
        out["alpha_star"] = r.run.alpha_star;
        out["comparison"] = comparison_dict(r.comparison);
        return out;
      },
      py::arg("config_path") = "");

  m.def("model_to_json", &model_to_json);
  m.def("model_from_json", &model_from_json);
}

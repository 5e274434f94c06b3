#include "asopt/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "asopt/error.hpp"
#include "json.hpp"

namespace asopt {

using nlohmann::json;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw ValidationError("write to '" + path.string() + "' failed");
}

Eigen::Index CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<Eigen::Index>(i);
  }
  throw ValidationError("CSV has no column '" + name + "'");
}

std::string to_csv(const std::vector<std::string>& header, const Matrix& data) {
  if (static_cast<Eigen::Index>(header.size()) != data.cols()) throw ValidationError("CSV header/column mismatch");
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
  out += '\n';
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      if (c) out += ',';
      out += format_number(data(r, c));
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  CsvTable table;
  if (!std::getline(in, line)) throw ValidationError("CSV is empty");
  for (const auto& h : split(line, ',')) table.header.push_back(strip(h));
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != table.header.size()) {
      throw ValidationError("CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(table.header.size()));
    }
    std::vector<double> row;
    for (const auto& raw : cells) {
      const std::string cell = strip(raw);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw ValidationError("CSV line " + std::to_string(line_no) + ": '" + cell + "' is not a number");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  table.data.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      table.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return table;
}

std::string dataset_to_csv(const TimeSeriesDataset& data) {
  data.validate();
  const Eigen::Index n = data.samples();
  Matrix m(n, 5);
  for (Eigen::Index k = 0; k < n; ++k) m(k, 0) = static_cast<double>(k) * data.dt;
  m.col(1) = data.u.col(0);
  m.col(2) = data.u.col(1);
  m.col(3) = data.y.col(0);
  m.col(4) = data.y.col(1);
  return to_csv({"t", "dp", "dq", "df", "dv"}, m);
}

TimeSeriesDataset dataset_from_csv(const CsvTable& table) {
  const Eigen::Index n = table.data.rows();
  if (n < 2) throw ValidationError("dataset needs at least two samples");
  const Vector t = table.data.col(table.column("t"));
  const double dt = (t(n - 1) - t(0)) / static_cast<double>(n - 1);
  if (!(dt > 0.0)) throw ValidationError("dataset time column must increase");
  for (Eigen::Index k = 1; k < n; ++k) {
    if (std::abs(t(k) - t(k - 1) - dt) > 1e-9) {
      throw ValidationError("dataset is not uniformly sampled (row " + std::to_string(static_cast<long>(k) + 2) + ")");
    }
  }
  TimeSeriesDataset d;
  d.dt = dt;
  d.u.resize(n, 2);
  d.y.resize(n, 2);
  d.u.col(0) = table.data.col(table.column("dp"));
  d.u.col(1) = table.data.col(table.column("dq"));
  d.y.col(0) = table.data.col(table.column("df"));
  d.y.col(1) = table.data.col(table.column("dv"));
  d.validate();
  return d;
}

TimeSeriesDataset read_dataset(const std::filesystem::path& path) { return dataset_from_csv(parse_csv(read_file(path))); }

std::string traces_to_csv(const DisturbanceResult& result) {
  const auto& tr = result.traces;
  Matrix m(tr.values.rows(), 6);
  for (Eigen::Index k = 0; k < m.rows(); ++k) m(k, 0) = tr.t[static_cast<std::size_t>(k)];
  m.rightCols(5) = tr.values;
  return to_csv({"t", "df", "dfdot", "dv", "dp", "dq"}, m);
}

std::string history_to_csv(const std::vector<IterationRecord>& history, const AlphaParams& shape) {
  const auto mask = free_mask(shape);
  std::vector<std::string> header = {"iter", "J", "grad_norm", "step"};
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < kNumParams; ++i) {
    if (!mask[i]) continue;
    header.emplace_back(kParamNames[i]);
    cols.push_back(i);
  }
  Matrix m(static_cast<Eigen::Index>(history.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t r = 0; r < history.size(); ++r) {
    const auto& h = history[r];
    const auto row = static_cast<Eigen::Index>(r);
    m(row, 0) = h.iter;
    m(row, 1) = h.J;
    m(row, 2) = h.grad_norm;
    m(row, 3) = h.step;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      m(row, static_cast<Eigen::Index>(4 + c)) = h.alpha(static_cast<Eigen::Index>(cols[c]));
    }
  }
  return to_csv(header, m);
}

std::string bode_to_csv(const std::vector<std::pair<std::string, StateSpace>>& models, double lo_hz, double hi_hz,
                        int points) {
  if (!(lo_hz > 0.0 && hi_hz > lo_hz) || points < 2) throw ValidationError("invalid Bode frequency grid");
  std::vector<double> omegas(static_cast<std::size_t>(points));
  for (int k = 0; k < points; ++k) {
    const double f = lo_hz * std::pow(hi_hz / lo_hz, static_cast<double>(k) / (points - 1));
    omegas[static_cast<std::size_t>(k)] = 2.0 * std::numbers::pi * f;
  }
  std::vector<std::string> header = {"freq_hz", "omega"};
  for (const auto& [name, sys] : models) {
    if (sys.inputs() != 2 || sys.outputs() != 2) throw ValidationError("Bode export expects 2x2 models");
    for (const char* ch : {"g11", "g12", "g21", "g22"}) {
      header.push_back(name + "_" + ch + "_mag_db");
      header.push_back(name + "_" + ch + "_phase_deg");
    }
  }
  Matrix m(points, static_cast<Eigen::Index>(header.size()));
  for (int k = 0; k < points; ++k) {
    m(k, 0) = omegas[static_cast<std::size_t>(k)] / (2.0 * std::numbers::pi);
    m(k, 1) = omegas[static_cast<std::size_t>(k)];
  }
  Eigen::Index col = 2;
  for (const auto& [name, sys] : models) {
    const auto resp = freq_response(sys, omegas);
    for (Eigen::Index i = 0; i < 2; ++i) {
      for (Eigen::Index j = 0; j < 2; ++j) {
        for (int k = 0; k < points; ++k) {
          const auto h = resp[static_cast<std::size_t>(k)](i, j);
          m(k, col) = 20.0 * std::log10(std::abs(h));
          m(k, col + 1) = std::arg(h) * 180.0 / std::numbers::pi;
        }
        col += 2;
      }
    }
  }
  return to_csv(header, m);
}

std::string step_curves_to_csv(const AlphaParams& alpha, const Droops& droops, int pade_order, double dt,
                               double horizon) {
  std::vector<std::string> header = {"t"};
  std::vector<Vector> cols;
  const Eigen::Index n = static_cast<Eigen::Index>(std::floor(horizon / dt + 1e-9)) + 1;
  Vector t(n);
  for (Eigen::Index k = 0; k < n; ++k) t(k) = static_cast<double>(k) * dt;
  cols.push_back(t);
  auto add_curve = [&](const std::string& name, const PwlCurve& curve) {
    Vector exact(n);
    for (Eigen::Index k = 0; k < n; ++k) exact(k) = curve.value_at(t(k));
    header.push_back(name + "_exact");
    cols.push_back(exact);
    header.push_back(name + "_tf");
    cols.push_back(step_response(pwl_step_tf(curve, 1.0, pade_order), 0, dt, horizon).values.col(0).head(n));
  };
  if (alpha.fcr) add_curve("fcr", fcr_curve(*alpha.fcr, droops.d_p));
  if (alpha.ffr) add_curve("ffr", ffr_curve(*alpha.ffr, droops.k_p));
  if (alpha.aux) {
    header.push_back("aux_tf");
    cols.push_back(step_response(tf_to_ss(aux_tf(*alpha.aux)), 0, dt, horizon).values.col(0).head(n));
  }
  if (alpha.vq) add_curve("vq", vq_curve(*alpha.vq, droops.d_q));
  Matrix m(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = cols[c];
  return to_csv(header, m);
}

namespace {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ValidationError(std::string("model field ") + name + " has the wrong number of rows");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError(std::string("model field ") + name + " has the wrong number of columns");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) throw ValidationError(std::string("model field ") + name + " must be numeric");
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

json ss_json(const StateSpace& sys) {
  return {{"states", sys.states()}, {"inputs", sys.inputs()}, {"outputs", sys.outputs()},
          {"A", matrix_json(sys.A)},   {"B", matrix_json(sys.B)},   {"C", matrix_json(sys.C)}};
}

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

json alpha_json(const AlphaParams& a) {
  json j = json::object();
  j["fcr"] = a.fcr ? json{{"t_i", a.fcr->t_i}, {"t_a", a.fcr->t_a}} : json(nullptr);
  j["ffr"] = a.ffr ? json{{"t_a", a.ffr->t_a}, {"t_d", a.ffr->t_d}, {"t_r", a.ffr->t_r}, {"x", a.ffr->x}}
                   : json(nullptr);
  j["aux"] = a.aux ? json{{"omega_l", a.aux->omega_l}, {"omega_h", a.aux->omega_h}, {"m", a.aux->m}} : json(nullptr);
  j["vq"] = a.vq ? json{{"t90", a.vq->t90}, {"t100", a.vq->t100}} : json(nullptr);
  return j;
}

json metrics_obj(const DisturbanceMetrics& m) {
  return {{"rocof_max", number(m.rocof_max)}, {"nadir", number(m.nadir)}, {"v_peak", number(m.v_peak)},
          {"J", number(m.J)}};
}

json curve_json(const PwlCurve& curve, int pade_order) {
  json bps = json::array();
  for (const auto& b : curve.breakpoints()) bps.push_back({b.time, b.value});
  json terms = json::array();
  for (const auto& t : pwl_to_delay_terms(curve)) {
    const RationalTf p = pade_delay(t.delay, pade_order);
    terms.push_back({{"delay", t.delay}, {"coefficient", t.coefficient}, {"pade_num", p.num}, {"pade_den", p.den}});
  }
  return {{"breakpoints", bps}, {"delay_terms", terms}};
}

}  // namespace

std::string model_to_json(const StateSpace& sys) {
  json j = ss_json(sys);
  j["format"] = "asopt.state_space";
  j["input_names"] = {"dp", "dq"};
  j["output_names"] = {"df", "dv"};
  return j.dump(2) + "\n";
}

StateSpace model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "asopt.state_space") {
    throw ValidationError("model file must have \"format\": \"asopt.state_space\"");
  }
  for (const char* key : {"states", "inputs", "outputs"}) {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() < 0) {
      throw ValidationError(std::string("model field ") + key + " must be a non-negative integer");
    }
  }
  const auto n = j["states"].get<Eigen::Index>(), m = j["inputs"].get<Eigen::Index>(),
             p = j["outputs"].get<Eigen::Index>();
  return StateSpace(matrix_from_json(j.value("A", json()), n, n, "A"), matrix_from_json(j.value("B", json()), n, m, "B"),
                    matrix_from_json(j.value("C", json()), p, n, "C"));
}

StateSpace read_model(const std::filesystem::path& path) { return model_from_json(read_file(path)); }

std::string tdes_to_json(const AlphaParams& alpha, const Droops& droops, int pade_order) {
  json j;
  j["pade_order"] = pade_order;
  j["droops"] = {{"d_p", droops.d_p}, {"k_p", droops.k_p}, {"d_q", droops.d_q}};
  j["alpha"] = alpha_json(alpha);
  if (alpha.fcr) j["fcr"] = curve_json(fcr_curve(*alpha.fcr, droops.d_p), pade_order);
  if (alpha.ffr) j["ffr"] = curve_json(ffr_curve(*alpha.ffr, droops.k_p), pade_order);
  if (alpha.aux) {
    const RationalTf tf = aux_tf(*alpha.aux);
    j["aux"] = {{"num", tf.num}, {"den", tf.den}};
  }
  if (alpha.vq) j["vq"] = curve_json(vq_curve(*alpha.vq, droops.d_q), pade_order);
  const StateSpace t = build_tdes(alpha, droops, pade_order);
  j["realization"] = ss_json(t);
  const Matrix dc = dc_gain(t);
  j["dc_gain"] = matrix_json(dc);
  return j.dump(2) + "\n";
}

std::string metrics_to_json(const DisturbanceMetrics& metrics, const PerfWeights& weights) {
  json j = metrics_obj(metrics);
  j["epsilon"] = weights.epsilon;
  return j.dump(2) + "\n";
}

std::string comparison_to_json(const ComparisonReport& r, const PerfWeights& weights) {
  json j;
  j["epsilon"] = weights.epsilon;
  j["J0"] = number(r.J0);
  j["J_star"] = number(r.J_star);
  j["J_reduction_pct"] = number(r.J_reduction_pct);
  j["rocof_reduction_pct"] = number(r.rocof_reduction_pct);
  j["nadir_improvement_pct"] = number(r.nadir_improvement_pct);
  j["v_peak_reduction_pct"] = number(r.v_peak_reduction_pct);
  j["damping0"] = optional_number(r.damping0);
  j["damping_star"] = optional_number(r.damping_star);
  j["baseline"] = metrics_obj(r.metrics0);
  j["optimal"] = metrics_obj(r.metrics_star);
  j["alpha0"] = alpha_json(r.alpha0);
  j["alpha_star"] = alpha_json(r.alpha_star);
  return j.dump(2) + "\n";
}

std::string optimization_to_json(const OptRun& run, const PerfWeights& weights) {
  json j;
  j["status"] = to_string(run.status);
  j["iterations"] = run.history.empty() ? 0 : run.history.back().iter;
  j["epsilon"] = weights.epsilon;
  j["J0"] = run.history.empty() ? json(nullptr) : number(run.history.front().J);
  j["J_star"] = number(run.J_star);
  j["alpha_star"] = alpha_json(run.alpha_star);
  return j.dump(2) + "\n";
}

}  // namespace asopt

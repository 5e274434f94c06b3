#include "asopt/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "asopt/error.hpp"

namespace asopt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_bare(const std::string& s, bool allow_dot) {
  if (s.empty()) return false;
  for (char c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || (allow_dot && c == '.');
    if (!ok) return false;
  }
  return s.front() != '.' && s.back() != '.' && s.find("..") == std::string::npos;
}

[[noreturn]] void fail_line(int line, const std::string& msg) {
  throw ValidationError("config line " + std::to_string(line) + ": " + msg);
}

std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_str && c == '\\') {
      ++i;
    } else if (c == '"') {
      in_str = !in_str;
    } else if (c == '#' && !in_str) {
      return line.substr(0, i);
    }
  }
  return line;
}

bool parse_number(const std::string& s, double& out) {
  if (s == "inf" || s == "+inf") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  if (s == "-inf") {
    out = -std::numeric_limits<double>::infinity();
    return true;
  }
  if (s == "nan" || s == "+nan" || s == "-nan") {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.' || c == 'e' || c == 'E')) {
      return false;
    }
  }
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

ConfigValue parse_value(const std::string& raw, int line) {
  const std::string s = trim(raw);
  if (s.empty()) fail_line(line, "missing value");
  if (s.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < s.size() && s[i] != '"'; ++i) {
      if (s[i] == '\\') {
        if (++i >= s.size()) fail_line(line, "unterminated string");
        switch (s[i]) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail_line(line, std::string("unknown escape \\") + s[i]);
        }
      } else {
        out += s[i];
      }
    }
    if (i >= s.size()) fail_line(line, "unterminated string");
    if (i + 1 != s.size()) fail_line(line, "trailing characters after string");
    return out;
  }
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '[') {
    if (s.back() != ']') fail_line(line, "unterminated array");
    std::vector<double> values;
    const std::string body = trim(s.substr(1, s.size() - 2));
    if (body.empty()) return values;
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      double v = 0.0;
      const std::string t = trim(item);
      if (t.empty() && ss.eof()) break;  // trailing comma
      if (!parse_number(t, v)) fail_line(line, "array items must be numbers: '" + t + "'");
      values.push_back(v);
    }
    return values;
  }
  double v = 0.0;
  if (!parse_number(s, v)) fail_line(line, "cannot parse value '" + s + "'");
  return v;
}

}  // namespace

ConfigDocument parse_config(const std::string& text) {
  ConfigDocument doc;
  std::string section;
  std::set<std::string> seen_sections;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) fail_line(line_no, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!is_bare(section, true)) fail_line(line_no, "invalid section name '" + section + "'");
      if (!seen_sections.insert(section).second) fail_line(line_no, "duplicate section [" + section + "]");
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail_line(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!is_bare(key, false)) fail_line(line_no, "invalid key '" + key + "'");
    if (section.empty()) fail_line(line_no, "key '" + key + "' outside of any section");
    auto& table = doc[section];
    if (table.count(key)) fail_line(line_no, "duplicate key '" + key + "' in [" + section + "]");
    table.emplace(key, parse_value(line.substr(eq + 1), line_no));
  }
  return doc;
}

namespace {

using Table = std::map<std::string, ConfigValue>;

std::string where(const std::string& section, const std::string& key) { return "[" + section + "] " + key; }

double get_number(const ConfigValue& v, const std::string& section, const std::string& key) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw ValidationError(where(section, key) + " must be a number");
}

bool get_bool(const ConfigValue& v, const std::string& section, const std::string& key) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw ValidationError(where(section, key) + " must be true or false");
}

std::string get_string(const ConfigValue& v, const std::string& section, const std::string& key) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ValidationError(where(section, key) + " must be a quoted string");
}

long long get_integer(const ConfigValue& v, const std::string& section, const std::string& key) {
  const double d = get_number(v, section, key);
  if (!std::isfinite(d) || d != std::floor(d) || std::abs(d) > 9.0e15) {
    throw ValidationError(where(section, key) + " must be an integer");
  }
  return static_cast<long long>(d);
}

/// Binds config keys of one section to struct members; used in both
/// directions so reading and writing cannot drift apart.
struct Binder {
  std::string section;
  std::vector<std::pair<std::string, double*>> numbers;
  std::vector<std::pair<std::string, int*>> ints;
  std::vector<std::pair<std::string, bool*>> bools;

  void read(const Table& t) const {
    std::set<std::string> known;
    for (const auto& [k, p] : numbers) known.insert(k);
    for (const auto& [k, p] : ints) known.insert(k);
    for (const auto& [k, p] : bools) known.insert(k);
    for (const auto& [k, v] : t) {
      if (!known.count(k)) throw ValidationError("unknown key " + where(section, k));
    }
    for (const auto& [k, p] : numbers) {
      if (auto it = t.find(k); it != t.end()) *p = get_number(it->second, section, k);
    }
    for (const auto& [k, p] : ints) {
      if (auto it = t.find(k); it != t.end()) *p = static_cast<int>(get_integer(it->second, section, k));
    }
    for (const auto& [k, p] : bools) {
      if (auto it = t.find(k); it != t.end()) *p = get_bool(it->second, section, k);
    }
  }
};

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out += c;
  }
  return out + "\"";
}

void write_binder(std::ostringstream& os, const Binder& b) {
  os << "[" << b.section << "]\n";
  for (const auto& [k, p] : b.numbers) os << k << " = " << fmt(*p) << "\n";
  for (const auto& [k, p] : b.ints) os << k << " = " << *p << "\n";
  for (const auto& [k, p] : b.bools) os << k << " = " << (*p ? "true" : "false") << "\n";
}

Binder droops_binder(Droops& d) { return {"droops", {{"d_p", &d.d_p}, {"k_p", &d.k_p}, {"d_q", &d.d_q}}, {}, {}}; }

Binder grid_code_binder(GridCodeLimits& g) {
  return {"limits.grid_code",
          {{"t_i_max_fcr", &g.t_i_max_fcr},
           {"t_a_max_fcr", &g.t_a_max_fcr},
           {"t_a_max_ffr", &g.t_a_max_ffr},
           {"t_d_min_offset_ffr", &g.t_d_min_offset_ffr},
           {"t_r_min_offset_ffr", &g.t_r_min_offset_ffr},
           {"x_max_ffr", &g.x_max_ffr},
           {"omega_min", &g.omega_min},
           {"omega_max", &g.omega_max},
           {"t90_max_vq", &g.t90_max_vq},
           {"t100_max_vq", &g.t100_max_vq}},
          {},
          {}};
}

Binder device_binder(DeviceLimits& d) {
  return {"limits.device",
          {{"r_max_p", &d.r_max_p},
           {"r_max_q", &d.r_max_q},
           {"m_max_p", &d.m_max_p},
           {"t_d_max_ffr", &d.t_d_max_ffr},
           {"t_r_max_ffr", &d.t_r_max_ffr}},
          {},
          {{"superposition_check", &d.superposition_check}}};
}

Binder normalization_binder(Normalization& n) {
  return {"limits.normalization", {{"df_max", &n.df_max}, {"dv_max", &n.dv_max}}, {}, {}};
}

Binder weights_binder(PerfWeights& w) {
  return {"weights", {{"r_fdot", &w.r_fdot}, {"r_f", &w.r_f}, {"r_v", &w.r_v}, {"epsilon", &w.epsilon}}, {}, {}};
}

Binder optimizer_binder(OptimizerConfig& o) {
  return {"optimizer",
          {{"step_init", &o.step_init},
           {"armijo_c1", &o.armijo_c1},
           {"backtrack", &o.backtrack},
           {"step_tol", &o.step_tol},
           {"stability_margin", &o.stability_margin}},
          {{"max_iters", &o.max_iters}, {"max_backtracks", &o.max_backtracks}, {"multistart", &o.multistart},
           {"pade_order", &o.pade_order}},
          {}};
}

Binder simulation_binder(SimulationSettings& s) {
  return {"simulation",
          {{"dt", &s.dt}, {"horizon", &s.horizon}, {"p_d", &s.disturbance[0]}, {"q_d", &s.disturbance[1]}},
          {},
          {}};
}

Binder grid_binder(GridScenario& g) {
  return {"scenario",
          {{"inertia_h", &g.inertia_h},
           {"load_damping", &g.load_damping},
           {"governor_gain", &g.governor_gain},
           {"governor_time", &g.governor_time},
           {"k_v", &g.k_v},
           {"tau_v", &g.tau_v},
           {"k_pv", &g.k_pv},
           {"k_qf", &g.k_qf}},
          {},
          {}};
}

Binder ident_binder(IdentificationConfig& c) {
  return {"identification",
          {{"dt", &c.dt},
           {"duration", &c.duration},
           {"amplitude", &c.amplitude},
           {"switch_prob", &c.switch_prob},
           {"highpass_cutoff_hz", &c.arx.highpass_cutoff_hz},
           {"reduce_tol", &c.reduce_tol}},
          {{"refine_iterations", &c.arx.refine_iterations}},
          {{"highpass", &c.arx.highpass}}};
}

// Splits `t` into the keys handled by `special` and the rest.
Table without(const Table& t, std::initializer_list<const char*> special) {
  Table rest = t;
  for (const char* k : special) rest.erase(k);
  return rest;
}

const Table kEmpty;

const Table& section_or_empty(const ConfigDocument& doc, const std::string& name) {
  auto it = doc.find(name);
  return it == doc.end() ? kEmpty : it->second;
}

std::uint64_t get_seed(const ConfigValue& v, const std::string& section) {
  const long long s = get_integer(v, section, "seed");
  if (s < 0) throw ValidationError(where(section, "seed") + " must be non-negative");
  return static_cast<std::uint64_t>(s);
}

// Reads a product section with the generic Binder, plus `enabled`.
template <class P>
std::optional<P> read_product(const ConfigDocument& doc, const std::string& name, const std::optional<P>& def,
                              Binder (*make)(P&)) {
  auto it = doc.find(name);
  if (it == doc.end()) return def;
  const Table& t = it->second;
  bool enabled = true;
  if (auto e = t.find("enabled"); e != t.end()) enabled = get_bool(e->second, name, "enabled");
  if (!enabled) {
    // still reject unknown keys in a disabled section
    P probe{};
    make(probe).read(without(t, {"enabled"}));
    return std::nullopt;
  }
  P p = def.value_or(P{});
  make(p).read(without(t, {"enabled"}));
  return p;
}

Binder fcr_binder(FcrParams& p) { return {"fcr", {{"t_i", &p.t_i}, {"t_a", &p.t_a}}, {}, {}}; }
Binder ffr_binder(FfrParams& p) {
  return {"ffr", {{"t_a", &p.t_a}, {"t_d", &p.t_d}, {"t_r", &p.t_r}, {"x", &p.x}}, {}, {}};
}
Binder aux_binder(AuxParams& p) {
  return {"aux", {{"omega_l", &p.omega_l}, {"omega_h", &p.omega_h}, {"m", &p.m}}, {}, {}};
}
Binder vq_binder(VqParams& p) { return {"vq", {{"t90", &p.t90}, {"t100", &p.t100}}, {}, {}}; }

template <class P>
void write_product(std::ostringstream& os, const std::string& name, const std::optional<P>& p, Binder (*make)(P&)) {
  if (!p) {
    os << "[" << name << "]\nenabled = false\n\n";
    return;
  }
  P copy = *p;
  Binder b = make(copy);
  os << "[" << name << "]\nenabled = true\n";
  for (const auto& [k, v] : b.numbers) os << k << " = " << fmt(*v) << "\n";
  os << "\n";
}

const std::set<std::string> kSections = {"scenario", "identification", "fcr", "ffr", "aux", "vq", "droops",
                                         "limits.grid_code", "limits.device", "limits.normalization", "weights",
                                         "optimizer", "simulation"};

}  // namespace

AlphaParams alpha_from_config(const ConfigDocument& doc, const AlphaParams& defaults) {
  AlphaParams a;
  a.fcr = read_product<FcrParams>(doc, "fcr", defaults.fcr, fcr_binder);
  a.ffr = read_product<FfrParams>(doc, "ffr", defaults.ffr, ffr_binder);
  a.aux = read_product<AuxParams>(doc, "aux", defaults.aux, aux_binder);
  a.vq = read_product<VqParams>(doc, "vq", defaults.vq, vq_binder);
  return a;
}

PipelineConfig pipeline_config(const ConfigDocument& doc, const std::string& base_dir) {
  for (const auto& [name, t] : doc) {
    if (!kSections.count(name)) throw ValidationError("unknown config section [" + name + "]");
  }
  PipelineConfig cfg;

  // [scenario]
  {
    const Table& t = section_or_empty(doc, "scenario");
    auto& sc = cfg.scenario;
    grid_binder(sc.grid).read(without(t, {"kind", "dataset", "mode_freq_hz", "mode_zeta", "mode_participation"}));
    if (auto it = t.find("kind"); it != t.end()) sc.kind = get_string(it->second, "scenario", "kind");
    if (sc.kind != "nominal" && sc.kind != "oscillatory" && sc.kind != "dataset") {
      throw ValidationError("[scenario] kind must be \"nominal\", \"oscillatory\" or \"dataset\", got \"" + sc.kind +
                            "\"");
    }
    OscillatoryMode mode;
    bool mode_keys = false;
    for (const auto& [key, ptr] : std::initializer_list<std::pair<const char*, double*>>{
             {"mode_freq_hz", &mode.freq_hz}, {"mode_zeta", &mode.zeta}, {"mode_participation", &mode.participation}}) {
      if (auto it = t.find(key); it != t.end()) {
        *ptr = get_number(it->second, "scenario", key);
        mode_keys = true;
      }
    }
    if (mode_keys && sc.kind != "oscillatory") {
      throw ValidationError("[scenario] mode_* keys require kind = \"oscillatory\"");
    }
    if (sc.kind == "oscillatory") sc.grid.mode = mode;
    if (auto it = t.find("dataset"); it != t.end()) {
      if (sc.kind != "dataset") throw ValidationError("[scenario] dataset requires kind = \"dataset\"");
      namespace fs = std::filesystem;
      fs::path p = get_string(it->second, "scenario", "dataset");
      if (p.is_relative()) p = fs::path(base_dir) / p;
      sc.dataset = p.lexically_normal().string();
      if (!fs::exists(sc.dataset)) throw ValidationError("[scenario] dataset '" + sc.dataset + "' does not exist");
    } else if (sc.kind == "dataset") {
      throw ValidationError("[scenario] kind = \"dataset\" needs a dataset path");
    }
    sc.grid.validate();
  }

  // [identification]
  {
    const Table& t = section_or_empty(doc, "identification");
    auto& id = cfg.identification;
    ident_binder(id).read(without(t, {"snr_db", "seed", "orders", "d2c"}));
    if (auto it = t.find("snr_db"); it != t.end()) {
      const double snr = get_number(it->second, "identification", "snr_db");
      if (std::isnan(snr)) throw ValidationError("[identification] snr_db must not be nan");
      id.snr_db = std::isinf(snr) && snr > 0 ? std::nullopt : std::optional<double>(snr);
    }
    if (auto it = t.find("seed"); it != t.end()) id.seed = get_seed(it->second, "identification");
    if (auto it = t.find("orders"); it != t.end()) {
      const auto* v = std::get_if<std::vector<double>>(&it->second);
      if (!v || v->empty()) throw ValidationError("[identification] orders must be a non-empty array of integers");
      id.orders.clear();
      for (double o : *v) {
        if (o != std::floor(o) || o < 1 || o > 60) {
          throw ValidationError("[identification] orders must be integers in [1, 60]");
        }
        id.orders.push_back(static_cast<int>(o));
      }
    }
    if (auto it = t.find("d2c"); it != t.end()) {
      const std::string m = get_string(it->second, "identification", "d2c");
      if (m == "zoh") {
        id.d2c = D2cMethod::ZohInverse;
      } else if (m == "tustin") {
        id.d2c = D2cMethod::Tustin;
      } else {
        throw ValidationError("[identification] d2c must be \"zoh\" or \"tustin\"");
      }
    }
    if (!(id.dt > 0.0) || !(id.duration > 0.0) || !(id.amplitude > 0.0)) {
      throw ValidationError("[identification] dt, duration and amplitude must be positive");
    }
    if (!(id.switch_prob > 0.0 && id.switch_prob <= 1.0)) {
      throw ValidationError("[identification] switch_prob must be in (0, 1]");
    }
    if (!(id.reduce_tol > 0.0)) throw ValidationError("[identification] reduce_tol must be positive");
    if (id.arx.refine_iterations < 0) throw ValidationError("[identification] refine_iterations must be >= 0");
  }

  droops_binder(cfg.droops).read(section_or_empty(doc, "droops"));
  cfg.droops.validate();

  grid_code_binder(cfg.limits.grid_code).read(section_or_empty(doc, "limits.grid_code"));
  {
    const Table& t = section_or_empty(doc, "limits.device");
    device_binder(cfg.limits.device).read(without(t, {"m_aux_cap"}));
    if (auto it = t.find("m_aux_cap"); it != t.end()) {
      cfg.limits.device.m_aux_cap = get_number(it->second, "limits.device", "m_aux_cap");
    }
  }
  normalization_binder(cfg.limits.normalization).read(section_or_empty(doc, "limits.normalization"));
  cfg.limits.validate();

  weights_binder(cfg.weights).read(section_or_empty(doc, "weights"));
  cfg.weights.validate();

  {
    const Table& t = section_or_empty(doc, "optimizer");
    optimizer_binder(cfg.optimizer).read(without(t, {"seed"}));
    if (auto it = t.find("seed"); it != t.end()) cfg.optimizer.seed = get_seed(it->second, "optimizer");
    cfg.optimizer.validate();
  }

  simulation_binder(cfg.simulation).read(section_or_empty(doc, "simulation"));
  if (!(cfg.simulation.dt > 0.0) || !(cfg.simulation.horizon > cfg.simulation.dt)) {
    throw ValidationError("[simulation] dt must be positive and smaller than horizon");
  }

  cfg.start = alpha_from_config(doc, baseline_alpha(cfg.limits));
  if (!cfg.start.fcr && !cfg.start.ffr && !cfg.start.aux && !cfg.start.vq) {
    throw ValidationError("every product is disabled");
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto parent = std::filesystem::path(path).parent_path();
  return pipeline_config(parse_config(ss.str()), parent.empty() ? "." : parent.string());
}

std::string alpha_to_config_text(const AlphaParams& alpha) {
  std::ostringstream os;
  write_product<FcrParams>(os, "fcr", alpha.fcr, fcr_binder);
  write_product<FfrParams>(os, "ffr", alpha.ffr, ffr_binder);
  write_product<AuxParams>(os, "aux", alpha.aux, aux_binder);
  write_product<VqParams>(os, "vq", alpha.vq, vq_binder);
  return os.str();
}

std::string to_config_text(const PipelineConfig& in) {
  PipelineConfig c = in;  // binders need mutable members
  std::ostringstream os;

  os << "[scenario]\nkind = " << quote(c.scenario.kind) << "\n";
  if (c.scenario.kind == "dataset") {
    os << "dataset = " << quote(std::filesystem::absolute(c.scenario.dataset).lexically_normal().string()) << "\n";
  }
  {
    const Binder b = grid_binder(c.scenario.grid);
    for (const auto& [k, p] : b.numbers) os << k << " = " << fmt(*p) << "\n";
    if (c.scenario.grid.mode) {
      os << "mode_freq_hz = " << fmt(c.scenario.grid.mode->freq_hz) << "\n";
      os << "mode_zeta = " << fmt(c.scenario.grid.mode->zeta) << "\n";
      os << "mode_participation = " << fmt(c.scenario.grid.mode->participation) << "\n";
    }
    os << "\n";
  }

  write_binder(os, ident_binder(c.identification));
  {
    const auto& id = c.identification;
    os << "snr_db = " << (id.snr_db ? fmt(*id.snr_db) : std::string("inf")) << "\n";
    os << "seed = " << id.seed << "\n";
    os << "orders = [";
    for (std::size_t i = 0; i < id.orders.size(); ++i) os << (i ? ", " : "") << id.orders[i];
    os << "]\n";
    os << "d2c = " << quote(id.d2c == D2cMethod::ZohInverse ? "zoh" : "tustin") << "\n\n";
  }

  os << alpha_to_config_text(c.start);
  write_binder(os, droops_binder(c.droops));
  os << "\n";
  write_binder(os, grid_code_binder(c.limits.grid_code));
  os << "\n";
  write_binder(os, device_binder(c.limits.device));
  if (c.limits.device.m_aux_cap) os << "m_aux_cap = " << fmt(*c.limits.device.m_aux_cap) << "\n";
  os << "\n";
  write_binder(os, normalization_binder(c.limits.normalization));
  os << "\n";
  write_binder(os, weights_binder(c.weights));
  os << "\n";
  write_binder(os, optimizer_binder(c.optimizer));
  os << "seed = " << c.optimizer.seed << "\n\n";
  write_binder(os, simulation_binder(c.simulation));
  std::string out = os.str();
  while (!out.empty() && out.back() == '\n') out.pop_back();
  return out + "\n";
}

}  // namespace asopt

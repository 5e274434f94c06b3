#include "asopt/services.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "asopt/error.hpp"

namespace asopt {

namespace {

bool finite_all(std::initializer_list<double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

StateSpace empty_channel() { return StateSpace(Matrix(0, 0), Matrix(0, 1), Matrix(1, 0)); }

double aux_cap(const AlphaParams& shape, const Droops& droops, const LimitSet& limits) {
  if (limits.device.m_aux_cap) return *limits.device.m_aux_cap;
  double cap = limits.device.m_max_p / limits.normalization.df_max;
  if (shape.fcr) cap -= std::abs(1.0 / droops.d_p);
  if (shape.ffr) cap -= std::abs(1.0 / droops.k_p);
  return cap;
}

LinearConstraint make(std::string id, std::initializer_list<std::pair<std::size_t, double>> terms, double bound) {
  LinearConstraint c;
  c.id = std::move(id);
  for (const auto& [idx, coeff] : terms) c.coeffs[idx] = coeff;
  c.bound = bound;
  return c;
}

double slack_of(const LinearConstraint& c, const Vector& x) {
  double lhs = 0.0;
  for (std::size_t i = 0; i < kNumParams; ++i) lhs += c.coeffs[i] * x(static_cast<Eigen::Index>(i));
  const double s = c.bound - lhs;
  return std::isnan(s) ? -std::numeric_limits<double>::infinity() : s;
}

}  // namespace

void Droops::validate() const {
  for (double g : {d_p, k_p, d_q}) {
    if (g == 0.0 || !std::isfinite(g)) throw ValidationError("droop gains must be nonzero and finite");
  }
}

void LimitSet::validate() const {
  const auto& g = grid_code;
  const auto& d = device;
  for (double v : {g.t_i_max_fcr, g.t_a_max_fcr, g.t_a_max_ffr, g.t_d_min_offset_ffr, g.t_r_min_offset_ffr,
                   g.x_max_ffr, g.omega_min, g.omega_max, g.t90_max_vq, g.t100_max_vq, d.r_max_p, d.r_max_q,
                   d.m_max_p, d.t_d_max_ffr, d.t_r_max_ffr, normalization.df_max, normalization.dv_max}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("all limits must be positive and finite");
  }
  if (d.m_aux_cap && !(*d.m_aux_cap >= 0.0)) throw ValidationError("m_aux_cap must be >= 0");
  if (!(g.omega_min < g.omega_max)) throw ValidationError("omega_min must be below omega_max");
}

Vector pack(const AlphaParams& a) {
  Vector v = Vector::Zero(kNumParams);
  if (a.fcr) {
    v(kFcrTi) = a.fcr->t_i;
    v(kFcrTa) = a.fcr->t_a;
  }
  if (a.ffr) {
    v(kFfrTa) = a.ffr->t_a;
    v(kFfrTd) = a.ffr->t_d;
    v(kFfrTr) = a.ffr->t_r;
    v(kFfrX) = a.ffr->x;
  }
  if (a.aux) {
    v(kAuxOmegaL) = a.aux->omega_l;
    v(kAuxOmegaH) = a.aux->omega_h;
    v(kAuxM) = a.aux->m;
  }
  if (a.vq) {
    v(kVqT90) = a.vq->t90;
    v(kVqT100) = a.vq->t100;
  }
  return v;
}

AlphaParams unpack(const Vector& v, const AlphaParams& shape) {
  if (v.size() != static_cast<Eigen::Index>(kNumParams)) {
    throw ValidationError("parameter vector must have " + std::to_string(kNumParams) + " entries");
  }
  AlphaParams a;
  if (shape.fcr) a.fcr = FcrParams{v(kFcrTi), v(kFcrTa)};
  if (shape.ffr) a.ffr = FfrParams{v(kFfrTa), v(kFfrTd), v(kFfrTr), v(kFfrX)};
  if (shape.aux) a.aux = AuxParams{v(kAuxOmegaL), v(kAuxOmegaH), v(kAuxM)};
  if (shape.vq) a.vq = VqParams{v(kVqT90), v(kVqT100)};
  return a;
}

std::array<bool, kNumParams> free_mask(const AlphaParams& a) {
  std::array<bool, kNumParams> m{};
  for (std::size_t i : {kFcrTi, kFcrTa}) m[i] = a.fcr.has_value();
  for (std::size_t i : {kFfrTa, kFfrTd, kFfrTr, kFfrX}) m[i] = a.ffr.has_value();
  for (std::size_t i : {kAuxOmegaL, kAuxOmegaH, kAuxM}) m[i] = a.aux.has_value();
  for (std::size_t i : {kVqT90, kVqT100}) m[i] = a.vq.has_value();
  return m;
}

PwlCurve fcr_curve(const FcrParams& p, double d_p) {
  if (!finite_all({p.t_i, p.t_a, d_p}) || d_p == 0.0) throw ValidationError("FCR parameters must be finite");
  if (p.t_i < 0.0) throw ValidationError("FCR initial delay must be >= 0");
  if (p.t_a - p.t_i < kMinSegment * (1.0 - 1e-9)) {
    throw ValidationError("FCR activation time must exceed the initial delay by at least 1 ms");
  }
  if (p.t_i == 0.0) return PwlCurve({{0.0, 0.0}, {p.t_a, 1.0 / d_p}});
  return PwlCurve({{0.0, 0.0}, {p.t_i, 0.0}, {p.t_a, 1.0 / d_p}});
}

PwlCurve ffr_curve(const FfrParams& p, double k_p) {
  if (!finite_all({p.t_a, p.t_d, p.t_r, p.x, k_p}) || k_p == 0.0) {
    throw ValidationError("FFR parameters must be finite");
  }
  if (!(0.0 < p.t_a && p.t_a < p.t_d && p.t_d < p.t_r)) throw ValidationError("FFR requires 0 < t_a < t_d < t_r");
  if (p.x < 1.0) throw ValidationError("FFR overdelivery factor must be >= 1");
  return PwlCurve({{0.0, 0.0}, {p.t_a, p.x / k_p}, {p.t_d, 1.0 / k_p}, {p.t_r, 0.0}});
}

PwlCurve vq_curve(const VqParams& p, double d_q) {
  if (!finite_all({p.t90, p.t100, d_q}) || d_q == 0.0) throw ValidationError("VQ parameters must be finite");
  if (!(0.0 < p.t90 && p.t90 < p.t100)) throw ValidationError("VQ requires 0 < t90 < t100");
  return PwlCurve({{0.0, 0.0}, {p.t90, 0.9 / d_q}, {p.t100, 1.0 / d_q}});
}

RationalTf aux_tf(const AuxParams& p) {
  if (!finite_all({p.omega_l, p.omega_h, p.m})) throw ValidationError("AUX parameters must be finite");
  if (!(0.0 < p.omega_l && p.omega_l < p.omega_h)) throw ValidationError("AUX requires 0 < omega_l < omega_h");
  const double bw = p.omega_h - p.omega_l;
  return RationalTf({0.0, p.m * bw}, {p.omega_l * p.omega_h, bw, 1.0});
}

StateSpace build_tdes(const AlphaParams& alpha, const Droops& droops, int pade_order) {
  if (!alpha.fcr && !alpha.ffr && !alpha.aux && !alpha.vq) {
    throw ValidationError("build_tdes(): all products are disabled");
  }
  droops.validate();
  std::vector<StateSpace> fp;
  if (alpha.fcr) fp.push_back(pwl_step_tf(fcr_curve(*alpha.fcr, droops.d_p), 1.0, pade_order));
  if (alpha.ffr) fp.push_back(pwl_step_tf(ffr_curve(*alpha.ffr, droops.k_p), 1.0, pade_order));
  if (alpha.aux) fp.push_back(tf_to_ss(aux_tf(*alpha.aux)));
  const StateSpace channels[2] = {
      fp.empty() ? empty_channel() : parallel(fp),
      alpha.vq ? pwl_step_tf(vq_curve(*alpha.vq, droops.d_q), 1.0, pade_order) : empty_channel()};
  return block_diag(channels);
}

AlphaParams baseline_alpha(const LimitSet& limits, const AlphaParams& enabled) {
  limits.validate();
  const auto& g = limits.grid_code;
  AlphaParams a;
  if (enabled.fcr) a.fcr = FcrParams{g.t_i_max_fcr, g.t_a_max_fcr};
  if (enabled.ffr) {
    const double t_d = g.t_a_max_ffr + g.t_d_min_offset_ffr;
    a.ffr = FfrParams{g.t_a_max_ffr, t_d, t_d + g.t_r_min_offset_ffr, 1.0};
  }
  if (enabled.aux) a.aux = AuxParams{g.omega_min, g.omega_max, 0.0};
  if (enabled.vq) a.vq = VqParams{g.t90_max_vq, g.t100_max_vq};
  return a;
}

AlphaParams baseline_alpha(const LimitSet& limits) {
  AlphaParams all;
  all.fcr = FcrParams{};
  all.ffr = FfrParams{};
  all.aux = AuxParams{};
  all.vq = VqParams{};
  return baseline_alpha(limits, all);
}

std::vector<LinearConstraint> linear_constraints(const AlphaParams& shape, const Droops& droops,
                                                 const LimitSet& limits) {
  limits.validate();
  droops.validate();
  const auto& g = limits.grid_code;
  const auto& d = limits.device;
  const auto& nz = limits.normalization;
  const double delta = kMinSegment;
  std::vector<LinearConstraint> out;
  if (shape.fcr) {
    out.push_back(make("fcr.t_i_min", {{kFcrTi, -1.0}}, -delta));
    out.push_back(make("fcr.t_i_max", {{kFcrTi, 1.0}}, g.t_i_max_fcr));
    out.push_back(make("fcr.t_a_order", {{kFcrTi, 1.0}, {kFcrTa, -1.0}}, -delta));
    out.push_back(make("fcr.t_a_max", {{kFcrTa, 1.0}}, g.t_a_max_fcr));
    // |1/D_p| df_max <= (t_a - t_i) r_max_p
    out.push_back(make("fcr.ramp", {{kFcrTi, 1.0}, {kFcrTa, -1.0}},
                       -std::abs(1.0 / droops.d_p) * nz.df_max / d.r_max_p));
  }
  if (shape.ffr) {
    out.push_back(make("ffr.t_a_min", {{kFfrTa, -1.0}}, -delta));
    out.push_back(make("ffr.t_a_max", {{kFfrTa, 1.0}}, g.t_a_max_ffr));
    out.push_back(make("ffr.t_d_min", {{kFfrTa, 1.0}, {kFfrTd, -1.0}}, -g.t_d_min_offset_ffr));
    out.push_back(make("ffr.t_d_max", {{kFfrTa, -1.0}, {kFfrTd, 1.0}}, d.t_d_max_ffr));
    out.push_back(make("ffr.t_r_min", {{kFfrTd, 1.0}, {kFfrTr, -1.0}}, -g.t_r_min_offset_ffr));
    out.push_back(make("ffr.t_r_max", {{kFfrTd, -1.0}, {kFfrTr, 1.0}}, d.t_r_max_ffr));
    out.push_back(make("ffr.x_min", {{kFfrX, -1.0}}, -1.0));
    out.push_back(make("ffr.x_max", {{kFfrX, 1.0}}, g.x_max_ffr));
    // x |1/K_p| df_max <= t_a r_max_p
    out.push_back(make("ffr.ramp", {{kFfrX, std::abs(1.0 / droops.k_p) * nz.df_max}, {kFfrTa, -d.r_max_p}}, 0.0));
  }
  if (shape.aux) {
    const double cap = aux_cap(shape, droops, limits);
    out.push_back(make("aux.omega_l_min", {{kAuxOmegaL, -1.0}}, -g.omega_min));
    out.push_back(make("aux.omega_order", {{kAuxOmegaL, 1.0}, {kAuxOmegaH, -1.0}}, -delta));
    out.push_back(make("aux.omega_h_max", {{kAuxOmegaH, 1.0}}, g.omega_max));
    out.push_back(make("aux.m_cap_upper", {{kAuxM, 1.0}}, cap));
    out.push_back(make("aux.m_cap_lower", {{kAuxM, -1.0}}, cap));
  }
  if (shape.vq) {
    out.push_back(make("vq.t90_min", {{kVqT90, -1.0}}, -delta));
    out.push_back(make("vq.t90_max", {{kVqT90, 1.0}}, g.t90_max_vq));
    out.push_back(make("vq.t100_order", {{kVqT90, 1.0}, {kVqT100, -1.0}}, -delta));
    out.push_back(make("vq.t100_max", {{kVqT100, 1.0}}, g.t100_max_vq));
    // 0.9 |1/D_q| dv_max <= t90 r_max_q
    out.push_back(make("vq.ramp", {{kVqT90, -d.r_max_q}}, -0.9 * std::abs(1.0 / droops.d_q) * nz.dv_max));
  }
  return out;
}

double superposition_margin(const AlphaParams& alpha, const Droops& droops, const LimitSet& limits) {
  std::vector<double> times;
  std::optional<PwlCurve> fcr, ffr;
  if (alpha.fcr) fcr = fcr_curve(*alpha.fcr, droops.d_p);
  if (alpha.ffr) ffr = ffr_curve(*alpha.ffr, droops.k_p);
  for (const auto* c : {fcr ? &*fcr : nullptr, ffr ? &*ffr : nullptr}) {
    if (!c) continue;
    for (const auto& b : c->breakpoints()) times.push_back(b.time);
  }
  // The sum is piecewise linear with kinks only at breakpoints, so its
  // extreme values sit there.
  double peak = 0.0;
  for (double t : times) {
    const double v = (fcr ? fcr->value_at(t) : 0.0) + (ffr ? ffr->value_at(t) : 0.0);
    peak = std::max(peak, std::abs(v));
  }
  const double m = alpha.aux ? std::abs(alpha.aux->m) : 0.0;
  return (peak + m) * limits.normalization.df_max - limits.device.m_max_p;
}

std::vector<Violation> check_feasible(const AlphaParams& alpha, const Droops& droops, const LimitSet& limits,
                                      double tol) {
  std::vector<Violation> out;
  const Vector x = pack(alpha);
  for (const auto& c : linear_constraints(alpha, droops, limits)) {
    const double s = slack_of(c, x);
    if (s < -tol) out.push_back({c.id, s});
  }
  if (limits.device.superposition_check && (alpha.fcr || alpha.ffr || alpha.aux)) {
    double margin = std::numeric_limits<double>::infinity();
    try {
      margin = superposition_margin(alpha, droops, limits);
    } catch (const ValidationError&) {
      // Curves that cannot be built are already reported by the linear part.
      if (out.empty()) out.push_back({"fp.structure", -std::numeric_limits<double>::infinity()});
      return out;
    }
    if (-margin < -tol) out.push_back({"fp.superposition", -margin});
  }
  return out;
}

Vector project_polyhedron(const Vector& y, const Matrix& g, const Vector& h) {
  const Eigen::Index n = y.size(), m = g.rows();
  if (g.cols() != n || h.size() != m) throw ValidationError("project_polyhedron(): dimension mismatch");
  const double scale = 1.0 + y.cwiseAbs().maxCoeff() + (m > 0 ? h.cwiseAbs().maxCoeff() : 0.0);
  const double feas_tol = 1e-12 * scale;
  auto feasible = [&](const Vector& x) { return m == 0 || ((g * x - h).array() <= feas_tol).all(); };
  if (feasible(y)) return y;

  // Enumerate active sets by increasing size. For a strictly convex QP any
  // KKT point is the unique minimizer, and some linearly independent active
  // subset of size <= n always certifies it.
  std::vector<Eigen::Index> idx;
  const Eigen::Index kmax = std::min(n, m);
  for (Eigen::Index k = 1; k <= kmax; ++k) {
    idx.resize(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
      Matrix gs(k, n);
      Vector hs(k);
      for (Eigen::Index i = 0; i < k; ++i) {
        gs.row(i) = g.row(idx[static_cast<std::size_t>(i)]);
        hs(i) = h(idx[static_cast<std::size_t>(i)]);
      }
      const Matrix gram = gs * gs.transpose();
      Eigen::FullPivLU<Matrix> lu(gram);
      lu.setThreshold(1e-12);
      if (lu.rank() == k) {
        const Vector lambda = lu.solve(gs * y - hs);
        if ((lambda.array() >= -1e-12 * (1.0 + lambda.cwiseAbs().maxCoeff())).all()) {
          const Vector x = y - gs.transpose() * lambda;
          if (feasible(x)) return x;
        }
      }
      // next combination
      Eigen::Index i = k - 1;
      while (i >= 0 && idx[static_cast<std::size_t>(i)] == m - k + i) --i;
      if (i < 0) break;
      ++idx[static_cast<std::size_t>(i)];
      for (Eigen::Index j = i + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j) - 1] + 1;
    }
  }
  throw NumericalError("infeasible", "constraint set is empty (inconsistent limits)");
}

AlphaParams project(const AlphaParams& alpha, const Droops& droops, const LimitSet& limits) {
  const auto constraints = linear_constraints(alpha, droops, limits);
  Vector x = pack(alpha);
  const std::vector<std::vector<std::size_t>> blocks = {
      {kFcrTi, kFcrTa}, {kFfrTa, kFfrTd, kFfrTr, kFfrX}, {kAuxOmegaL, kAuxOmegaH, kAuxM}, {kVqT90, kVqT100}};
  for (const auto& block : blocks) {
    std::vector<const LinearConstraint*> rows;
    for (const auto& c : constraints) {
      if (std::any_of(block.begin(), block.end(), [&](std::size_t i) { return c.coeffs[i] != 0.0; })) {
        rows.push_back(&c);
      }
    }
    if (rows.empty()) continue;
    const auto n = static_cast<Eigen::Index>(block.size());
    Matrix g(static_cast<Eigen::Index>(rows.size()), n);
    Vector h(static_cast<Eigen::Index>(rows.size())), y(n);
    for (Eigen::Index j = 0; j < n; ++j) y(j) = x(static_cast<Eigen::Index>(block[static_cast<std::size_t>(j)]));
    if (!y.allFinite()) throw ValidationError("project(): parameters must be finite");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (Eigen::Index j = 0; j < n; ++j) {
        g(static_cast<Eigen::Index>(r), j) = rows[r]->coeffs[block[static_cast<std::size_t>(j)]];
      }
      h(static_cast<Eigen::Index>(r)) = rows[r]->bound;
    }
    try {
      Vector p = project_polyhedron(y, g, h);
      // land exactly on simple bounds; the active-set solve can miss them
      // by an ulp, and the curve builders check x >= 1 strictly
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        Eigen::Index j = -1;
        for (Eigen::Index c = 0; c < n; ++c) {
          if (g(r, c) != 0.0) j = (j == -1) ? c : n;
        }
        if (j < 0 || j == n) continue;
        const double bound = h(r) / g(r, j);
        p(j) = g(r, j) > 0.0 ? std::min(p(j), bound) : std::max(p(j), bound);
      }
      for (Eigen::Index j = 0; j < n; ++j) x(static_cast<Eigen::Index>(block[static_cast<std::size_t>(j)])) = p(j);
    } catch (const NumericalError&) {
      const std::string name(kParamNames[block.front()].substr(0, kParamNames[block.front()].find('.')));
      throw NumericalError("infeasible", "no parameters satisfy the " + name + " limits");
    }
  }
  return unpack(x, alpha);
}

}  // namespace asopt

#pragma once

// Command table behind the isqlab front end. Every command takes a RunSpec,
// validates its options against a typed table, and returns a JSON summary
// plus CSV tables; nothing is written until the whole command has succeeded.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "isq/classical.hpp"
#include "isq/core.hpp"
#include "isq/io.hpp"
#include "isq/parallel.hpp"
#include "isq/propagator.hpp"
#include "isq/rgflow.hpp"
#include "isq/scattering.hpp"
#include "isq/spectrum.hpp"

namespace isq::cli {

enum class OptType { kReal, kInt, kReals, kString, kBool };

struct OptionSpec {
  std::string name;
  OptType type;
  Json fallback;  // null: no default, the command decides
  std::string help;
};

struct CommandOutput {
  Json summary = Json::object();
  std::vector<CsvTable> tables;
};

/// Parsed option values; every declared option is present (possibly null).
class Options {
 public:
  explicit Options(Json j) : j_(std::move(j)) {}
  bool has(const std::string& k) const { return !j_.at(k).is_null(); }
  double real(const std::string& k) const { return j_.at(k).get<double>(); }
  double real_or(const std::string& k, double d) const { return has(k) ? real(k) : d; }
  long long integer(const std::string& k) const { return j_.at(k).get<long long>(); }
  std::vector<double> reals(const std::string& k) const { return j_.at(k).get<std::vector<double>>(); }
  std::string str(const std::string& k) const { return j_.at(k).get<std::string>(); }
  bool flag(const std::string& k) const { return j_.at(k).get<bool>(); }
  const Json& json() const { return j_; }

 private:
  Json j_;
};

struct Command {
  std::string name;
  std::string help;
  std::vector<OptionSpec> options;
  std::function<CommandOutput(const RunSpec&, const Options&)> run;
};

// ---------------------------------------------------------------------------
// Option values

/// "lo:hi:n" grids: "geom:1e-4:1e-2:20" or "lin:0:1:11"; otherwise a comma list.
inline std::vector<double> parse_reals(const std::string& text, const std::string& where) {
  auto num = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw ValidationError(where + ": '" + s + "' is not a number");
    }
    if (used != s.size() || !std::isfinite(v)) throw ValidationError(where + ": '" + s + "' is not a number");
    return v;
  };
  auto split = [](const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == sep) {
        out.push_back(cur);
        cur.clear();
      } else if (c != ' ') {
        cur += c;
      }
    }
    out.push_back(cur);
    return out;
  };
  if (text.rfind("geom:", 0) == 0 || text.rfind("lin:", 0) == 0) {
    const auto parts = split(text, ':');
    if (parts.size() != 4) throw ValidationError(where + ": grid form is kind:lo:hi:n");
    const double lo = num(parts[1]), hi = num(parts[2]), n = num(parts[3]);
    if (n < 1 || n != std::floor(n) || n > 1e6) throw ValidationError(where + ": grid size must be a positive integer");
    if (parts[0] == "geom") {
      if (!(lo > 0.0 && hi > 0.0)) throw ValidationError(where + ": geometric grid needs positive ends");
      return n == 1 ? std::vector<double>{lo} : numeric::geomspace(lo, hi, static_cast<int>(n));
    }
    return n == 1 ? std::vector<double>{lo} : numeric::linspace(lo, hi, static_cast<int>(n));
  }
  std::vector<double> out;
  for (const auto& s : split(text, ',')) out.push_back(num(s));
  return out;
}

/// Checks and normalizes one option value given either as JSON or as flag text.
inline Json coerce_option(const OptionSpec& o, const Json& v) {
  const std::string where = "option " + o.name;
  switch (o.type) {
    case OptType::kReal: {
      if (v.is_string()) {
        const auto r = parse_reals(v.get<std::string>(), where);
        if (r.size() != 1) throw ValidationError(where + ": expected one number");
        return r[0];
      }
      if (!v.is_number() || !std::isfinite(v.get<double>())) throw ValidationError(where + ": expected a number");
      return v.get<double>();
    }
    case OptType::kInt: {
      if (v.is_string()) {
        const auto r = parse_reals(v.get<std::string>(), where);
        if (r.size() != 1 || r[0] != std::floor(r[0])) throw ValidationError(where + ": expected an integer");
        return static_cast<long long>(r[0]);
      }
      if (v.is_number_integer()) return v.get<long long>();
      if (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()) && std::abs(v.get<double>()) < 9e15)
        return static_cast<long long>(v.get<double>());
      throw ValidationError(where + ": expected an integer");
    }
    case OptType::kReals: {
      if (v.is_string()) return parse_reals(v.get<std::string>(), where);
      if (v.is_number()) return std::vector<double>{v.get<double>()};
      if (!v.is_array()) throw ValidationError(where + ": expected a list of numbers");
      std::vector<double> out;
      for (const auto& e : v) {
        if (!e.is_number() || !std::isfinite(e.get<double>())) throw ValidationError(where + ": expected numbers");
        out.push_back(e.get<double>());
      }
      return out;
    }
    case OptType::kString:
      if (!v.is_string()) throw ValidationError(where + ": expected a string");
      return v;
    case OptType::kBool:
      if (v.is_boolean()) return v;
      if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
      }
      throw ValidationError(where + ": expected true or false");
  }
  return v;
}

inline Options validate_options(const Command& c, const Json& given) {
  if (!given.is_object()) throw ValidationError("options must be an object");
  Json out = Json::object();
  for (const auto& [key, value] : given.items()) {
    const bool known = std::any_of(c.options.begin(), c.options.end(), [&](const auto& o) { return o.name == key; });
    if (!known) throw ValidationError(c.name + ": unknown option '" + key + "'");
  }
  for (const auto& o : c.options) {
    if (given.contains(o.name) && !given.at(o.name).is_null()) {
      out[o.name] = coerce_option(o, given.at(o.name));
    } else {
      out[o.name] = o.fallback.is_null() ? Json() : coerce_option(o, o.fallback);
    }
  }
  return Options(std::move(out));
}

// ---------------------------------------------------------------------------
// Helpers shared by commands

inline int sign_option(const Options& o, const char* key = "sign") {
  const auto s = o.integer(key);
  if (s != 1 && s != -1) throw ValidationError(std::string("option ") + key + ": must be +1 or -1");
  return static_cast<int>(s);
}

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw ValidationError(std::string("option ") + what + ": must be positive");
}

inline void require_nonempty(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw ValidationError(std::string("option ") + what + ": must not be empty");
}

inline CsvTable make_table(const RunSpec& s, std::string name, std::vector<std::string> columns) {
  CsvTable t;
  t.name = std::move(name);
  t.columns = std::move(columns);
  t.note("command", s.command);
  t.note("alpha", s.params.alpha);
  t.note("x0", s.params.x0);
  t.note("regulator", to_string(s.regulator.kind));
  t.note("units", "dimensionless unless noted; x, y, b x0 are lengths; t, 1/E are length^2");
  return t;
}

inline Json fixed_point_json(const ModelParams& p, int sign) {
  const auto f = fixed_point_info(p, sign);
  return {{"gamma_star", f.gamma_star}, {"g_star", f.g_star}, {"y", f.y}, {"stability", to_string(f.stability)}};
}

// ---------------------------------------------------------------------------
// Commands

inline CommandOutput cmd_fixed_points(const RunSpec& s, const Options&) {
  require_conformal(s.params, "fixed-points");
  const auto fp = fixed_points(s.params);
  CommandOutput out;
  out.summary = {{"alpha", s.params.alpha},
                 {"omega", s.params.omega},
                 {"nu_plus", s.params.nu_plus},
                 {"nu_minus", s.params.nu_minus},
                 {"g_plus", fp.g_plus},
                 {"g_minus", fp.g_minus},
                 {"plus", fixed_point_json(s.params, +1)},
                 {"minus", fixed_point_json(s.params, -1)}};
  return out;
}

inline CommandOutput cmd_flow(const RunSpec& s, const Options& o) {
  const auto& p = s.params;
  const double gamma0 = o.has("gamma0") ? o.real("gamma0") : gamma_of_g(s.regulator.g);
  const double b0 = o.real_or("b0", s.regulator.b);
  const double b1 = o.real("b1");
  require_positive(b0, "b0");
  require_positive(b1, "b1");
  const int n = static_cast<int>(o.integer("n"));
  if (n < 2) throw ValidationError("option n: need at least 2 points");
  auto t = make_table(s, "flow", {"b", "gamma", "g", "u"});
  t.note("gamma0", gamma0);
  t.note("b0", b0);
  int exited = 0;
  for (double b : numeric::geomspace(b0, b1, n)) {
    const auto st = flow(p, gamma0, b0, b);
    exited += st.exited_branch ? 1 : 0;
    t.add_row({b, st.gamma, st.g, st.u});
  }
  CommandOutput out;
  const auto end = flow(p, gamma0, b0, b1);
  out.summary = {{"gamma0", gamma0}, {"b0", b0}, {"b1", b1}, {"gamma1", end.gamma}, {"g1", end.g},
                 {"u1", end.u},      {"points_off_branch", exited}};
  out.tables.push_back(std::move(t));
  return out;
}

inline CommandOutput cmd_contours(const RunSpec& s, const Options& o) {
  const auto ratios = o.reals("ratios");
  require_nonempty(ratios, "ratios");
  const auto xi = numeric::geomspace(o.real("xi_min"), o.real("xi_max"), static_cast<int>(o.integer("n_xi")));
  require_positive(o.real("xi_min"), "xi_min");
  std::vector<Contour> cs(ratios.size());
  parallel_for(ratios.size(), [&](std::size_t i) { cs[i] = contour_constant_ratio(s.params, ratios[i], xi); });
  auto t = make_table(s, "contours", {"xi", "g", "ratio", "ratio_target"});
  Json notes = Json::array();
  for (const auto& c : cs) {
    for (const auto& q : c.points) t.add_row({q.xi, q.g, q.ratio, c.ratio_target});
    for (const auto& n : c.notes) notes.push_back(n);
  }
  CommandOutput out;
  out.summary = {{"ratios", ratios}, {"rows", t.rows.size()}, {"notes", notes}};
  out.tables.push_back(std::move(t));
  return out;
}

inline CommandOutput cmd_bound_state(const RunSpec& s, const Options& o) {
  const auto gs = o.has("g_values") ? o.reals("g_values") : std::vector<double>{s.regulator.g};
  require_nonempty(gs, "g_values");
  const bool with_mean = o.flag("mean_x");
  struct Row {
    std::optional<BoundState> bs;
    double mean_x = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<Row> rows(gs.size());
  parallel_for(gs.size(), [&](std::size_t i) {
    const auto r = s.regulator.with_g(gs[i]);
    rows[i].bs = bound_state(s.params, r);
    if (rows[i].bs && with_mean) rows[i].mean_x = mean_position(s.params, r, gs[i]);
  });
  auto t = make_table(s, "bound_state", {"alpha", "scheme", "b", "g", "E", "xi", "mean_x"});
  Json list = Json::array();
  const auto nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const auto& bs = rows[i].bs;
    t.add_row({s.params.alpha, to_string(s.regulator.kind), s.regulator.b, gs[i], bs ? bs->energy : nan,
               bs ? bs->xi : nan, rows[i].mean_x});
    list.push_back(bs ? Json{{"g", gs[i]}, {"E", bs->energy}, {"xi", bs->xi}} : Json{{"g", gs[i]}, {"E", nullptr}});
  }
  CommandOutput out;
  out.summary = {{"bound_states", list}};
  out.tables.push_back(std::move(t));
  return out;
}

inline FitModel fit_model_option(const Options& o) {
  const auto m = o.str("model");
  if (m == "corrected") return FitModel::kPowerLawWithCorrection;
  if (m == "plain") return FitModel::kPowerLaw;
  throw ValidationError("option model: expected 'corrected' or 'plain'");
}

inline CommandOutput cmd_exponent(const RunSpec& s, const Options& o) {
  FitWindow w;
  w.lo = o.real("dg_min");
  w.hi = o.real("dg_max");
  w.n = static_cast<int>(o.integer("n"));
  w.model = fit_model_option(o);
  require_positive(w.lo, "dg_min");
  if (!(w.hi > w.lo)) throw ValidationError("option dg_max: must exceed dg_min");
  if (w.n < 3) throw ValidationError("option n: need at least 3 points");
  const auto fit = binding_exponent(s.params, s.regulator, w);
  auto data = make_table(s, "exponent", {"dg", "E"});
  data.note("g_star", fit.g_star);
  for (std::size_t i = 0; i < fit.dg.size(); ++i) data.add_row({fit.dg[i], fit.energy[i]});
  auto ft = make_table(s, "exponent_fit",
                       {"alpha", "scheme", "b", "g_star", "slope", "amplitude", "amplitude_closed_form", "residual"});
  ft.note("window", format_double(w.lo) + " .. " + format_double(w.hi));
  ft.note("fit_model", o.str("model"));
  const double closed = s.regulator.kind == RegulatorKind::kSquareWell ? binding_constant(s.params)
                                                                         : std::numeric_limits<double>::quiet_NaN();
  ft.add_row({s.params.alpha, to_string(s.regulator.kind), s.regulator.b, fit.g_star, fit.exponent, fit.amplitude,
              closed, fit.residual});
  CommandOutput out;
  out.summary = {{"slope", fit.exponent},       {"expected", 1.0 / s.params.omega}, {"amplitude", fit.amplitude},
                 {"amplitude_closed_form", closed}, {"g_star", fit.g_star},          {"residual", fit.residual}};
  out.tables.push_back(std::move(data));
  out.tables.push_back(std::move(ft));
  return out;
}

inline PropagatorOptions propagator_options(const Options& o, int sign) {
  PropagatorOptions opt;
  const auto n = o.str("normalization");
  if (n == "spectral") {
    opt.norm = Normalization::kSpectral;
  } else if (n == "frozen") {
    opt.norm = Normalization::kFrozen;
  } else {
    throw ValidationError("option normalization: expected 'spectral' or 'frozen'");
  }
  opt.sign = sign;
  opt.rel_tol = o.real("rel_tol");
  require_positive(opt.rel_tol, "rel_tol");
  return opt;
}

inline CommandOutput cmd_propagator(const RunSpec& s, const Options& o) {
  const auto& p = s.params;
  require_conformal(p, "propagator");
  const int sign = o.has("sign") ? sign_option(o) : 0;
  Regulator r = s.regulator;
  double u = std::numeric_limits<double>::quiet_NaN();
  if (sign != 0) {
    u = o.real_or("u", 0.0);
    r = Regulator::square(s.regulator.b, depth_from_reduced(p, sign, u));
  }
  const auto opt = propagator_options(o, sign == 0 ? 1 : sign);
  const auto xs = o.reals("x"), ys = o.reals("y"), ts = o.reals("t");
  require_nonempty(xs, "x");
  require_nonempty(ys, "y");
  require_nonempty(ts, "t");
  struct Job {
    double x, y, t;
  };
  std::vector<Job> jobs;
  for (double x : xs)
    for (double y : ys)
      for (double t : ts) jobs.push_back({x, y, t});
  const auto samples = parallel_map(jobs, [&](const Job& j) { return propagator_quadrature(p, r, j.x, j.y, j.t, opt); });
  auto t = make_table(s, "propagator", {"alpha", "sign", "b", "u", "x", "y", "t", "G", "quad_error", "G_fixed_point"});
  t.note("g", r.g);
  t.note("normalization", o.str("normalization"));
  t.note("rel_tol", opt.rel_tol);
  double worst = 0.0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& q = samples[i];
    const double closed = (sign != 0 && u == 0.0) ? fixed_point_propagator(p, sign, q.x, q.y, q.t)
                                                  : std::numeric_limits<double>::quiet_NaN();
    if (std::isfinite(closed)) worst = std::max(worst, std::abs(q.value / closed - 1));
    t.add_row({p.alpha, sign, r.b, u, q.x, q.y, q.t, q.value, q.quad_error, closed});
  }
  CommandOutput out;
  out.summary = {{"points", jobs.size()}, {"g", r.g}, {"sign", sign}};
  if (sign != 0 && u == 0.0) out.summary["max_rel_dev_fixed_point"] = worst;
  out.tables.push_back(std::move(t));
  return out;
}

inline Json law_json(const LawCheck& c) {
  return {{"lhs", c.lhs},           {"rhs", c.rhs},
          {"residual", c.residual}, {"quad_error", c.quad_error},
          {"regime_warning", c.regime_warning}, {"note", c.note}};
}

inline CommandOutput cmd_scaling_check(const RunSpec& s, const Options& o) {
  const auto& p = s.params;
  require_conformal(p, "scaling-check");
  const int sign = sign_option(o);
  const double b = s.regulator.b, u = o.real("u");
  const double x = o.real("x"), y = o.real("y"), t = o.real("t");
  const auto lambdas = o.reals("lambda");
  require_nonempty(lambdas, "lambda");
  const double tol = o.real("rel_tol");
  auto frozen = frozen_options(sign, tol);
  PropagatorOptions spectral;
  spectral.rel_tol = tol;
  const Regulator r = Regulator::square(b, depth_from_reduced(p, sign, u));
  auto table = make_table(s, "scaling_check", {"law", "lambda", "lhs", "rhs", "residual", "quad_error", "regime_warning"});
  table.note("sign", format_double(sign));
  table.note("b", b);
  table.note("u", u);
  table.note("rel_tol", tol);
  Json laws = Json::array();
  auto add = [&](const char* name, double lambda, const LawCheck& c) {
    table.add_row({name, lambda, c.lhs, c.rhs, c.residual, c.quad_error, c.regime_warning ? 1 : 0});
    Json j = law_json(c);
    j["law"] = name;
    j["lambda"] = lambda;
    laws.push_back(j);
  };
  for (double l : lambdas) {
    add("exact", l, check_exact_law(p, r, x, y, t, l, spectral));
    add("asymptotic", l, check_asymptotic_law(p, b, u, sign, x, y, t, l, frozen));
    add("scaling", l, check_scaling_relation(p, b, u, sign, l, x, y, t, frozen));
  }
  const auto cs = callan_symanzik_residual(p, b, u, sign, x, y, t, 1e-3, frozen);
  table.add_row({"callan-symanzik", 0.0, cs.b_log_derivative, cs.u_log_derivative, cs.residual, 0.0, 0});
  CommandOutput out;
  out.summary = {{"sign", sign}, {"b", b}, {"u", u}, {"laws", laws}, {"callan_symanzik_residual", cs.residual}};
  out.tables.push_back(std::move(table));
  return out;
}

inline CommandOutput cmd_collapse(const RunSpec& s, const Options& o) {
  const auto bs = o.reals("b_grid"), us = o.reals("u_grid");
  require_nonempty(bs, "b_grid");
  require_nonempty(us, "u_grid");
  const double u0 = o.real("u0");
  const auto tab = scaling_collapse(s.params, bs, us, u0, o.real("x"), o.real("y"), o.real("t"),
                                    frozen_options(+1, o.real("rel_tol")));
  auto t = make_table(s, "collapse", {"z", "Phi", "b", "u", "G", "quad_error"});
  t.note("u0", u0);
  t.note("x", o.real("x"));
  t.note("y", o.real("y"));
  t.note("t", o.real("t"));
  t.note("rel_tol", o.real("rel_tol"));
  for (const auto& q : tab.points) t.add_row({q.z, q.Phi, q.b, q.u, q.G, q.quad_error});
  CommandOutput out;
  out.summary = {{"p", tab.p_exp},     {"q", tab.q_exp},         {"expected_p", s.params.nu_plus},
                 {"expected_q", s.params.nu_minus}, {"c", tab.c}, {"spread", tab.spread},
                 {"row_spread", tab.row_spread}, {"regime_warning", tab.regime_warning}};
  out.tables.push_back(std::move(t));
  return out;
}

inline CommandOutput cmd_phase_shift(const RunSpec& s, const Options& o) {
  const auto ks = o.reals("k");
  require_nonempty(ks, "k");
  for (double k : ks) require_positive(k, "k");
  const auto sweep = o.flag("sweep") ? phase_shift_sweep(s.params, s.regulator, ks)
                                     : parallel_map(ks, [&](double k) { return phase_shift(s.params, s.regulator, k); });
  auto t = make_table(s, "phase_shift", {"mu", "g", "Re r", "Im r", "delta"});
  t.note("b", s.regulator.b);
  t.note("branch", o.flag("sweep") ? "continuous from the largest k" : "principal (-pi/2, pi/2]");
  for (const auto& d : sweep) {
    const auto r = reflection(s.params, s.regulator, d.k).r;
    t.add_row({d.mu, d.g, r.real(), r.imag(), d.delta});
  }
  const auto e = small_mu_expansion(s.params, s.regulator.g);
  CommandOutput out;
  out.summary = {{"points", sweep.size()}, {"leading", e.leading}, {"coefficient", e.coefficient}};
  out.tables.push_back(std::move(t));
  return out;
}

inline CommandOutput cmd_phase_curve(const RunSpec& s, const Options& o) {
  const double mu0 = o.real("mu0"), mu1 = o.real("mu1");
  const double g0 = o.real_or("g0", s.regulator.g);
  const auto c = constant_phase_curve(s.params, mu0, g0, mu1, static_cast<int>(o.integer("n")), o.real("rel_tol"));
  auto t = make_table(s, "phase_curve", {"mu", "g"});
  t.note("rel_tol", o.real("rel_tol"));
  for (const auto& q : c.points) t.add_row({q.mu, q.g});
  const double d0 = phase_shift(s.params, Regulator::square(1.0, g0), mu0).delta;
  const auto& last = c.points.back();
  const double d1 = phase_shift(s.params, Regulator::square(1.0, last.g), last.mu).delta;
  CommandOutput out;
  out.summary = {{"complete", c.complete}, {"note", c.note},         {"delta_start", d0},
                 {"delta_end", d1},        {"g_end", last.g},        {"mu_end", last.mu}};
  out.tables.push_back(std::move(t));
  return out;
}

inline PathMode path_mode_option(const Options& o) {
  const auto m = o.str("mode");
  if (m == "full") return PathMode::kFull;
  if (m == "barrier") return PathMode::kBarrierOnly;
  if (m == "free") return PathMode::kFree;
  throw ValidationError("option mode: expected 'full', 'barrier' or 'free'");
}

inline CommandOutput cmd_feynman_kac(const RunSpec& s, const Options& o) {
  PathEnsembleSpec e;
  e.x = o.real("x");
  e.y = o.real("y");
  e.t = o.real("t");
  e.N = static_cast<int>(o.integer("N"));
  e.n_samples = o.integer("n_samples");
  if (o.integer("seed") < 0) throw ValidationError("option seed: must be non-negative");
  e.seed = static_cast<std::uint64_t>(o.integer("seed"));
  e.mode = path_mode_option(o);
  e.refine = static_cast<int>(o.integer("refine"));
  const double l = o.real("lambda"), lp = o.real("lambda_prime");
  auto t = make_table(s, "feynman_kac", {"x", "y", "t", "N", "n_samples", "W", "stderr"});
  t.note("seed", std::to_string(e.seed));
  t.note("mode", to_string(e.mode));
  t.note("refine", std::to_string(e.refine));
  t.note("b", s.regulator.b);
  t.note("g", s.regulator.g);
  CommandOutput out;
  if (l != 1.0 || lp != 1.0) {
    const int sign = sign_option(o);
    const auto c = scaling_check_W(s.params, s.regulator.b, sign, l, lp, e);
    // per-point errors are not kept by the ratio check; the ratio error is in the summary
    const double nan = std::numeric_limits<double>::quiet_NaN();
    t.add_row({e.x, e.y, e.t, e.N, static_cast<long long>(e.n_samples), c.W_base, nan});
    t.add_row({l * e.x, lp * e.y, e.t, e.N, static_cast<long long>(e.n_samples), c.W_scaled, nan});
    out.summary = {{"ratio", c.ratio}, {"expected", c.expected}, {"std_error", c.std_error}, {"noisy", c.noisy}};
  } else {
    const auto r = feynman_kac(s.params, s.regulator, e);
    t.add_row({e.x, e.y, e.t, e.N, static_cast<long long>(e.n_samples), r.W, r.std_error});
    out.summary = {{"W", r.W}, {"std_error", r.std_error}, {"survival", r.survival}, {"n_absorbed", r.n_absorbed}};
    if (o.flag("reference")) {
      double ref = std::numeric_limits<double>::quiet_NaN();
      if (e.mode == PathMode::kFree) ref = free_heat_kernel(e.x, e.y, e.t);
      if (e.mode == PathMode::kBarrierOnly) ref = image_heat_kernel(e.x, e.y, e.t);
      if (e.mode == PathMode::kFull) ref = propagator_quadrature(s.params, s.regulator, e.x, e.y, e.t).value;
      out.summary["reference"] = ref;
      out.summary["z"] = (r.W - ref) / r.std_error;
    }
  }
  out.tables.push_back(std::move(t));
  return out;
}

inline CommandOutput cmd_chain(const RunSpec& s, const Options& o) {
  const auto& p = s.params;
  const auto eps = o.reals("epsilon");
  require_nonempty(eps, "epsilon");
  for (double e : eps) require_positive(e, "epsilon");
  FreeEnergyOptions fo;
  fo.x_inner = o.real("x_inner");
  require_positive(fo.x_inner, "x_inner");
  CommandOutput out;
  if (o.integer("N") > 0) {
    // partition function of a finite chain
    ChainSpec cs;
    cs.N = static_cast<int>(o.integer("N"));
    cs.x = o.real("x");
    cs.y = o.real("y");
    auto t = make_table(s, "chain_partition", {"g", "epsilon", "N", "x", "y", "Z", "log_Z", "truncation_error"});
    Json rows = Json::array();
    for (double e : eps) {
      cs.epsilon = e;
      const auto z = chain_partition(p, s.regulator, cs);
      t.add_row({s.regulator.g, e, cs.N, cs.x, cs.y, z.Z, z.log_Z, z.truncation_error});
      rows.push_back({{"epsilon", e}, {"Z", z.Z}, {"log_Z", z.log_Z}});
    }
    out.summary = {{"partition", rows}};
    out.tables.push_back(std::move(t));
    return out;
  }
  std::vector<double> gs;
  const bool fit = o.has("dg");
  const double gm = fixed_points(p).g_minus;
  if (fit) {
    for (double d : o.reals("dg")) gs.push_back(gm + d);
  } else {
    gs = o.has("g_values") ? o.reals("g_values") : std::vector<double>{s.regulator.g};
  }
  require_nonempty(gs, "g_values");
  std::vector<ExtrapolatedFreeEnergy> ex(gs.size());
  std::vector<std::vector<FreeEnergyResult>> single(gs.size());
  parallel_for(gs.size(), [&](std::size_t i) {
    const auto r = s.regulator.with_g(gs[i]);
    for (double e : eps) single[i].push_back(free_energy_density(p, r, e, fo));
    if (eps.size() >= 2) ex[i] = free_energy_extrapolated(p, r, eps, fo);
  });
  auto t = make_table(s, "chain", {"g", "epsilon", "n_grid", "f", "E0_ref"});
  t.note("x_inner", fo.x_inner);
  t.note("extrapolation", "rows with epsilon = 0 are the f0 + a eps + c eps^2 fit");
  Json list = Json::array();
  const double L = s.regulator.b * p.x0;
  for (std::size_t i = 0; i < gs.size(); ++i) {
    for (const auto& f : single[i]) {
      const long long n_grid = std::llround((L + fo.x_inner) / f.h);
      t.add_row({gs[i], f.epsilon, n_grid, f.f, f.E0});
    }
    Json j = {{"g", gs[i]}, {"E0", single[i].front().E0}};
    if (eps.size() >= 2) {
      t.add_row({gs[i], 0.0, 0, ex[i].f, ex[i].E0});
      j["f"] = ex[i].f;
      j["phase"] = to_string(ex[i].phase);
    } else {
      j["f"] = single[i].front().f;
      j["phase"] = to_string(single[i].front().phase);
    }
    list.push_back(j);
  }
  out.summary = {{"free_energy", list}};
  if (fit) {
    std::vector<double> dg, f;
    for (std::size_t i = 0; i < gs.size(); ++i) {
      dg.push_back(gs[i] - gm);
      f.push_back(-(eps.size() >= 2 ? ex[i].f : single[i].front().f));
    }
    const auto cf = fit_power_law(dg, f, FitModel::kPowerLawWithCorrection);
    out.summary["slope"] = cf.exponent;
    out.summary["expected"] = 1.0 / p.omega;
    out.summary["amplitude"] = cf.amplitude;
  }
  out.tables.push_back(std::move(t));
  return out;
}

inline CommandOutput cmd_limit_cycle(const RunSpec& s, const Options& o) {
  const auto bs = o.reals("b_values");
  require_nonempty(bs, "b_values");
  const double eps = o.real("eps");
  const int nb = static_cast<int>(o.integer("n_branches"));
  if (nb < 1) throw ValidationError("option n_branches: must be >= 1");
  auto t = make_table(s, "limit_cycle", {"log_b", "eps", "g_root_index", "g"});
  t.note("abs_omega", s.params.omega);
  t.note("period_log_b", std::numbers::pi / s.params.omega);
  Json rows = Json::array();
  double phi = 0.0;
  for (double b : bs) {
    require_positive(b, "b_values");
    const auto st = limit_cycle(s.params, b, eps, nb);
    phi = st.phi;
    for (std::size_t i = 0; i < st.g_branches.size(); ++i)
      t.add_row({std::log(b), eps, static_cast<long long>(i), st.g_branches[i]});
    rows.push_back({{"b", b}, {"g", st.g_branches}});
  }
  CommandOutput out;
  out.summary = {{"abs_omega", s.params.omega}, {"phi", phi}, {"period_log_b", std::numbers::pi / s.params.omega},
                 {"roots", rows}};
  out.tables.push_back(std::move(t));
  return out;
}

// ---------------------------------------------------------------------------
// Table

inline const std::vector<Command>& commands() {
  using T = OptType;
  static const std::vector<Command> table = {
      {"fixed-points", "fixed points g_+- and their RG eigenvalues", {}, cmd_fixed_points},
      {"flow",
       "closed-form RG flow of gamma from b0 to b1",
       {{"gamma0", T::kReal, nullptr, "initial gamma (default: from regulator g)"},
        {"b0", T::kReal, nullptr, "initial cutoff (default: regulator b)"},
        {"b1", T::kReal, 1e-6, "final cutoff"},
        {"n", T::kInt, 41, "log-spaced output points"}},
       cmd_flow},
      {"contours",
       "curves of constant C+/C- in the (xi, g) plane",
       {{"ratios", T::kReals, "1", "target ratios"},
        {"xi_min", T::kReal, 1e-4, "smallest xi"},
        {"xi_max", T::kReal, 0.3, "largest xi"},
        {"n_xi", T::kInt, 60, "log-spaced xi values"}},
       cmd_contours},
      {"bound-state",
       "bound-state energy and mean position",
       {{"g_values", T::kReals, nullptr, "depths (default: regulator g)"},
        {"mean_x", T::kBool, true, "also compute <x>"}},
       cmd_bound_state},
      {"exponent",
       "power-law fit of |E| against g - g_*",
       {{"dg_min", T::kReal, 1e-4, "window start"},
        {"dg_max", T::kReal, 1e-2, "window end"},
        {"n", T::kInt, 20, "log-spaced points"},
        {"model", T::kString, "corrected", "corrected | plain"}},
       cmd_exponent},
      {"propagator",
       "imaginary-time propagator by spectral quadrature",
       {{"x", T::kReals, "1", "final positions"},
        {"y", T::kReals, "1", "initial positions"},
        {"t", T::kReals, "1", "times"},
        {"sign", T::kInt, nullptr, "+1 or -1: set g from the reduced coupling u"},
        {"u", T::kReal, nullptr, "reduced coupling (with sign; default 0)"},
        {"normalization", T::kString, "spectral", "spectral | frozen"},
        {"rel_tol", T::kReal, 1e-12, "quadrature tolerance"}},
       cmd_propagator},
      {"scaling-check",
       "residuals of the homogeneity laws and the Callan-Symanzik equation",
       {{"sign", T::kInt, 1, "+1 or -1"},
        {"u", T::kReal, 1e-3, "reduced coupling"},
        {"x", T::kReal, 1.0, "final position"},
        {"y", T::kReal, 1.0, "initial position"},
        {"t", T::kReal, 1.0, "time"},
        {"lambda", T::kReals, "2,5", "scale factors (>= 1)"},
        {"rel_tol", T::kReal, 1e-12, "quadrature tolerance"}},
       cmd_scaling_check},
      {"collapse",
       "scaling function from propagator data near g_+",
       {{"b_grid", T::kReals, "geom:1e-6:1e-2:5", "cutoffs"},
        {"u_grid", T::kReals, "1e-3,3e-3,1e-2", "reduced couplings"},
        {"u0", T::kReal, 1e-2, "reference coupling"},
        {"x", T::kReal, 1.0, "final position"},
        {"y", T::kReal, 1.0, "initial position"},
        {"t", T::kReal, 100.0, "time"},
        {"rel_tol", T::kReal, 1e-13, "quadrature tolerance"}},
       cmd_collapse},
      {"phase-shift",
       "reflection amplitude and phase shift",
       {{"k", T::kReals, "geom:1e-4:2:40", "wave numbers"},
        {"sweep", T::kBool, true, "track the phase continuously"}},
       cmd_phase_shift},
      {"phase-curve",
       "curve of constant phase shift in the (mu, g) plane",
       {{"mu0", T::kReal, 0.5, "start mu"},
        {"g0", T::kReal, nullptr, "start g (default: regulator g)"},
        {"mu1", T::kReal, 1e-8, "end mu"},
        {"n", T::kInt, 41, "output points"},
        {"rel_tol", T::kReal, 1e-12, "integrator tolerance"}},
       cmd_phase_curve},
      {"feynman-kac",
       "Monte Carlo path-integral estimate of W(x, t; y)",
       {{"x", T::kReal, 1.0, "final position"},
        {"y", T::kReal, 1.0, "initial position"},
        {"t", T::kReal, 4.0, "time"},
        {"N", T::kInt, 4096, "time slices"},
        {"n_samples", T::kInt, 1000000, "paths"},
        {"seed", T::kInt, 1, "random seed"},
        {"mode", T::kString, "full", "full | barrier | free"},
        {"refine", T::kInt, 16, "substeps for slices near the well"},
        {"lambda", T::kReal, 1.0, "scale of x for the W ratio check"},
        {"lambda_prime", T::kReal, 1.0, "scale of y for the W ratio check"},
        {"sign", T::kInt, 1, "fixed point for the ratio check"},
        {"reference", T::kBool, false, "also compute the deterministic reference"}},
       cmd_feynman_kac},
      {"chain",
       "transfer-matrix free energy or partition function of the chain",
       {{"epsilon", T::kReals, "0.02,0.01,0.005", "lattice spacings (>= 2 extrapolates)"},
        {"g_values", T::kReals, nullptr, "depths (default: regulator g)"},
        {"dg", T::kReals, nullptr, "depths above g_- instead of g_values; fits the exponent"},
        {"x_inner", T::kReal, 40.0, "extent of the discretized region beyond b x0"},
        {"N", T::kInt, 0, "> 0: partition function with N interior sites"},
        {"x", T::kReal, 1.0, "boundary site x_{N+1}"},
        {"y", T::kReal, 1.0, "boundary site x_0"}},
       cmd_chain},
      {"limit-cycle",
       "roots of the limit-cycle condition for alpha < -1/4",
       {{"b_values", T::kReals, "1", "cutoffs"},
        {"eps", T::kReal, 1e-3, "energy scale"},
        {"n_branches", T::kInt, 3, "cotangent branches"}},
       cmd_limit_cycle},
  };
  return table;
}

inline const Command& find_command(const std::string& name) {
  for (const auto& c : commands()) {
    if (c.name == name) return c;
  }
  throw ValidationError("unknown command '" + name + "'");
}

struct RunResult {
  Json summary;
  std::vector<CsvTable> tables;
  std::vector<std::string> files;
};

/// Default output directory: ISQLAB_OUTPUT_DIR if set, else the working directory.
inline std::filesystem::path output_dir(const RunSpec& s) {
  if (!s.output.empty()) return s.output;
  if (const char* env = std::getenv("ISQLAB_OUTPUT_DIR"); env && *env) return env;
  return ".";
}

/// Validates, runs the command, and only then writes its artifacts.
inline RunResult run(const RunSpec& spec, bool write = true) {
  const auto& c = find_command(spec.command);
  const auto opts = validate_options(c, spec.options);
  auto out = c.run(spec, opts);
  RunResult res;
  res.summary = {{"command", spec.command}, {"params", to_json(spec.params)}, {"regulator", to_json(spec.regulator)},
                 {"options", opts.json()},  {"result", out.summary}};
  res.tables = std::move(out.tables);
  if (write) {
    const auto dir = output_dir(spec);
    std::vector<std::pair<std::filesystem::path, std::string>> files;
    for (const auto& t : res.tables) files.emplace_back(dir / (t.name + ".csv"), to_csv_string(t));
    std::string stem = spec.command;
    std::replace(stem.begin(), stem.end(), '-', '_');
    files.emplace_back(dir / (stem + ".json"), res.summary.dump(2) + "\n");
    for (const auto& [path, text] : files) {
      write_file_atomic(path, text);
      res.files.push_back(path.string());
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Golden data

struct GoldenFile {
  std::string name;
  std::string text;
};

/// Reference tables for figures and regression tests: contours, the scaling
/// collapse, and exponent fits for both wells, all at alpha = -3/16.
inline std::vector<GoldenFile> golden_tables() {
  std::vector<GoldenFile> out;
  auto add = [&](RunSpec s) {
    auto r = run(s, false);
    for (auto& t : r.tables) {
      t.provenance.insert(t.provenance.begin(), {"golden", "regenerate with: isqlab regen-golden"});
      if (provenance_value(t, "rel_tol").empty()) t.note("root_tol", "2^-50 relative (TOMS 748)");
      out.push_back({t.name + ".csv", to_csv_string(t)});
    }
  };
  const auto p = derived_constants(-3.0 / 16.0);
  RunSpec s;
  s.params = p;
  s.command = "contours";
  s.options = {{"ratios", "1,2,4"}, {"xi_min", 1e-4}, {"xi_max", 0.3}, {"n_xi", 40}};
  add(s);
  s.command = "collapse";
  s.options = Json::object();
  add(s);
  s.command = "exponent";
  s.regulator = Regulator::square(1.0, 0.0);
  add(s);
  auto& sq = out.back();
  sq.name = "exponent_fit_square.csv";
  out.erase(out.end() - 2);  // raw (dg, E) data are not golden
  s.regulator = Regulator::linear(0.0);
  add(s);
  out.back().name = "exponent_fit_linear.csv";
  out.erase(out.end() - 2);
  return out;
}

inline std::vector<std::string> regen_golden(const std::filesystem::path& dir) {
  const auto files = golden_tables();
  std::vector<std::string> written;
  for (const auto& f : files) {
    write_file_atomic(dir / f.name, f.text);
    written.push_back((dir / f.name).string());
  }
  return written;
}

}  // namespace isq::cli

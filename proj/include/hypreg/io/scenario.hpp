#pragma once

// Scenario schema (version 1). Every table except [grid] and [plant] is
// optional; unknown keys are rejected so typos surface as schema errors.
//
//   schema_version = 1
//   name = "static-d3"
//   [grid]          n_cells
//   [plant]         lambda, mu, gamma1, gamma2 (coefficients); q, rho
//   [disturbances]  d1, d2, d3, d4, n (signals); m1, m2 (coefficients, default 1)
//   [control]       mode, rho_tilde, k_I ("auto" | number), margin, epsilon ("auto" | number)
//   [sim]           horizon | horizon_tau, dt ("auto" | number), scheme
//   [initial]       u, v, uhat, vhat (coefficients), eta
//   [output]        plots, kernels, trace_stride
//   [[checks]]      type = "final_abs_y_below" | "sup_abs_y_below" | "finite" | "no_growth"
//
// Coefficients: a number, a polynomial string in x ("1 + 0.2*x^2"), an array
// of n_cells + 1 nodal values, or a table {x = [...], y = [...]} interpolated
// linearly. Signals: a number (constant) or a table with `type` in
// constant | step | pulse | sinusoid | noise | smooth_random | samples.

#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypreg/closed_loop.hpp"
#include "hypreg/io/toml.hpp"

namespace hypreg::io {

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Polynomial expressions in x.

namespace detail {

class Expr {
 public:
  explicit Expr(std::string src) : s_(std::move(src)) {
    fn_ = parse_sum();
    skip();
    if (p_ != s_.size()) throw ParameterError("unexpected '" + s_.substr(p_) + "' in expression");
  }
  double operator()(double x) const { return fn_(x); }

 private:
  using Fn = std::function<double(double)>;
  std::string s_;
  std::size_t p_ = 0;
  Fn fn_;

  void skip() {
    while (p_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[p_]))) ++p_;
  }
  bool eat(char c) {
    skip();
    if (p_ < s_.size() && s_[p_] == c) {
      ++p_;
      return true;
    }
    return false;
  }
  Fn parse_sum() {
    Fn lhs = parse_product();
    while (true) {
      if (eat('+')) {
        Fn r = parse_product();
        lhs = [lhs, r](double x) { return lhs(x) + r(x); };
      } else if (eat('-')) {
        Fn r = parse_product();
        lhs = [lhs, r](double x) { return lhs(x) - r(x); };
      } else {
        return lhs;
      }
    }
  }
  Fn parse_product() {
    Fn lhs = parse_unary();
    while (true) {
      if (eat('*')) {
        Fn r = parse_unary();
        lhs = [lhs, r](double x) { return lhs(x) * r(x); };
      } else if (eat('/')) {
        Fn r = parse_unary();
        lhs = [lhs, r](double x) { return lhs(x) / r(x); };
      } else {
        return lhs;
      }
    }
  }
  Fn parse_unary() {
    if (eat('-')) {
      Fn f = parse_unary();
      return [f](double x) { return -f(x); };
    }
    if (eat('+')) return parse_unary();
    return parse_power();
  }
  Fn parse_power() {
    Fn base = parse_atom();
    if (!eat('^')) return base;
    skip();
    std::size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(s_.substr(p_), &used);
    } catch (const std::exception&) {
      throw ParameterError("exponent must be a non-negative integer");
    }
    if (k < 0) throw ParameterError("exponent must be a non-negative integer");
    p_ += used;
    return [base, k](double x) { return std::pow(base(x), k); };
  }
  Fn parse_atom() {
    skip();
    if (eat('(')) {
      Fn f = parse_sum();
      if (!eat(')')) throw ParameterError("missing ')'");
      return f;
    }
    if (p_ < s_.size() && s_[p_] == 'x') {
      ++p_;
      return [](double x) { return x; };
    }
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s_.substr(p_), &used);
    } catch (const std::exception&) {
      throw ParameterError("expected a number, 'x' or '(' at '" + s_.substr(p_) + "'");
    }
    p_ += used;
    return [v](double) { return v; };
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Checks declared by a scenario.

struct Check {
  std::string type;
  double threshold = 0.0;
  std::optional<std::pair<double, double>> window_tau, early_tau, late_tau;
  double factor = 1.05;
  std::string series = "y";
};

struct CheckResult {
  std::string type;
  bool pass = false;
  double value = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct OutputOptions {
  bool plots = true;
  bool kernels = false;
  int trace_stride = 1;
};

struct ScenarioFile {
  Scenario scenario;
  std::vector<Check> checks;
  OutputOptions output;
  double tau = 0.0;
  nlohmann::json source;
};

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

class Reader {
 public:
  Reader(const nlohmann::json& j, const Document* doc) : root_(j), doc_(doc) {}

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    throw SchemaError(msg, path, doc_ ? line(path) : 0);
  }

  int line(const std::string& path) const {
    // The most specific recorded prefix.
    std::string p = path;
    while (!p.empty()) {
      if (int l = doc_->line_of(p); l > 0) return l;
      const auto cut = p.find_last_of(".[");
      if (cut == std::string::npos) break;
      p = p.substr(0, cut);
    }
    return 0;
  }

  void only_keys(const nlohmann::json& obj, const std::string& path, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(path, "expected a table");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!allowed.count(it.key())) fail(join(path, it.key()), "unknown key");
  }

  static std::string join(const std::string& a, const std::string& b) { return a.empty() ? b : a + "." + b; }

  double number(const nlohmann::json& v, const std::string& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "must be finite");
    return d;
  }

  double number_or(const nlohmann::json& obj, const char* key, const std::string& path, double dflt) const {
    return obj.contains(key) ? number(obj.at(key), join(path, key)) : dflt;
  }

  std::optional<double> number_or_auto(const nlohmann::json& obj, const char* key, const std::string& path) const {
    if (!obj.contains(key)) return std::nullopt;
    const auto& v = obj.at(key);
    if (v.is_string()) {
      if (v.get<std::string>() == "auto") return std::nullopt;
      fail(join(path, key), "expected a number or \"auto\"");
    }
    return number(v, join(path, key));
  }

  std::string string(const nlohmann::json& v, const std::string& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

  std::pair<double, double> interval(const nlohmann::json& v, const std::string& path) const {
    if (!v.is_array() || v.size() != 2) fail(path, "expected [start, end]");
    const double a = number(v[0], path + "[0]"), b = number(v[1], path + "[1]");
    if (!(b >= a)) fail(path, "end must not precede start");
    return {a, b};
  }

  Profile coefficient(const nlohmann::json& v, const std::string& path, const SpatialGrid& g) const {
    if (v.is_number()) return g.constant(number(v, path));
    if (v.is_string()) {
      try {
        const Expr e(v.get<std::string>());
        auto out = g.sample([&](double x) { return e(x); });
        if (!all_finite(out)) fail(path, "expression is not finite on [0, 1]");
        return out;
      } catch (const ParameterError& err) {
        fail(path, err.what());
      }
    }
    if (v.is_array()) {
      if (v.size() != g.size())
        fail(path, "expected " + std::to_string(g.size()) + " nodal values, got " + std::to_string(v.size()));
      Profile out(g.size());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = number(v[i], path + "[" + std::to_string(i) + "]");
      return out;
    }
    if (v.is_object()) {
      only_keys(v, path, {"x", "y"});
      if (!v.contains("x") || !v.contains("y")) fail(path, "table needs x and y");
      const auto &xs = v.at("x"), &ys = v.at("y");
      if (!xs.is_array() || !ys.is_array() || xs.size() != ys.size() || xs.size() < 2)
        fail(path, "x and y must be arrays of equal length >= 2");
      std::vector<double> x(xs.size()), y(ys.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = number(xs[i], path + ".x[" + std::to_string(i) + "]");
        y[i] = number(ys[i], path + ".y[" + std::to_string(i) + "]");
        if (i > 0 && !(x[i] > x[i - 1])) fail(path + ".x", "must be strictly increasing");
      }
      if (x.front() > 0.0 || x.back() < 1.0) fail(path + ".x", "must cover [0, 1]");
      return g.sample([&](double t) {
        std::size_t k = 1;
        while (k + 1 < x.size() && x[k] < t) ++k;
        const double w = (t - x[k - 1]) / (x[k] - x[k - 1]);
        return (1.0 - w) * y[k - 1] + w * y[k];
      });
    }
    fail(path, "expected a number, an expression string, an array or a table");
  }

  TimeSignal signal(const nlohmann::json& v, const std::string& path) const {
    if (v.is_number()) return TimeSignal::constant(number(v, path));
    if (!v.is_object() || !v.contains("type")) fail(path, "expected a number or a table with 'type'");
    const std::string type = string(v.at("type"), join(path, "type"));
    auto num = [&](const char* k, double d) { return number_or(v, k, path, d); };
    auto seed = [&]() -> std::uint64_t {
      if (!v.contains("seed")) fail(join(path, "seed"), "required for random signals");
      const auto& s = v.at("seed");
      if (!s.is_number_integer() || s.get<long long>() < 0) fail(join(path, "seed"), "expected a non-negative integer");
      return s.get<std::uint64_t>();
    };
    try {
      if (type == "constant") {
        only_keys(v, path, {"type", "value"});
        return TimeSignal::constant(num("value", 0.0));
      }
      if (type == "step") {
        only_keys(v, path, {"type", "amplitude", "start"});
        return TimeSignal(signals::Step{num("amplitude", 1.0), num("start", 0.0)});
      }
      if (type == "pulse") {
        only_keys(v, path, {"type", "amplitude", "start", "width"});
        return TimeSignal(signals::Pulse{num("amplitude", 1.0), num("start", 0.0), num("width", 0.0)});
      }
      if (type == "sinusoid") {
        only_keys(v, path, {"type", "amplitude", "omega", "phase", "offset"});
        return TimeSignal::sinusoid(num("amplitude", 1.0), num("omega", 1.0), num("phase", 0.0), num("offset", 0.0));
      }
      if (type == "noise") {
        only_keys(v, path, {"type", "amplitude", "hold", "seed"});
        return TimeSignal::noise(num("amplitude", 0.0), num("hold", 1e-3), seed());
      }
      if (type == "smooth_random") {
        only_keys(v, path, {"type", "amplitude", "max_omega", "modes", "seed"});
        signals::SmoothRandom r;
        r.amplitude = num("amplitude", 1.0);
        r.max_omega = num("max_omega", 1.0);
        r.modes = static_cast<int>(num("modes", 8));
        r.seed = seed();
        return TimeSignal(r);
      }
      if (type == "samples") {
        only_keys(v, path, {"type", "dt", "values"});
        signals::Samples s;
        s.dt = num("dt", 1.0);
        if (!v.contains("values") || !v.at("values").is_array()) fail(join(path, "values"), "expected an array");
        for (std::size_t i = 0; i < v.at("values").size(); ++i)
          s.values.push_back(number(v.at("values")[i], join(path, "values") + "[" + std::to_string(i) + "]"));
        return TimeSignal(s);
      }
    } catch (const ParameterError& e) {
      fail(path, e.what());
    }
    fail(join(path, "type"), "unknown signal type '" + type + "'");
  }

  const nlohmann::json& root() const { return root_; }

 private:
  const nlohmann::json& root_;
  const Document* doc_;
};

inline ControlMode parse_mode(const Reader& r, const nlohmann::json& v, const std::string& path) {
  const std::string m = r.string(v, path);
  if (m == "open_loop") return ControlMode::open_loop;
  if (m == "state_feedback") return ControlMode::state_feedback;
  if (m == "output_feedback") return ControlMode::output_feedback;
  if (m == "observer_only") return ControlMode::observer_only;
  r.fail(path, "unknown mode '" + m + "'");
}

}  // namespace detail

inline const char* to_string(ControlMode m) {
  switch (m) {
    case ControlMode::open_loop:
      return "open_loop";
    case ControlMode::state_feedback:
      return "state_feedback";
    case ControlMode::output_feedback:
      return "output_feedback";
    default:
      return "observer_only";
  }
}

/// Builds a scenario from parsed data; `doc` (optional) supplies line numbers.
inline ScenarioFile parse_scenario(const nlohmann::json& j, const Document* doc = nullptr) {
  const detail::Reader r(j, doc);
  r.only_keys(j, "", {"schema_version", "name", "grid", "plant", "disturbances", "control", "sim", "initial", "output",
                      "checks"});
  if (!j.contains("schema_version")) r.fail("schema_version", "required");
  if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != kSchemaVersion)
    r.fail("schema_version", "unsupported version (expected " + std::to_string(kSchemaVersion) + ")");

  if (!j.contains("grid")) r.fail("grid", "required table");
  const auto& jg = j.at("grid");
  r.only_keys(jg, "grid", {"n_cells"});
  if (!jg.contains("n_cells") || !jg.at("n_cells").is_number_integer() || jg.at("n_cells").get<long long>() < 2)
    r.fail("grid.n_cells", "expected an integer >= 2");
  const SpatialGrid g(jg.at("n_cells").get<std::size_t>());

  if (!j.contains("plant")) r.fail("plant", "required table");
  const auto& jp = j.at("plant");
  r.only_keys(jp, "plant", {"lambda", "mu", "gamma1", "gamma2", "q", "rho"});
  for (const char* k : {"lambda", "mu", "q", "rho"})
    if (!jp.contains(k)) r.fail(std::string("plant.") + k, "required");
  auto coef = [&](const char* k, double dflt) {
    return jp.contains(k) ? r.coefficient(jp.at(k), std::string("plant.") + k, g) : g.constant(dflt);
  };
  SystemParams p{g,   coef("lambda", 1.0), coef("mu", 1.0), coef("gamma1", 0.0), coef("gamma2", 0.0),
                 r.number(jp.at("q"), "plant.q"), r.number(jp.at("rho"), "plant.rho")};
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(p.lambda[i] > 0.0)) r.fail("plant.lambda", "must be positive on [0, 1]");
    if (!(p.mu[i] > 0.0)) r.fail("plant.mu", "must be positive on [0, 1]");
  }

  ScenarioFile out{Scenario(p), {}, {}, 0.0, j};
  auto& sc = out.scenario;
  if (j.contains("name")) sc.name = r.string(j.at("name"), "name");

  sc.dist.m1 = g.constant(1.0);
  sc.dist.m2 = g.constant(1.0);
  if (j.contains("disturbances")) {
    const auto& jd = j.at("disturbances");
    r.only_keys(jd, "disturbances", {"d1", "d2", "d3", "d4", "n", "m1", "m2"});
    auto sig = [&](const char* k, TimeSignal& dst) {
      if (jd.contains(k)) dst = r.signal(jd.at(k), std::string("disturbances.") + k);
    };
    sig("d1", sc.dist.d1);
    sig("d2", sc.dist.d2);
    sig("d3", sc.dist.d3);
    sig("d4", sc.dist.d4);
    sig("n", sc.dist.n);
    if (jd.contains("m1")) sc.dist.m1 = r.coefficient(jd.at("m1"), "disturbances.m1", g);
    if (jd.contains("m2")) sc.dist.m2 = r.coefficient(jd.at("m2"), "disturbances.m2", g);
    try {
      sc.dist.validate(g);
    } catch (const ParameterError& e) {
      r.fail("disturbances", e.what());
    }
  }

  if (j.contains("control")) {
    const auto& jc = j.at("control");
    r.only_keys(jc, "control", {"mode", "rho_tilde", "k_I", "margin", "epsilon"});
    if (jc.contains("mode")) sc.control.mode = detail::parse_mode(r, jc.at("mode"), "control.mode");
    sc.control.rho_tilde = r.number_or(jc, "rho_tilde", "control", 0.0);
    sc.control.k_I = r.number_or_auto(jc, "k_I", "control");
    sc.control.margin = r.number_or(jc, "margin", "control", 0.5);
    if (!(sc.control.margin > 0.0 && sc.control.margin < 1.0)) r.fail("control.margin", "must lie in (0, 1)");
    sc.control.epsilon = r.number_or_auto(jc, "epsilon", "control");
    if (sc.control.epsilon && !(*sc.control.epsilon >= 0.0 && *sc.control.epsilon <= 1.0))
      r.fail("control.epsilon", "must lie in [0, 1]");
  }

  out.tau = build_transport_maps(p).tau;
  if (j.contains("sim")) {
    const auto& js = j.at("sim");
    r.only_keys(js, "sim", {"horizon", "horizon_tau", "dt", "scheme"});
    if (js.contains("horizon") && js.contains("horizon_tau")) r.fail("sim", "give horizon or horizon_tau, not both");
    if (js.contains("horizon")) sc.sim.horizon = r.number(js.at("horizon"), "sim.horizon");
    if (js.contains("horizon_tau")) sc.sim.horizon = out.tau * r.number(js.at("horizon_tau"), "sim.horizon_tau");
    if (!(sc.sim.horizon > 0.0)) r.fail("sim.horizon", "must be positive");
    if (auto dt = r.number_or_auto(js, "dt", "sim")) {
      if (!(*dt > 0.0)) r.fail("sim.dt", "must be positive");
      sc.sim.dt = *dt;
    }
    if (js.contains("scheme")) {
      const auto s = r.string(js.at("scheme"), "sim.scheme");
      if (s == "upwind") sc.sim.scheme = Scheme::upwind;
      else if (s == "characteristics") sc.sim.scheme = Scheme::characteristics;
      else r.fail("sim.scheme", "expected \"upwind\" or \"characteristics\"");
    }
  } else {
    sc.sim.horizon = 20.0 * out.tau;
  }

  if (j.contains("initial")) {
    const auto& ji = j.at("initial");
    r.only_keys(ji, "initial", {"u", "v", "uhat", "vhat", "eta"});
    auto prof = [&](const char* k, Profile& dst) {
      if (ji.contains(k)) dst = r.coefficient(ji.at(k), std::string("initial.") + k, g);
    };
    prof("u", sc.u0);
    prof("v", sc.v0);
    prof("uhat", sc.uhat0);
    prof("vhat", sc.vhat0);
    sc.eta0 = r.number_or(ji, "eta", "initial", 0.0);
  }

  if (j.contains("output")) {
    const auto& jo = j.at("output");
    r.only_keys(jo, "output", {"plots", "kernels", "trace_stride"});
    auto flag = [&](const char* k, bool& dst) {
      if (!jo.contains(k)) return;
      if (!jo.at(k).is_boolean()) r.fail(std::string("output.") + k, "expected true or false");
      dst = jo.at(k).get<bool>();
    };
    flag("plots", out.output.plots);
    flag("kernels", out.output.kernels);
    if (jo.contains("trace_stride")) {
      const auto& s = jo.at("trace_stride");
      if (!s.is_number_integer() || s.get<long long>() < 1) r.fail("output.trace_stride", "expected an integer >= 1");
      out.output.trace_stride = s.get<int>();
    }
  }

  if (j.contains("checks")) {
    const auto& jk = j.at("checks");
    if (!jk.is_array()) r.fail("checks", "expected an array of tables");
    for (std::size_t i = 0; i < jk.size(); ++i) {
      const std::string path = "checks[" + std::to_string(i) + "]";
      const auto& c = jk[i];
      r.only_keys(c, path, {"type", "threshold", "window_tau", "early_tau", "late_tau", "factor", "series"});
      Check ck;
      if (!c.contains("type")) r.fail(path + ".type", "required");
      ck.type = r.string(c.at("type"), path + ".type");
      if (c.contains("series")) {
        ck.series = r.string(c.at("series"), path + ".series");
        if (ck.series != "y" && ck.series != "norm" && ck.series != "obs_err" && ck.series != "U")
          r.fail(path + ".series", "expected y, U, norm or obs_err");
      }
      if (ck.type == "final_abs_y_below") {
        if (!c.contains("threshold")) r.fail(path + ".threshold", "required");
        ck.threshold = r.number(c.at("threshold"), path + ".threshold");
      } else if (ck.type == "sup_abs_y_below") {
        if (!c.contains("threshold") || !c.contains("window_tau")) r.fail(path, "needs threshold and window_tau");
        ck.threshold = r.number(c.at("threshold"), path + ".threshold");
        ck.window_tau = r.interval(c.at("window_tau"), path + ".window_tau");
      } else if (ck.type == "no_growth") {
        if (!c.contains("early_tau") || !c.contains("late_tau")) r.fail(path, "needs early_tau and late_tau");
        ck.early_tau = r.interval(c.at("early_tau"), path + ".early_tau");
        ck.late_tau = r.interval(c.at("late_tau"), path + ".late_tau");
        ck.factor = r.number_or(c, "factor", path, 1.05);
      } else if (ck.type != "finite") {
        r.fail(path + ".type", "unknown check '" + ck.type + "'");
      }
      out.checks.push_back(ck);
    }
  }
  return out;
}

inline ScenarioFile load_scenario(const std::string& path) {
  const auto doc = load_document(path);
  return parse_scenario(doc.data, &doc);
}

// ---------------------------------------------------------------------------
// Check evaluation.

inline const std::vector<double>& trace_series(const TraceLog& tr, const std::string& name) {
  if (name == "U") return tr.U;
  if (name == "norm") return tr.norm_Eprime;
  if (name == "obs_err") return tr.obs_err;
  return tr.y;
}

inline std::vector<CheckResult> evaluate_checks(const std::vector<Check>& checks, const TraceLog& tr, double tau) {
  std::vector<CheckResult> out;
  const bool diverged = tr.diverged_at.has_value();
  for (const auto& c : checks) {
    CheckResult r{c.type, false, 0.0, c.threshold, {}};
    const auto& s = trace_series(tr, c.series);
    if (c.type == "finite") {
      bool finite = !diverged;
      for (double v : s) finite = finite && std::isfinite(v);
      r.pass = finite;
      r.value = s.empty() ? 0.0 : sup_over(tr, s, tr.t.front(), tr.t.back());
      r.threshold = std::nan("");
      r.detail = "sup over the run";
    } else if (diverged) {
      r.detail = "run diverged";
    } else if (c.type == "final_abs_y_below") {
      r.value = std::abs(s.back());
      r.pass = r.value < c.threshold;
      r.detail = "at t = " + std::to_string(tr.t.back());
    } else if (c.type == "sup_abs_y_below") {
      r.value = sup_over(tr, s, c.window_tau->first * tau, c.window_tau->second * tau);
      r.pass = r.value < c.threshold;
    } else if (c.type == "no_growth") {
      const double early = sup_over(tr, s, c.early_tau->first * tau, c.early_tau->second * tau);
      const double late = sup_over(tr, s, c.late_tau->first * tau, c.late_tau->second * tau);
      r.value = early > 0.0 ? late / early : (late > 0.0 ? INFINITY : 0.0);
      r.threshold = c.factor;
      r.pass = late <= c.factor * early;
      r.detail = "early sup " + std::to_string(early) + ", late sup " + std::to_string(late);
    }
    out.push_back(r);
  }
  return out;
}

/// Ratio of sup over the last tau-window to the one before: of the observer
/// error in observer_only mode, of the regulated output otherwise.
inline double growth_ratio(const TraceLog& tr, ControlMode mode, double tau) {
  const auto& s = mode == ControlMode::observer_only ? tr.obs_err : tr.y;
  if (tr.t.size() < 2 || tr.t.back() < 2.0 * tau) return std::nan("");
  return window_ratio(tr.t, s, tau);
}

}  // namespace hypreg::io

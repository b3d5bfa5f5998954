// hypreg: command-line front end.
//   simulate <file>          run one scenario
//   gain [flags | file]      integral gain and delay margin
//   kernels <file> [--check] dump (and check) the backstepping kernels
//   nde [flags | file]       delay equation report, roots and trace
//   sweep <file>             parameter sweep over a scenario template
// Exit codes: 0 ok, 1 checks failed, 2 schema or usage error, 3 divergence,
// 4 infeasible configuration.

#include <cmath>
#include <complex>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hypreg/io/runner.hpp"

namespace {

using hypreg::io::fs::path;
using nlohmann::json;
namespace io = hypreg::io;

void emit(const json& j, const std::optional<path>& out, const char* file) {
  std::cout << j.dump(2) << "\n";
  if (out) io::atomic_write(*out / file, j.dump(2) + "\n");
}

int cmd_simulate(const std::string& file, const path& out) {
  const auto sf = io::load_scenario(file);
  const auto r = io::run_scenario(sf, out);
  json brief{{"name", r.summary.value("name", "")}, {"exit_code", r.exit_code}, {"all_pass", r.summary["all_pass"]}};
  if (r.summary.contains("run")) brief["run"] = r.summary["run"];
  if (r.summary.contains("checks")) brief["checks"] = r.summary["checks"];
  if (r.summary.contains("error")) brief["error"] = r.summary["error"];
  std::cout << brief.dump(2) << "\n";
  return r.exit_code;
}

struct GainArgs {
  std::optional<double> q, rho, rho_tilde, tau, margin, boundary_factor;
};

int cmd_gain(const std::optional<std::string>& file, const GainArgs& a, const std::optional<path>& out) {
  double q = 0, rho = 0, rt = 0, tau = 0, margin = 0.5, bf = 1.0;
  json j;
  if (file) {
    // Plant-derived tau and boundary factor.
    const auto sf = io::load_scenario(*file);
    const auto& p = sf.scenario.params;
    const auto k = hypreg::solve_control_kernels(p);
    const auto w = hypreg::solve_integral_weights(hypreg::solve_inverse_kernels(k, p.grid), p);
    q = p.q;
    rho = p.rho;
    rt = sf.scenario.control.rho_tilde;
    tau = sf.tau;
    margin = sf.scenario.control.margin;
    bf = w.boundary_factor;
    j["source"] = *file;
  } else {
    if (!a.q || !a.rho || !a.tau) throw io::SchemaError("give a scenario file or --q, --rho and --tau");
    q = *a.q;
    rho = *a.rho;
    tau = *a.tau;
  }
  if (a.rho_tilde) rt = *a.rho_tilde;
  if (a.margin) margin = *a.margin;
  if (a.boundary_factor) bf = *a.boundary_factor;
  j.update({{"q", q}, {"rho", rho}, {"rho_tilde", rt}, {"tau", tau}, {"margin", margin}, {"boundary_factor", bf}});

  const double pc = std::abs(rho * q) + std::abs(rt * q);
  const double k1 = (rho - rt) * q;
  json feas{{"q_nonzero", q != 0.0},
            {"rho_q_below_one", rho * q < 1.0},
            {"partial_cancellation", pc < 1.0},
            {"partial_cancellation_value", pc},
            {"abs_k1_below_one", std::abs(k1) < 1.0},
            {"boundary_factor_nonzero", std::abs(bf) >= hypreg::kBoundaryFactorThreshold}};
  j["feasibility"] = feas;
  j["k1"] = k1;
  bool ok = true;
  for (const auto& [key, v] : feas.items())
    if (v.is_boolean()) ok = ok && v.get<bool>();
  if (!(margin > 0.0 && margin < 1.0) || !(tau > 0.0)) {
    j["error"] = "margin must lie in (0, 1) and tau must be positive";
    ok = false;
  }
  if (!ok) {
    j["feasible"] = false;
    emit(j, out, "gain.json");
    return io::kInfeasible;
  }
  const auto sel = hypreg::select_kI(k1, q, bf, tau, margin, true);
  j["feasible"] = true;
  j["k_I"] = sel.k_I;
  j["k2"] = sel.gains.k2;
  j["tau0"] = sel.report.tau0;
  j["tau0_oracle"] = hypreg::tau0_oracle(k1, sel.gains.k2);
  j["omega_star"] = sel.report.omega_star;
  j["stable"] = sel.report.stable;
  j["s0_estimate"] = io::jnum(sel.report.s0_estimate);
  emit(j, out, "gain.json");
  return io::kOk;
}

double max_diff_coarse(const hypreg::TriangularField& a, const hypreg::TriangularField& fine) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if (a.contains(i, j)) m = std::max(m, std::abs(a(i, j) - fine(2 * i, 2 * j)));
  return m;
}

int cmd_kernels(const std::string& file, bool check, const std::optional<path>& out) {
  const auto sf = io::load_scenario(file);
  const auto& p = sf.scenario.params;
  const auto& g = p.grid;
  const auto k = hypreg::solve_control_kernels(p);
  const auto l = hypreg::solve_inverse_kernels(k, g);
  const auto w = hypreg::solve_integral_weights(l, p);
  json j{{"n_cells", g.size() - 1},
         {"h", g.h()},
         {"iterations", k.stats.iterations},
         {"final_update", k.stats.updates.empty() ? 0.0 : k.stats.updates.back()},
         {"boundary_factor", w.boundary_factor},
         {"sup", {{"Kuu", k.Kuu.sup_norm()}, {"Kuv", k.Kuv.sup_norm()}, {"Kvu", k.Kvu.sup_norm()}, {"Kvv", k.Kvv.sup_norm()}}}};
  if (out) {
    hypreg::Design d;
    d.k = k;
    d.l = l;
    d.w = w;
    io::write_kernels(*out / "kernels", d, p);
  }
  int code = io::kOk;
  if (check) {
    const double tol = 5.0 * g.h();
    json c;
    const auto u = g.sample([](double x) { return x + std::sin(std::numbers::pi * x); });
    const auto v = g.sample([](double x) { return std::cos(0.5 * std::numbers::pi * x); });
    const auto back = hypreg::apply_inverse(hypreg::apply_transform({u, v}, k), l);
    double rt = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      rt = std::max({rt, std::abs(back.first[i] - u[i]), std::abs(back.second[i] - v[i])});
    c["round_trip"] = {{"error", rt}, {"tolerance", tol}, {"pass", rt <= tol}};

    json refined = sf.source;
    refined["grid"]["n_cells"] = 2 * (g.size() - 1);
    try {
      const auto sf2 = io::parse_scenario(refined);
      const auto k2 = hypreg::solve_control_kernels(sf2.scenario.params);
      const double diff = std::max({max_diff_coarse(k.Kuu, k2.Kuu), max_diff_coarse(k.Kuv, k2.Kuv),
                                    max_diff_coarse(k.Kvu, k2.Kvu), max_diff_coarse(k.Kvv, k2.Kvv)});
      c["refinement"] = {{"difference", diff}, {"tolerance", tol}, {"pass", diff <= tol}};
    } catch (const io::SchemaError& e) {
      // Nodal-array coefficients cannot be resampled.
      c["refinement"] = {{"skipped", e.what()}, {"pass", true}};
    }
    const bool bf_ok = std::abs(w.boundary_factor) >= hypreg::kBoundaryFactorThreshold;
    c["boundary_factor"] = {{"value", w.boundary_factor}, {"pass", bf_ok}};
    const bool pass = c["round_trip"]["pass"].get<bool>() && c["refinement"]["pass"].get<bool>() && bf_ok;
    c["pass"] = pass;
    j["check"] = c;
    if (!bf_ok) code = io::kInfeasible;
    else if (!pass) code = io::kChecksFailed;
  }
  emit(j, out, "kernels.json");
  return code;
}

struct NdeArgs {
  std::optional<double> k1, k2, tau, horizon_tau, dt, history;
  bool trace = false;
};

int cmd_nde(const std::optional<std::string>& file, NdeArgs a, const std::optional<path>& out) {
  if (file) {
    const auto doc = io::load_document(*file);
    const auto& d = doc.data;
    for (auto it = d.begin(); it != d.end(); ++it) {
      static const std::set<std::string> keys{"schema_version", "k1", "k2", "tau", "horizon_tau", "dt", "history", "trace"};
      if (!keys.count(it.key())) throw io::SchemaError("unknown key", it.key(), doc.line_of(it.key()));
    }
    auto get = [&](const char* key, std::optional<double>& dst) {
      if (!d.contains(key) || dst) return;
      if (!d.at(key).is_number()) throw io::SchemaError("expected a number", key, doc.line_of(key));
      dst = d.at(key).get<double>();
    };
    get("k1", a.k1);
    get("k2", a.k2);
    get("tau", a.tau);
    get("horizon_tau", a.horizon_tau);
    get("dt", a.dt);
    get("history", a.history);
    if (d.contains("trace") && d.at("trace").is_boolean()) a.trace = a.trace || d.at("trace").get<bool>();
  }
  if (!a.k1 || !a.k2 || !a.tau) throw io::SchemaError("k1, k2 and tau are required");
  if (!(*a.tau > 0.0)) throw io::SchemaError("must be positive", "tau");
  const hypreg::FeedbackGains g{*a.k1, *a.k2, *a.tau};
  json j{{"k1", g.k1}, {"k2", g.k2}, {"tau", g.tau}};
  const auto rep = hypreg::analyze_stability(g, g.k2 != 0.0);
  j["stable"] = rep.stable;
  j["tau0"] = io::jnum(rep.tau0);
  j["omega_star"] = rep.omega_star;
  j["note"] = rep.note;
  if (std::abs(g.k1) < 1.0 && g.k2 < 0.0) j["tau0_oracle"] = hypreg::tau0_oracle(g.k1, g.k2);
  j["s0_estimate"] = io::jnum(rep.s0_estimate);
  j["root_count"] = rep.roots.size();

  const double horizon = a.horizon_tau.value_or(20.0) * g.tau;
  const double dt = a.dt.value_or(g.tau / 200.0);
  const double h0 = a.history.value_or(1.0);
  const auto tr = hypreg::simulate_nde(
      g, [](double) { return 0.0; }, [h0](double) { return h0; }, [](double) { return 0.0; }, horizon, dt);
  const double ratio = hypreg::window_ratio(tr.t, tr.z, g.tau);
  j["simulation"] = {{"horizon", horizon},
                     {"dt", tr.dt},
                     {"history", h0},
                     {"final_abs_z", std::abs(tr.z.back())},
                     {"growth_ratio", io::jnum(ratio)},
                     {"classification", hypreg::to_string(hypreg::classify_growth(ratio))}};
  if (out) {
    std::ostringstream roots;
    roots << "re,im\n";
    for (const auto& s : rep.roots) roots << io::num(s.real()) << ',' << io::num(s.imag()) << '\n';
    io::atomic_write(*out / "roots.csv", roots.str());
    if (a.trace) {
      std::ostringstream os;
      os << "t,z,zdot\n";
      for (std::size_t i = 0; i < tr.t.size(); ++i)
        os << io::num(tr.t[i]) << ',' << io::num(tr.z[i]) << ',' << io::num(tr.zdot[i]) << '\n';
      io::atomic_write(*out / "nde_trace.csv", os.str());
    }
  }
  emit(j, out, "nde.json");
  return io::kOk;
}

int cmd_sweep(const std::string& file, const path& out, std::optional<unsigned> workers) {
  const auto doc = io::load_document(file);
  const auto spec = io::parse_sweep(doc, path(file));
  const auto r = io::run_sweep(spec, out, workers.value_or(io::sweep_workers()));
  json brief{{"name", spec.name},
             {"points", r.aggregate["points"].size()},
             {"classification_counts", r.aggregate["classification_counts"]},
             {"all_pass", r.aggregate["all_pass"]},
             {"exit_code", r.exit_code}};
  std::cout << brief.dump(2) << "\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary regulation of 2x2 hyperbolic systems: design, simulation and sweeps"};
  app.require_subcommand(1);

  std::string sim_file, sim_out = "out";
  auto* sim = app.add_subcommand("simulate", "Run one scenario");
  sim->add_option("file", sim_file, "Scenario file (TOML or JSON)")->required();
  sim->add_option("--out", sim_out, "Output directory")->capture_default_str();

  std::optional<std::string> gain_file;
  GainArgs ga;
  std::optional<std::string> gain_out;
  auto* gain = app.add_subcommand("gain", "Integral gain for a target delay margin");
  gain->add_option("file", gain_file, "Scenario file; tau and the boundary factor come from the plant");
  gain->add_option("--q", ga.q, "Reflection at x = 0");
  gain->add_option("--rho", ga.rho, "Reflection at x = 1");
  gain->add_option("--rho-tilde", ga.rho_tilde, "Partial cancellation gain");
  gain->add_option("--tau", ga.tau, "Round-trip delay");
  gain->add_option("--margin", ga.margin, "tau / tau0 target in (0, 1), default 0.5");
  gain->add_option("--boundary-factor", ga.boundary_factor, "1 + l1(1) lambda(1), default 1");
  gain->add_option("--out", gain_out, "Also write gain.json here");

  std::string ker_file;
  bool ker_check = false;
  std::optional<std::string> ker_out;
  auto* ker = app.add_subcommand("kernels", "Solve and export the kernels");
  ker->add_option("file", ker_file, "Scenario file")->required();
  ker->add_flag("--check", ker_check, "Round-trip, refinement and boundary-factor checks");
  ker->add_option("--out", ker_out, "Output directory for kernels/*.csv and kernels.json");

  std::optional<std::string> nde_file, nde_out;
  NdeArgs na;
  auto* nde = app.add_subcommand("nde", "Delay equation: stability report, roots and trace");
  nde->add_option("file", nde_file, "Parameter file with k1, k2, tau");
  nde->add_option("--k1", na.k1, "Neutral coefficient");
  nde->add_option("--k2", na.k2, "Retarded coefficient");
  nde->add_option("--tau", na.tau, "Delay");
  nde->add_option("--horizon-tau", na.horizon_tau, "Simulation horizon in delays, default 20");
  nde->add_option("--dt", na.dt, "Time step, default tau / 200");
  nde->add_option("--history", na.history, "Constant initial history, default 1");
  nde->add_flag("--trace", na.trace, "Write nde_trace.csv");
  nde->add_option("--out", nde_out, "Output directory");

  std::string sw_file, sw_out = "sweep-out";
  std::optional<unsigned> sw_workers;
  auto* sw = app.add_subcommand("sweep", "Parameter sweep");
  sw->add_option("file", sw_file, "Sweep file")->required();
  sw->add_option("--out", sw_out, "Output directory")->capture_default_str();
  sw->add_option("--workers", sw_workers, "Worker threads (default: HYPREG_WORKERS or all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : io::kSchemaError;
  }

  auto opt_path = [](const std::optional<std::string>& s) -> std::optional<path> {
    return s ? std::optional<path>(path(*s)) : std::nullopt;
  };
  try {
    if (*sim) return cmd_simulate(sim_file, sim_out);
    if (*gain) return cmd_gain(gain_file, ga, opt_path(gain_out));
    if (*ker) return cmd_kernels(ker_file, ker_check, opt_path(ker_out));
    if (*nde) return cmd_nde(nde_file, na, opt_path(nde_out));
    if (*sw) return cmd_sweep(sw_file, sw_out, sw_workers);
  } catch (const io::SchemaError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io::kSchemaError;
  } catch (const hypreg::ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io::kSchemaError;
  } catch (const hypreg::ConfigurationError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return io::kInfeasible;
  } catch (const hypreg::DomainError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return io::kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io::kSchemaError;
  }
  return io::kSchemaError;
}

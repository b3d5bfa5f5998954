#pragma once

// Scenario and sweep execution behind the command-line tool.
// Exit codes: 0 ok, 1 checks failed, 2 schema or usage error, 3 divergence,
// 4 infeasible configuration.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hypreg/closed_loop.hpp"
#include "hypreg/io/output.hpp"
#include "hypreg/io/scenario.hpp"

namespace hypreg::io {

enum ExitCode : int { kOk = 0, kChecksFailed = 1, kSchemaError = 2, kDiverged = 3, kInfeasible = 4 };

struct ScenarioOutcome {
  int exit_code = kOk;
  nlohmann::json summary;
  TraceLog trace;
};

/// Designs and runs one scenario. Writes trace.csv, summary.json and (when
/// enabled) plots.svg and kernels/ into `out` unless it is empty.
inline ScenarioOutcome run_scenario(const ScenarioFile& sf, const fs::path& out) {
  ScenarioOutcome res;
  const auto& sc = sf.scenario;
  auto& s = res.summary;
  s["schema_version"] = kSchemaVersion;
  s["name"] = sc.name;
  s["mode"] = to_string(sc.control.mode);

  Design d;
  try {
    d = build_design(sc.params, sc.control);
  } catch (const ConfigurationError& e) {
    s["error"] = e.what();
    s["all_pass"] = false;
    res.exit_code = kInfeasible;
    if (!out.empty()) atomic_write(out / "summary.json", s.dump(2) + "\n");
    return res;
  }
  s["design"] = design_json(d, sc.control.mode);

  const double dt = sc.sim.dt > 0.0 ? sc.sim.dt : auto_time_step(sc.params);
  RunOptions opt;
  opt.keep_partial_on_divergence = true;
  try {
    res.trace = run_closed_loop(sc, d, opt).trace;
  } catch (const ConfigurationError& e) {
    s["error"] = e.what();
    s["all_pass"] = false;
    res.exit_code = kInfeasible;
    if (!out.empty()) atomic_write(out / "summary.json", s.dump(2) + "\n");
    return res;
  }
  const auto& tr = res.trace;
  s["run"] = run_json(tr, dt, sf.tau, sc.control.mode);
  const auto checks = evaluate_checks(sf.checks, tr, sf.tau);
  s["checks"] = checks_json(checks);
  s["all_pass"] = all_pass(checks) && !tr.diverged_at;
  res.exit_code = tr.diverged_at ? kDiverged : (all_pass(checks) ? kOk : kChecksFailed);
  s["exit_code"] = res.exit_code;

  if (!out.empty()) {
    atomic_write(out / "trace.csv", trace_csv(tr, sf.output.trace_stride));
    if (sf.output.plots) atomic_write(out / "plots.svg", trace_svg(tr, sc.control.mode, sc.name));
    if (sf.output.kernels) write_kernels(out / "kernels", d, sc.params);
    atomic_write(out / "summary.json", s.dump(2) + "\n");
  }
  return res;
}

// ---------------------------------------------------------------------------
// Sweeps.
//
//   schema_version = 1
//   name = "epsilon"
//   template = "base.toml"          # relative to the sweep file; or an inline [base] table
//   require_all_pass = false
//   [[axis]]
//   path = "control.epsilon"
//   values = [0.3, 0.5]             # or range = {start = 0.3, stop = 0.7, count = 9}
//   [[axis]]
//   paths = ["grid.n_cells", "sim.dt"]   # joint axis: each value is a tuple
//   values = [[100, 0.01], [200, 0.005]]
//
// Points are the Cartesian product of the axes; an empty axis list runs the
// base scenario once.

struct Axis {
  std::vector<std::string> paths;
  std::vector<std::vector<nlohmann::json>> values;  // values[k][p] for point k, path p
};

struct SweepSpec {
  std::string name = "sweep";
  nlohmann::json base;
  std::vector<Axis> axes;
  bool require_all_pass = false;
};

/// Sets a dotted path, creating intermediate tables.
inline void set_path(nlohmann::json& j, const std::string& path, const nlohmann::json& v) {
  nlohmann::json* cur = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw SchemaError("empty segment in path '" + path + "'");
    if (!cur->is_object()) throw SchemaError("'" + path + "' crosses a non-table value");
    if (dot == std::string::npos) {
      (*cur)[key] = v;
      return;
    }
    auto& next = (*cur)[key];
    if (next.is_null()) next = nlohmann::json::object();
    cur = &next;
    start = dot + 1;
  }
}

inline SweepSpec parse_sweep(const Document& doc, const fs::path& sweep_file) {
  const auto& j = doc.data;
  auto fail = [&](const std::string& field, const std::string& msg) -> void {
    throw SchemaError(msg, field, doc.line_of(field));
  };
  static const std::set<std::string> keys{"schema_version", "name", "template", "base", "axis", "require_all_pass"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) fail(it.key(), "unknown key");
  if (!j.contains("schema_version") || j.at("schema_version") != kSchemaVersion)
    fail("schema_version", "unsupported or missing version (expected 1)");
  SweepSpec s;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) fail("name", "expected a string");
    s.name = j.at("name").get<std::string>();
  }
  if (j.contains("template") == j.contains("base")) fail("template", "give exactly one of template or [base]");
  if (j.contains("template")) {
    if (!j.at("template").is_string()) fail("template", "expected a path string");
    fs::path t = j.at("template").get<std::string>();
    if (t.is_relative()) t = sweep_file.parent_path() / t;
    s.base = load_document(t.string()).data;
  } else {
    s.base = j.at("base");
    if (!s.base.is_object()) fail("base", "expected a table");
  }
  if (j.contains("require_all_pass")) {
    if (!j.at("require_all_pass").is_boolean()) fail("require_all_pass", "expected true or false");
    s.require_all_pass = j.at("require_all_pass").get<bool>();
  }
  if (j.contains("axis")) {
    const auto& axes = j.at("axis");
    if (!axes.is_array()) fail("axis", "expected [[axis]] tables");
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const std::string at = "axis[" + std::to_string(a) + "]";
      const auto& ax = axes[a];
      for (auto it = ax.begin(); it != ax.end(); ++it)
        if (it.key() != "path" && it.key() != "paths" && it.key() != "values" && it.key() != "range")
          fail(at + "." + it.key(), "unknown key");
      Axis out;
      if (ax.contains("path") == ax.contains("paths")) fail(at, "give exactly one of path or paths");
      const bool joint = ax.contains("paths");
      if (joint) {
        if (!ax.at("paths").is_array() || ax.at("paths").empty()) fail(at + ".paths", "expected a non-empty array");
        for (const auto& p : ax.at("paths")) {
          if (!p.is_string()) fail(at + ".paths", "expected strings");
          out.paths.push_back(p.get<std::string>());
        }
      } else {
        if (!ax.at("path").is_string()) fail(at + ".path", "expected a string");
        out.paths.push_back(ax.at("path").get<std::string>());
      }
      if (ax.contains("values") == ax.contains("range")) fail(at, "give exactly one of values or range");
      if (ax.contains("range")) {
        if (joint) fail(at + ".range", "range is only for single-path axes");
        const auto& r = ax.at("range");
        if (!r.is_object() || !r.contains("start") || !r.contains("stop") || !r.contains("count") ||
            !r.at("start").is_number() || !r.at("stop").is_number() || !r.at("count").is_number_integer() ||
            r.at("count").get<int>() < 1)
          fail(at + ".range", "expected {start, stop, count >= 1}");
        const double a0 = r.at("start").get<double>(), a1 = r.at("stop").get<double>();
        const int n = r.at("count").get<int>();
        for (int k = 0; k < n; ++k) out.values.push_back({n == 1 ? a0 : a0 + (a1 - a0) * k / (n - 1)});
      } else {
        const auto& vals = ax.at("values");
        if (!vals.is_array() || vals.empty()) fail(at + ".values", "expected a non-empty array");
        for (const auto& v : vals) {
          if (joint) {
            if (!v.is_array() || v.size() != out.paths.size())
              fail(at + ".values", "each value must be an array of " + std::to_string(out.paths.size()));
            out.values.emplace_back(v.begin(), v.end());
          } else {
            out.values.push_back({v});
          }
        }
      }
      s.axes.push_back(std::move(out));
    }
  }
  return s;
}

struct SweepPoint {
  std::size_t index = 0;
  nlohmann::json overrides = nlohmann::json::object();  // path -> value
  nlohmann::json scenario;
};

inline std::vector<SweepPoint> expand_sweep(const SweepSpec& s) {
  std::size_t total = 1;
  for (const auto& a : s.axes) total *= a.values.size();
  std::vector<SweepPoint> pts(total);
  for (std::size_t k = 0; k < total; ++k) {
    auto& p = pts[k];
    p.index = k;
    p.scenario = s.base;
    std::size_t rem = k;
    // Last axis varies fastest.
    std::vector<std::size_t> pick(s.axes.size());
    for (std::size_t a = s.axes.size(); a-- > 0;) {
      pick[a] = rem % s.axes[a].values.size();
      rem /= s.axes[a].values.size();
    }
    for (std::size_t a = 0; a < s.axes.size(); ++a)
      for (std::size_t q = 0; q < s.axes[a].paths.size(); ++q) {
        const auto& v = s.axes[a].values[pick[a]][q];
        set_path(p.scenario, s.axes[a].paths[q], v);
        p.overrides[s.axes[a].paths[q]] = v;
      }
  }
  return pts;
}

inline unsigned sweep_workers() {
  if (const char* w = std::getenv("HYPREG_WORKERS")) {
    const int n = std::atoi(w);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

struct SweepResult {
  int exit_code = kOk;
  nlohmann::json aggregate;
};

inline std::string point_dir(std::size_t k) {
  std::ostringstream os;
  os << std::setw(4) << std::setfill('0') << k;
  return os.str();
}

inline SweepResult run_sweep(const SweepSpec& spec, const fs::path& out, unsigned workers = sweep_workers()) {
  const auto pts = expand_sweep(spec);
  std::vector<nlohmann::json> rows(pts.size());
  std::vector<int> codes(pts.size(), kOk);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k; (k = next.fetch_add(1)) < pts.size();) {
      const auto& p = pts[k];
      const fs::path dir = out.empty() ? fs::path{} : out / "points" / point_dir(k);
      nlohmann::json row{{"index", k}, {"overrides", p.overrides}};
      try {
        if (!dir.empty()) atomic_write(dir / "scenario.json", p.scenario.dump(2) + "\n");
        const auto sf = parse_scenario(p.scenario);
        const auto r = run_scenario(sf, dir);
        codes[k] = r.exit_code;
        row["exit_code"] = r.exit_code;
        row["all_pass"] = r.summary.value("all_pass", false);
        if (r.summary.contains("run")) {
          const auto& run = r.summary.at("run");
          row["growth_ratio"] = run.value("growth_ratio", nlohmann::json(nullptr));
          row["classification"] = run.value("classification", "inconclusive");
          row["final_abs_y"] = run.value("final_abs_y", nlohmann::json(nullptr));
          row["diverged_at"] = run.value("diverged_at", nlohmann::json(nullptr));
        }
        if (r.summary.contains("error")) row["error"] = r.summary.at("error");
      } catch (const Error& e) {
        codes[k] = kSchemaError;
        row["exit_code"] = kSchemaError;
        row["all_pass"] = false;
        row["error"] = e.what();
      }
      rows[k] = std::move(row);
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(pts.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i + 1 < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  SweepResult res;
  auto& agg = res.aggregate;
  agg["name"] = spec.name;
  agg["points"] = rows;
  std::map<std::string, int> classes;
  bool every = true;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    every = every && codes[k] == kOk;
    classes[rows[k].value("classification", "n/a")]++;
  }
  agg["classification_counts"] = classes;
  agg["all_pass"] = every;
  if (spec.require_all_pass && !every) res.exit_code = kChecksFailed;

  if (!out.empty()) {
    std::ostringstream csv;
    std::vector<std::string> cols;
    for (const auto& a : spec.axes) cols.insert(cols.end(), a.paths.begin(), a.paths.end());
    csv << "index";
    for (const auto& c : cols) csv << ',' << c;
    csv << ",exit_code,all_pass,growth_ratio,classification,final_abs_y,diverged_at\n";
    auto cell = [](const nlohmann::json& v) -> std::string {
      if (v.is_null()) return "";
      if (v.is_number()) return num(v.get<double>());
      if (v.is_string()) return v.get<std::string>();
      return v.dump();
    };
    for (const auto& r : rows) {
      csv << r.at("index").get<std::size_t>();
      for (const auto& c : cols) csv << ',' << cell(r.at("overrides").at(c));
      csv << ',' << r.at("exit_code").get<int>() << ',' << (r.at("all_pass").get<bool>() ? "true" : "false") << ','
          << cell(r.value("growth_ratio", nlohmann::json(nullptr))) << ','
          << r.value("classification", std::string("n/a")) << ','
          << cell(r.value("final_abs_y", nlohmann::json(nullptr))) << ','
          << cell(r.value("diverged_at", nlohmann::json(nullptr))) << '\n';
    }
    atomic_write(out / "sweep.csv", csv.str());
    atomic_write(out / "sweep.json", agg.dump(2) + "\n");
  }
  return res;
}

}  // namespace hypreg::io

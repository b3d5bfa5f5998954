#pragma once

// Result writers: trace CSV, summary JSON, SVG plots and kernel dumps. Every
// file is written to a temporary sibling and renamed into place.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypreg/closed_loop.hpp"
#include "hypreg/io/scenario.hpp"

namespace hypreg::io {

namespace fs = std::filesystem;

inline void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

/// Shortest round-trip representation.
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// JSON has no inf/nan; they are written as null.
inline nlohmann::json jnum(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline std::string trace_csv(const TraceLog& tr, int stride = 1) {
  std::ostringstream os;
  os << "t,y,y_m,U,eta,norm_E,obs_err,obs_err_target,alpha_bar_1,input\n";
  const auto step = static_cast<std::size_t>(std::max(stride, 1));
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (i % step != 0 && i + 1 != tr.size()) continue;
    os << num(tr.t[i]) << ',' << num(tr.y[i]) << ',' << num(tr.y_m[i]) << ',' << num(tr.U[i]) << ','
       << num(tr.eta[i]) << ',' << num(tr.norm_Eprime[i]) << ',' << num(tr.obs_err[i]) << ','
       << num(tr.obs_err_target[i]) << ',' << num(tr.alpha_bar_1[i]) << ',' << num(tr.input[i]) << '\n';
  }
  return os.str();
}

inline nlohmann::json design_json(const Design& d, ControlMode mode) {
  nlohmann::json v;
  v["mode"] = to_string(mode);
  v["k_I"] = d.config.k_I;
  v["rho_tilde"] = d.config.rho_tilde;
  v["epsilon"] = d.config.epsilon;
  v["epsilon_interval"] = {{"lower", d.eps_interval.lower},
                           {"lower_open", d.eps_interval.lower_open},
                           {"upper", d.eps_interval.upper}};
  v["boundary_factor"] = d.w.boundary_factor;
  v["tau"] = d.maps.tau;
  v["k1"] = d.gains.k1;
  v["k2"] = d.gains.k2;
  v["stability"] = {{"stable", d.report.stable},
                    {"tau0", jnum(d.report.tau0)},
                    {"omega_star", d.report.omega_star},
                    {"s0_estimate", jnum(d.report.s0_estimate)},
                    {"margin", jnum(d.report.margin)},
                    {"note", d.report.note}};
  v["kernel_iterations"] = d.k.stats.iterations;
  return v;
}

inline nlohmann::json run_json(const TraceLog& tr, double dt, double tau, ControlMode mode) {
  nlohmann::json v;
  v["dt"] = dt;
  v["steps"] = tr.size() == 0 ? 0 : tr.size() - 1;
  v["t_end"] = tr.size() ? tr.t.back() : 0.0;
  v["diverged_at"] = tr.diverged_at ? nlohmann::json(*tr.diverged_at) : nlohmann::json(nullptr);
  if (tr.size()) {
    const double end = tr.t.back();
    v["final_abs_y"] = jnum(std::abs(tr.y.back()));
    v["sup_abs_y"] = jnum(sup_over(tr, tr.y, 0.0, end));
    v["sup_abs_y_last_tau"] = jnum(sup_over(tr, tr.y, end - tau, end));
    v["sup_abs_U"] = jnum(sup_over(tr, tr.U, 0.0, end));
    v["final_norm_E"] = jnum(tr.norm_Eprime.back());
    v["final_obs_err"] = jnum(tr.obs_err.back());
    const double g = growth_ratio(tr, mode, tau);
    v["growth_ratio"] = jnum(g);
    v["classification"] = std::isnan(g) ? "inconclusive" : to_string(classify_growth(g));
  }
  return v;
}

inline nlohmann::json checks_json(const std::vector<CheckResult>& rs) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rs)
    arr.push_back({{"type", r.type}, {"pass", r.pass}, {"value", jnum(r.value)}, {"threshold", jnum(r.threshold)},
                   {"detail", r.detail}});
  return arr;
}

inline bool all_pass(const std::vector<CheckResult>& rs) {
  for (const auto& r : rs)
    if (!r.pass) return false;
  return true;
}

// ---------------------------------------------------------------------------
// SVG: stacked panels sharing the time axis.

struct Series {
  std::string label;
  const std::vector<double>* values;
  bool log_scale = false;
};

inline std::string plot_svg(const std::vector<double>& t, const std::vector<Series>& panels, const std::string& title) {
  const double W = 900, H = 220, left = 80, right = 20, top = 30, gap = 30;
  const double total = top + panels.size() * (H + gap);
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << total
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"18\" font-size=\"14\">" << title << "</text>\n";
  if (t.empty()) {
    os << "</svg>\n";
    return os.str();
  }
  const double t0 = t.front(), t1 = std::max(t.back(), t0 + 1e-12);
  // At most ~2000 points per polyline.
  const std::size_t stride = std::max<std::size_t>(1, t.size() / 2000);
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto& s = panels[k];
    const auto& v = *s.values;
    const double y0 = top + k * (H + gap);
    auto tr = [&](double x) { return s.log_scale ? std::log10(std::max(std::abs(x), 1e-300)) : x; };
    double lo = INFINITY, hi = -INFINITY;
    for (double x : v)
      if (std::isfinite(x)) {
        lo = std::min(lo, tr(x));
        hi = std::max(hi, tr(x));
      }
    if (!std::isfinite(lo)) lo = hi = 0.0;
    if (s.log_scale) lo = std::max(lo, hi - 16.0);
    if (hi - lo < 1e-300) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pw = W - left - right;
    os << "<rect x=\"" << left << "\" y=\"" << y0 << "\" width=\"" << pw << "\" height=\"" << H
       << "\" fill=\"none\" stroke=\"#999\"/>\n";
    os << "<text x=\"" << left + 6 << "\" y=\"" << y0 + 14 << "\">" << s.label << (s.log_scale ? " (log10 |.|)" : "")
       << "</text>\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", hi);
    os << "<text x=\"" << left - 6 << "\" y=\"" << y0 + 10 << "\" text-anchor=\"end\">" << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", lo);
    os << "<text x=\"" << left - 6 << "\" y=\"" << y0 + H << "\" text-anchor=\"end\">" << buf << "</text>\n";
    if (k + 1 == panels.size()) {
      std::snprintf(buf, sizeof buf, "%.3g", t0);
      os << "<text x=\"" << left << "\" y=\"" << y0 + H + 16 << "\">" << buf << "</text>\n";
      std::snprintf(buf, sizeof buf, "t = %.3g", t1);
      os << "<text x=\"" << W - right << "\" y=\"" << y0 + H + 16 << "\" text-anchor=\"end\">" << buf << "</text>\n";
    }
    if (!s.log_scale && lo < 0.0 && hi > 0.0) {
      const double yz = y0 + H * (hi / (hi - lo));
      os << "<line x1=\"" << left << "\" x2=\"" << W - right << "\" y1=\"" << yz << "\" y2=\"" << yz
         << "\" stroke=\"#ddd\"/>\n";
    }
    os << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < v.size(); i += stride) {
      if (!std::isfinite(v[i])) continue;
      const double px = left + pw * (t[i] - t0) / (t1 - t0);
      const double py = y0 + H * (hi - std::clamp(tr(v[i]), lo, hi)) / (hi - lo);
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px, py);
      os << buf;
    }
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline std::string trace_svg(const TraceLog& tr, ControlMode mode, const std::string& title) {
  std::vector<Series> panels{{"y = u(1)", &tr.y}, {"U", &tr.U}, {"||(u, v)||", &tr.norm_Eprime, true}};
  if (mode == ControlMode::output_feedback || mode == ControlMode::observer_only)
    panels.push_back({"observer error", &tr.obs_err, true});
  return plot_svg(tr.t, panels, title);
}

// ---------------------------------------------------------------------------
// Kernels as long-format CSV: i, j, x, xi, value for the stored triangle.

inline std::string field_csv(const TriangularField& f, const SpatialGrid& g) {
  std::ostringstream os;
  os << "i,j,x,xi,value\n";
  for (std::size_t i = 0; i < f.size(); ++i)
    for (std::size_t j = 0; j < f.size(); ++j)
      if (f.contains(i, j))
        os << i << ',' << j << ',' << num(g.node(i)) << ',' << num(g.node(j)) << ',' << num(f(i, j)) << '\n';
  return os.str();
}

inline std::string profiles_csv(const SpatialGrid& g, const std::vector<std::pair<std::string, const Profile*>>& cols) {
  std::ostringstream os;
  os << "x";
  for (const auto& c : cols) os << ',' << c.first;
  os << '\n';
  for (std::size_t i = 0; i < g.size(); ++i) {
    os << num(g.node(i));
    for (const auto& c : cols) os << ',' << num((*c.second)[i]);
    os << '\n';
  }
  return os.str();
}

inline void write_kernels(const fs::path& dir, const Design& d, const SystemParams& p) {
  const auto& g = p.grid;
  atomic_write(dir / "Kuu.csv", field_csv(d.k.Kuu, g));
  atomic_write(dir / "Kuv.csv", field_csv(d.k.Kuv, g));
  atomic_write(dir / "Kvu.csv", field_csv(d.k.Kvu, g));
  atomic_write(dir / "Kvv.csv", field_csv(d.k.Kvv, g));
  atomic_write(dir / "Laa.csv", field_csv(d.l.Laa, g));
  atomic_write(dir / "Lab.csv", field_csv(d.l.Lab, g));
  atomic_write(dir / "Lba.csv", field_csv(d.l.Lba, g));
  atomic_write(dir / "Lbb.csv", field_csv(d.l.Lbb, g));
  atomic_write(dir / "weights.csv", profiles_csv(g, {{"l1", &d.w.l1}, {"l2", &d.w.l2}}));
  if (d.observer) {
    atomic_write(dir / "Puu.csv", field_csv(d.observer->Puu, g));
    atomic_write(dir / "Puv.csv", field_csv(d.observer->Puv, g));
    atomic_write(dir / "Pvu.csv", field_csv(d.observer->Pvu, g));
    atomic_write(dir / "Pvv.csv", field_csv(d.observer->Pvv, g));
    atomic_write(dir / "observer_gains.csv",
                 profiles_csv(g, {{"p_plus", &d.observer->p_plus}, {"p_minus", &d.observer->p_minus}}));
  }
}

}  // namespace hypreg::io

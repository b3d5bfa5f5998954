#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hypreg/error.hpp"
#include "hypreg/grid.hpp"

namespace hypreg {

/// Coefficients of the 2x2 plant
///   u_t + lambda u_x = gamma1 v,  v_t - mu v_x = gamma2 u,
///   u(t,0) = q v(t,0),            v(t,1) = rho u(t,1) + U(t),
/// sampled on a shared grid.
struct SystemParams {
  SpatialGrid grid;
  Profile lambda, mu, gamma1, gamma2;
  double q = 1.0;
  double rho = 0.0;

  template <typename L, typename M, typename G1, typename G2>
  static SystemParams from_functions(const SpatialGrid& grid, L&& lambda, M&& mu, G1&& gamma1, G2&& gamma2, double q,
                                     double rho) {
    return SystemParams{grid, grid.sample(lambda), grid.sample(mu), grid.sample(gamma1), grid.sample(gamma2), q, rho};
  }

  static SystemParams constant(const SpatialGrid& grid, double lambda, double mu, double gamma1, double gamma2,
                               double q, double rho) {
    return SystemParams{grid,       grid.constant(lambda), grid.constant(mu), grid.constant(gamma1),
                        grid.constant(gamma2), q,          rho};
  }

  double lambda_min() const { return *std::min_element(lambda.begin(), lambda.end()); }
  double mu_min() const { return *std::min_element(mu.begin(), mu.end()); }
  double speed_max() const {
    return std::max(*std::max_element(lambda.begin(), lambda.end()), *std::max_element(mu.begin(), mu.end()));
  }

  /// True when lambda and mu are the same constant at every node.
  bool constant_speeds() const {
    auto flat = [](const Profile& p) {
      return std::all_of(p.begin(), p.end(), [&](double v) { return v == p.front(); });
    };
    return flat(lambda) && flat(mu);
  }
};

struct ControlConfig {
  double rho_tilde = 0.0;
  double k_I = 0.0;
  double epsilon = 1.0;
};

/// One named condition of a configuration check.
struct ValidationCheck {
  std::string name;
  bool passed = true;
  double value = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }

  std::string summary() const {
    std::ostringstream os;
    for (const auto& c : checks)
      if (!c.passed) os << c.name << ": " << c.detail << " (value " << c.value << "); ";
    return os.str();
  }
};

/// Checks the structural assumptions on the plant and on the controller
/// parameters. Report-style: never throws.
inline ValidationReport validate_configuration(const SystemParams& p, const ControlConfig& c) {
  ValidationReport r;
  const std::size_t n = p.grid.size();
  auto sized = [n](const Profile& f) { return f.size() == n; };
  const bool shapes = sized(p.lambda) && sized(p.mu) && sized(p.gamma1) && sized(p.gamma2);
  r.checks.push_back({"grid", shapes, static_cast<double>(n), shapes ? "" : "coefficient not sampled on grid"});
  if (!shapes) return r;

  auto positivity = [&](const char* name, const Profile& f) {
    std::size_t bad = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!(f[i] > 0.0) || !std::isfinite(f[i])) {
        bad = i;
        break;
      }
    std::ostringstream os;
    if (bad < n) os << name << "(" << p.grid.node(bad) << ") must be > 0";
    r.checks.push_back({std::string(name) + "_positive", bad == n, bad < n ? f[bad] : 0.0, os.str()});
  };
  positivity("lambda", p.lambda);
  positivity("mu", p.mu);

  r.checks.push_back({"q_nonzero", p.q != 0.0, p.q, "distal reflection q must be nonzero"});
  const double rq = p.rho * p.q;
  r.checks.push_back({"rho_q_below_one", rq < 1.0, rq, "rho*q must be < 1"});
  const double s = std::abs(p.rho * p.q) + std::abs(c.rho_tilde * p.q);
  r.checks.push_back({"partial_cancellation", s < 1.0, s, "|rho q| + |rho_tilde q| must be < 1"});
  const bool eps_ok = c.epsilon >= 0.0 && c.epsilon <= 1.0;
  r.checks.push_back({"epsilon_range", eps_ok, c.epsilon, "epsilon must lie in [0, 1]"});
  return r;
}

/// Cumulative travel times phi1(x) = int_0^x 1/lambda, phi2(x) = int_0^x 1/mu.
struct TransportMaps {
  Profile phi1, phi2;
  double tau1 = 0.0, tau2 = 0.0, tau = 0.0;

  /// Travel time of u from xi to 1: int_xi^1 1/lambda.
  double u_time_to_end(std::size_t i) const { return tau1 - phi1[i]; }
};

inline TransportMaps build_transport_maps(const SystemParams& p) {
  const auto& g = p.grid;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(p.lambda[i] > 0.0) || !(p.mu[i] > 0.0))
      throw ParameterError("build_transport_maps: non-positive speed at x = " + std::to_string(g.node(i)));
  Profile inv_l(g.size()), inv_m(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    inv_l[i] = 1.0 / p.lambda[i];
    inv_m[i] = 1.0 / p.mu[i];
  }
  TransportMaps m;
  m.phi1 = cumulative_trapezoid(inv_l, g.h());
  m.phi2 = cumulative_trapezoid(inv_m, g.h());
  m.tau1 = m.phi1.back();
  m.tau2 = m.phi2.back();
  m.tau = m.tau1 + m.tau2;
  return m;
}

/// ||(u, v)||_{E'}: sup over nodes of max(|u|, |v|).
inline double norm_Eprime(std::span<const double> u, std::span<const double> v) {
  return std::max(sup_norm(u), sup_norm(v));
}

/// ||(u, v, eta)||_E = ||(u, v)||_{E'} + |eta|.
inline double norm_E(std::span<const double> u, std::span<const double> v, double eta) {
  return norm_Eprime(u, v) + std::abs(eta);
}

}  // namespace hypreg

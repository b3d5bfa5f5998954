#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hypreg/error.hpp"
#include "hypreg/kernels.hpp"
#include "hypreg/model.hpp"
#include "hypreg/plant.hpp"

namespace hypreg {

struct ObserverState {
  Profile uhat, vhat;
  double t = 0.0;
};

/// Transport and output injection over dt, plus uhat(0) = q vhat(0).
/// `y_now` drives the sources; vhat(1) is left for `close_observer_boundary`.
inline ObserverState advance_observer_interior(const ObserverState& s, double y_now, const ObserverKernelSet& ok,
                                               const SystemParams& p, double dt, Scheme scheme = Scheme::upwind) {
  check_cfl(p, dt);
  const std::size_t n = p.grid.size();
  const double h = p.grid.h();
  if (ok.p_plus.size() != n) throw ConfigurationError("step_observer: observer gains not computed");
  const double innov = s.uhat.back() - y_now;
  Profile su(n), sv(n);
  for (std::size_t i = 0; i < n; ++i) {
    su[i] = p.gamma1[i] * s.vhat[i] - ok.p_plus[i] * innov;
    sv[i] = p.gamma2[i] * s.uhat[i] - ok.p_minus[i] * innov;
  }
  ObserverState next{Profile(n), Profile(n), s.t + dt};
  detail::transport_step(next.uhat, s.uhat, su, p.lambda, dt, h, +1, scheme);
  detail::transport_step(next.vhat, s.vhat, sv, p.mu, dt, h, -1, scheme);
  next.uhat[0] = p.q * next.vhat[0];
  next.vhat[n - 1] = 0.0;
  return next;
}

/// The part of vhat(1) that does not depend on U: rho (1-eps) uhat(1) + rho eps y_m.
inline double observer_boundary_offset(const ObserverState& s, double y_m, const ObserverKernelSet& ok,
                                       const SystemParams& p) {
  return p.rho * (1.0 - ok.epsilon) * s.uhat.back() + p.rho * ok.epsilon * y_m;
}

inline void close_observer_boundary(ObserverState& s, double y_m, double U, const ObserverKernelSet& ok,
                                    const SystemParams& p, double last_valid) {
  s.vhat.back() = observer_boundary_offset(s, y_m, ok, p) + U;
  detail::require_finite(s.uhat, s.vhat, last_valid, "step_observer");
}

/// Advances the observer
///   uhat_t + lambda uhat_x = gamma1 vhat - P+ (uhat(1) - y_m),
///   vhat_t - mu vhat_x     = gamma2 uhat - P- (uhat(1) - y_m),
///   uhat(0) = q vhat(0),  vhat(1) = rho (1-eps) uhat(1) + rho eps y_m + U.
/// `y_now` drives the sources; `y_next` (at t + dt) enters the boundary.
inline ObserverState step_observer(const ObserverState& s, double y_now, double y_next, double U,
                                   const ObserverKernelSet& ok, const SystemParams& p, double dt,
                                   Scheme scheme = Scheme::upwind) {
  auto next = advance_observer_interior(s, y_now, ok, p, dt, scheme);
  close_observer_boundary(next, y_next, U, ok, p, s.t);
  return next;
}

/// Admissible blend parameters: 1 - 1/|rho q| < eps <= 1, intersected with [0, 1].
struct EpsilonInterval {
  double lower = 0.0;
  bool lower_open = false;
  double upper = 1.0;

  bool contains(double e) const { return e <= upper && (lower_open ? e > lower : e >= lower); }
  double midpoint() const { return 0.5 * (lower + upper); }
};

inline EpsilonInterval epsilon_interval(const SystemParams& p) {
  const double rq = std::abs(p.rho * p.q);
  if (rq == 0.0) return {0.0, false, 1.0};
  const double lo = 1.0 - 1.0 / rq;
  if (lo < 0.0) return {0.0, false, 1.0};
  return {lo, true, 1.0};
}

/// Profiles f1..f4, g1..g4 of the disturbed observer target system
///   alpha~_t + lambda alpha~_x = n f1 + d1 f2 + d2 f3 + d4 f4,
///   beta~_t  - mu beta~_x      = n g1 + d1 g2 + d2 g3 + d4 g4.
struct ErrorForcingProfiles {
  Profile f1, f2, f3, f4, g1, g2, g3, g4;
  int iterations = 0;
  double update = 0.0;
};

namespace detail {
/// out(x) = int_x^1 (A(x,xi) a(xi) + B(x,xi) b(xi)) dxi by the trapezoid rule.
inline Profile upper_integral(const TriangularField& A, const Profile& a, const TriangularField& B, const Profile& b) {
  const std::size_t n = a.size(), last = n - 1;
  const double h = A.h();
  Profile out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = i; j <= last; ++j) {
      const double wt = triangle_weight(Triangle::upper, i, j, last, h);
      s += wt * (A(i, j) * a[j] + B(i, j) * b[j]);
    }
    out[i] = s;
  }
  return out;
}
}  // namespace detail

/// Joint successive approximation of the eight second-kind Volterra equations.
inline ErrorForcingProfiles error_forcing_profiles(const ObserverKernelSet& ok, const SystemParams& p, const Profile& m1,
                                                   const Profile& m2, double tol = 1e-10, int max_iter = 500) {
  const std::size_t n = p.grid.size(), last = p.grid.last();
  if (ok.p_plus.size() != n) throw ConfigurationError("error_forcing_profiles: observer gains not computed");
  const double eps = ok.epsilon;
  const double mu1 = p.mu[last];
  // Free terms.
  std::array<Profile, 4> fa, ga;
  for (auto& x : fa) x.assign(n, 0.0);
  for (auto& x : ga) x.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    fa[0][i] = -ok.p_plus[i] - mu1 * p.rho * eps * ok.Puv(i, last);
    ga[0][i] = -ok.p_minus[i] - mu1 * p.rho * eps * ok.Pvv(i, last);
    fa[1][i] = m1[i];
    ga[2][i] = m2[i];
    fa[3][i] = mu1 * ok.Puv(i, last);
    ga[3][i] = mu1 * ok.Pvv(i, last);
  }
  std::array<Profile, 4> f = fa, g = ga;
  ErrorForcingProfiles out;
  for (int it = 1; it <= max_iter; ++it) {
    double upd = 0.0;
    std::array<Profile, 4> fn, gn;
    for (std::size_t k = 0; k < 4; ++k) {
      fn[k] = detail::upper_integral(ok.Puu, f[k], ok.Puv, g[k]);
      gn[k] = detail::upper_integral(ok.Pvu, f[k], ok.Pvv, g[k]);
      for (std::size_t i = 0; i < n; ++i) {
        fn[k][i] += fa[k][i];
        gn[k][i] += ga[k][i];
      }
      upd = std::max({upd, max_abs_diff(fn[k], f[k]), max_abs_diff(gn[k], g[k])});
    }
    f = std::move(fn);
    g = std::move(gn);
    out.iterations = it;
    out.update = upd;
    if (upd < tol) {
      out.f1 = f[0], out.f2 = f[1], out.f3 = f[2], out.f4 = f[3];
      out.g1 = g[0], out.g2 = g[1], out.g3 = g[2], out.g4 = g[3];
      return out;
    }
    if (!std::isfinite(upd)) break;
  }
  throw SolverError("error_forcing_profiles: no contraction", {out.update});
}

struct ISSConstants {
  double C = 0.0;
  double nu = std::numeric_limits<double>::infinity();
  double gain_h2_slope = 0.0;
  double contraction = 0.0;  // |q rho (1 - eps)|
  double tau = 0.0;

  double h1(double x0, double t) const {
    if (std::isinf(nu)) return t <= tau ? C * x0 : 0.0;
    return C * std::exp(-nu * t) * x0;
  }
  double h2(double input_sup) const { return gain_h2_slope * input_sup; }
};

inline ISSConstants iss_constants(const SystemParams& p, double epsilon, const TransportMaps& maps) {
  const double r = std::abs(p.rho * (1.0 - epsilon));
  const double k = std::abs(p.q) * r;
  if (!(k < 1.0))
    throw ConfigurationError("iss_constants: |q rho (1 - eps)| = " + std::to_string(k) + " is not below 1");
  ISSConstants c;
  c.tau = maps.tau;
  c.contraction = k;
  c.C = 2.0 + std::abs(p.q) + r;
  c.nu = k == 0.0 ? std::numeric_limits<double>::infinity() : std::log(1.0 / k) / maps.tau;
  const double il = 1.0 / p.lambda_min(), im = 1.0 / p.mu_min();
  const double tau = maps.tau;
  c.gain_h2_slope = 2.0 * c.C / (1.0 - k) * (tau + il + im + 2.0) + 2.0 + std::abs(p.q) * tau + r * tau +
                    (2.0 * tau + il + im);
  return c;
}

struct EnvelopeResult {
  bool pass = true;
  double worst_margin = std::numeric_limits<double>::infinity();  // min of bound - error
  double worst_time = 0.0;
  std::size_t violations = 0;
};

/// Checks error(t) <= h1(initial, t) + h2(sup_{[0,t]} inputs) at every sample.
inline EnvelopeResult iss_envelope_check(const std::vector<double>& t, const std::vector<double>& error,
                                         const std::vector<double>& input_magnitude, double initial,
                                         const ISSConstants& c) {
  EnvelopeResult r;
  double running = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    running = std::max(running, input_magnitude[i]);
    const double bound = c.h1(initial, t[i]) + c.h2(running);
    const double margin = bound - error[i];
    if (margin < r.worst_margin) {
      r.worst_margin = margin;
      r.worst_time = t[i];
    }
    if (margin < 0.0) {
      r.pass = false;
      ++r.violations;
    }
  }
  return r;
}

/// The ideal error system: the observer driven by y_m = 0 and U = 0.
/// Returns the sup norm of the state at each step (index 0 = initial).
inline std::vector<double> simulate_ideal_error(const ObserverState& initial, const ObserverKernelSet& ok,
                                                const SystemParams& p, double horizon, double dt) {
  ObserverState s = initial;
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  std::vector<double> norms{norm_Eprime(s.uhat, s.vhat)};
  norms.reserve(steps + 1);
  for (std::size_t k = 0; k < steps; ++k) {
    s = step_observer(s, 0.0, 0.0, 0.0, ok, p, dt);
    norms.push_back(norm_Eprime(s.uhat, s.vhat));
  }
  return norms;
}

}  // namespace hypreg

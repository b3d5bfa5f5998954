#pragma once

#include <cmath>
#include <string>

#include "hypreg/error.hpp"
#include "hypreg/grid.hpp"
#include "hypreg/model.hpp"
#include "hypreg/signal.hpp"

namespace hypreg {

struct FieldState {
  Profile u, v;
  double t = 0.0;

  static FieldState zero(const SpatialGrid& g) { return {g.constant(0.0), g.constant(0.0), 0.0}; }
};

enum class Scheme { upwind, characteristics };

struct SimConfig {
  double dt = 0.0;  // 0 selects the largest step with CFL <= 1
  double horizon = 1.0;
  Scheme scheme = Scheme::upwind;
};

inline double cfl_number(const SystemParams& p, double dt) { return dt * p.speed_max() / p.grid.h(); }

inline double auto_time_step(const SystemParams& p) { return p.grid.h() / p.speed_max(); }

inline void check_cfl(const SystemParams& p, double dt) {
  if (!(dt > 0.0)) throw ConfigurationError("time step must be positive");
  const double c = cfl_number(p, dt);
  if (c > 1.0 + 1e-12) throw ConfigurationError("CFL condition violated: dt*max(lambda,mu)/h = " + std::to_string(c));
}

namespace detail {

/// One transport step for a rightward (dir = +1) or leftward (dir = -1)
/// field w with source s and speed a, over the interior nodes. The
/// characteristics scheme also takes the source at the foot.
inline void transport_step(Profile& out, const Profile& w, const Profile& s, const Profile& a, double dt, double h,
                           int dir, Scheme scheme) {
  const std::size_t n = w.size();
  if (dir > 0) {
    for (std::size_t i = 1; i < n; ++i) {
      const double c = a[i] * dt / h;
      const double src = scheme == Scheme::upwind ? s[i] : (1.0 - c) * s[i] + c * s[i - 1];
      out[i] = (1.0 - c) * w[i] + c * w[i - 1] + dt * src;
    }
  } else {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double c = a[i] * dt / h;
      const double src = scheme == Scheme::upwind ? s[i] : (1.0 - c) * s[i] + c * s[i + 1];
      out[i] = (1.0 - c) * w[i] + c * w[i + 1] + dt * src;
    }
  }
}

inline void require_finite(const Profile& u, const Profile& v, double last_valid, const char* who) {
  if (!all_finite(u) || !all_finite(v))
    throw DivergenceError(std::string(who) + ": non-finite field values", last_valid);
}

}  // namespace detail

/// Transport and sources over dt, plus the unactuated boundary
/// u(0) = q v(0) + d3 at t + dt. v(1) is left for `close_plant_boundary`.
inline FieldState advance_plant_interior(const FieldState& s, const SystemParams& p, const DisturbanceSet& d, double dt,
                                         Scheme scheme = Scheme::upwind) {
  check_cfl(p, dt);
  if (scheme == Scheme::characteristics && !p.constant_speeds())
    throw ConfigurationError("characteristics scheme needs constant speeds");
  const std::size_t n = p.grid.size();
  const double h = p.grid.h();
  const double d1 = d.d1(s.t), d2 = d.d2(s.t);
  Profile su(n), sv(n);
  for (std::size_t i = 0; i < n; ++i) {
    su[i] = p.gamma1[i] * s.v[i] + d1 * d.m1[i];
    sv[i] = p.gamma2[i] * s.u[i] + d2 * d.m2[i];
  }
  FieldState next{Profile(n), Profile(n), s.t + dt};
  detail::transport_step(next.u, s.u, su, p.lambda, dt, h, +1, scheme);
  detail::transport_step(next.v, s.v, sv, p.mu, dt, h, -1, scheme);
  next.u[0] = p.q * next.v[0] + d.d3(next.t);
  next.v[n - 1] = 0.0;
  return next;
}

/// v(1) = rho u(1) + U + d4 at the state's time.
inline void close_plant_boundary(FieldState& s, const SystemParams& p, const DisturbanceSet& d, double U,
                                 double last_valid) {
  s.v.back() = p.rho * s.u.back() + U + d.d4(s.t);
  detail::require_finite(s.u, s.v, last_valid, "step_plant");
}

/// Advances the plant by dt:
///   u_t + lambda u_x = gamma1 v + d1 m1,  v_t - mu v_x = gamma2 u + d2 m2,
/// sources at time t, then u(0) = q v(0) + d3, v(1) = rho u(1) + U + d4 at t + dt.
inline FieldState step_plant(const FieldState& s, const SystemParams& p, const DisturbanceSet& d, double U, double dt,
                             Scheme scheme = Scheme::upwind) {
  auto next = advance_plant_interior(s, p, d, dt, scheme);
  close_plant_boundary(next, p, d, U, s.t);
  return next;
}

/// y_m(t) = u(t, 1) + n(t)
inline double measure(const FieldState& s, const TimeSignal& noise, double t) { return s.u.back() + noise(t); }

}  // namespace hypreg

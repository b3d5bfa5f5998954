#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hypreg/control.hpp"
#include "hypreg/kernels.hpp"
#include "hypreg/model.hpp"
#include "hypreg/nde.hpp"
#include "hypreg/observer.hpp"
#include "hypreg/plant.hpp"
#include "hypreg/steady.hpp"

namespace hypreg {

struct ControlSpec {
  ControlMode mode = ControlMode::state_feedback;
  double rho_tilde = 0.0;
  std::optional<double> k_I;       // nullopt: chosen by select_kI with `margin`
  double margin = 0.5;
  std::optional<double> epsilon;   // nullopt: midpoint of the admissible interval
};

struct Scenario {
  explicit Scenario(SystemParams p) : params(std::move(p)), dist(DisturbanceSet::none(params.grid)) {}

  std::string name = "scenario";
  SystemParams params;
  DisturbanceSet dist;
  ControlSpec control;
  SimConfig sim;
  Profile u0, v0;  // empty: zero
  double eta0 = 0.0;
  Profile uhat0, vhat0;  // empty: zero
};

/// Everything precomputed from the plant and the controller settings.
struct Design {
  KernelSet k;
  InverseKernelSet l;
  IntegralWeights w;
  TransportMaps maps;
  ControlConfig config;
  FeedbackGains gains;
  StabilityReport report;
  std::optional<ObserverKernelSet> observer;
  EpsilonInterval eps_interval;
  LinearFunctional law;
};

inline Design build_design(const SystemParams& p, const ControlSpec& spec, bool scan_roots = true) {
  Design d;
  d.k = solve_control_kernels(p);
  d.l = solve_inverse_kernels(d.k, p.grid);
  d.w = solve_integral_weights(d.l, p);
  d.maps = build_transport_maps(p);
  d.config.rho_tilde = spec.rho_tilde;
  d.eps_interval = epsilon_interval(p);
  d.config.epsilon = spec.epsilon.value_or(d.eps_interval.midpoint());
  const bool passive = spec.mode == ControlMode::open_loop || spec.mode == ControlMode::observer_only;
  if (passive) {
    d.config.k_I = 0.0;
  } else if (spec.k_I) {
    d.config.k_I = *spec.k_I;
  } else {
    d.config.k_I = select_kI(p, d.w, d.maps, spec.rho_tilde, spec.margin, false).k_I;
  }
  const auto report = validate_configuration(p, d.config);
  if (!passive && !report.ok()) throw ConfigurationError(report.summary());
  d.gains = effective_gains(p, d.config, d.w, d.maps);
  if (!passive) d.report = analyze_stability(d.gains, scan_roots);
  if (spec.mode == ControlMode::output_feedback) {
    if (!d.eps_interval.contains(d.config.epsilon))
      throw ConfigurationError("epsilon outside the admissible interval");
    d.observer = observer_gains(solve_observer_kernels(p), p, d.config.epsilon);
    d.law = compile_output_feedback(d.k, d.w, p, d.config);
  } else if (spec.mode == ControlMode::state_feedback) {
    d.law = compile_state_feedback(d.k, d.l, d.w, p, d.config);
  } else if (spec.mode == ControlMode::observer_only) {
    // Any epsilon may be simulated here; admissibility is what is being probed.
    d.observer = observer_gains(solve_observer_kernels(p), p, d.config.epsilon);
    d.law = {p.grid.constant(0.0), p.grid.constant(0.0), 0.0};
  } else {
    d.law = {p.grid.constant(0.0), p.grid.constant(0.0), 0.0};
  }
  return d;
}

/// One row per time step.
struct TraceLog {
  std::vector<double> t, y, y_m, U, eta, norm_Eprime, obs_err, obs_err_target, alpha_bar_1, input;
  std::optional<double> diverged_at;

  std::size_t size() const { return t.size(); }
};

struct RunResult {
  TraceLog trace;
  FieldState final_state;
  std::optional<ObserverState> final_observer;
};

/// Per-step hook: (plant state, observer state or null, control value).
using StepHook = std::function<void(const FieldState&, const ObserverState*, double)>;

struct RunOptions {
  bool log_alpha_bar = true;
  bool log_target_error = false;
  bool keep_partial_on_divergence = false;  // return the trace up to divergence instead of throwing
  StepHook hook;
};

namespace detail {
/// U depends on the actuated boundary value through the last weight of the
/// law, so the boundary condition is solved for it: with b = offset + U and
/// U = rest + w b, b = (offset + rest) / (1 - w).
inline double solve_boundary_control(double offset, double rest, double w) {
  const double den = 1.0 - w;
  if (std::abs(den) < 1e-12) throw ConfigurationError("control law is singular at the actuated boundary");
  return (offset + rest) / den - offset;
}
}  // namespace detail

/// Per step: advance plant and observer interiors, read y_m^{n+1}, update
/// eta by the trapezoid rule, then solve U^{n+1} together with the actuated
/// boundary values so the law acts on the state at the same time level.
inline RunResult run_closed_loop(const Scenario& sc, const Design& d, const RunOptions& opt = {}) {
  const auto& p = sc.params;
  const auto& g = p.grid;
  sc.dist.validate(g);
  const double dt = sc.sim.dt > 0.0 ? sc.sim.dt : auto_time_step(p);
  check_cfl(p, dt);
  const auto steps = static_cast<std::size_t>(std::llround(sc.sim.horizon / dt));
  const ControlMode mode = sc.control.mode;
  const bool with_observer = mode == ControlMode::output_feedback || mode == ControlMode::observer_only;
  const bool feedback = mode == ControlMode::state_feedback || mode == ControlMode::output_feedback;
  const double kI = d.config.k_I;

  FieldState x{sc.u0.empty() ? g.constant(0.0) : sc.u0, sc.v0.empty() ? g.constant(0.0) : sc.v0, 0.0};
  std::optional<ObserverState> xh;
  if (with_observer)
    xh = ObserverState{sc.uhat0.empty() ? g.constant(0.0) : sc.uhat0, sc.vhat0.empty() ? g.constant(0.0) : sc.vhat0,
                       0.0};
  std::optional<SteadyModel> steady;
  if (opt.log_alpha_bar && !sc.dist.disturbance_free())
    steady.emplace(p, d.k, d.l, d.w, d.config, sc.dist.m1, sc.dist.m2);

  RunResult res;
  auto& tr = res.trace;
  const std::size_t rows = steps + 1;
  for (auto* v : {&tr.t, &tr.y, &tr.y_m, &tr.U, &tr.eta, &tr.norm_Eprime, &tr.obs_err, &tr.obs_err_target,
                  &tr.alpha_bar_1, &tr.input})
    v->reserve(rows);

  ControllerState cs{sc.eta0, 0.0, mode};
  double ym = measure(x, sc.dist.n, 0.0);
  cs.last_measurement = ym;
  // The initial state need not satisfy the actuated boundary condition; U^0 is read off it directly.
  double U = 0.0;
  if (mode == ControlMode::state_feedback) U = total_control(d.law(x.u, x.v), cs.eta, kI);
  else if (mode == ControlMode::output_feedback) U = total_control(d.law(xh->uhat, xh->vhat, ym), cs.eta, kI);
  const double w_end = feedback ? d.law.wv.back() : 0.0;

  try {
    for (std::size_t n = 0;; ++n) {
      const double t = static_cast<double>(n) * dt;
      x.t = t;
      tr.t.push_back(t);
      tr.y.push_back(x.u.back());
      tr.y_m.push_back(ym);
      tr.U.push_back(U);
      tr.eta.push_back(cs.eta);
      tr.norm_Eprime.push_back(norm_Eprime(x.u, x.v));
      tr.input.push_back(sc.dist.input_magnitude(t));
      if (with_observer) {
        Profile eu(g.size()), ev(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
          eu[i] = x.u[i] - xh->uhat[i];
          ev[i] = x.v[i] - xh->vhat[i];
        }
        tr.obs_err.push_back(norm_Eprime(eu, ev));
        if (opt.log_target_error) {
          const auto ab = invert_observer_transform({eu, ev}, *d.observer);
          tr.obs_err_target.push_back(norm_Eprime(ab.first, ab.second));
        } else {
          tr.obs_err_target.push_back(0.0);
        }
      } else {
        tr.obs_err.push_back(0.0);
        tr.obs_err_target.push_back(0.0);
      }
      if (opt.log_alpha_bar) {
        double a1 = transformed_alpha_at_end({x.u, x.v}, d.k);
        if (steady) a1 -= steady->end_values(sc.dist, t)[0];
        tr.alpha_bar_1.push_back(a1);
      } else {
        tr.alpha_bar_1.push_back(0.0);
      }
      if (opt.hook) opt.hook(x, with_observer ? &*xh : nullptr, U);
      if (n == steps) break;

      auto xn = advance_plant_interior(x, p, sc.dist, dt, sc.sim.scheme);
      const double ym_next = measure(xn, sc.dist.n, xn.t);
      std::optional<ObserverState> xhn;
      if (with_observer) xhn = advance_observer_interior(*xh, ym, *d.observer, p, dt, sc.sim.scheme);
      if (feedback) cs = integrator_step(cs, ym_next, dt);

      double U_next = 0.0;
      if (mode == ControlMode::state_feedback) {
        const double offset = p.rho * xn.u.back() + sc.dist.d4(xn.t);
        U_next = detail::solve_boundary_control(offset, d.law(xn.u, xn.v) + kI * cs.eta, w_end);
      } else if (mode == ControlMode::output_feedback) {
        const double offset = observer_boundary_offset(*xhn, ym_next, *d.observer, p);
        U_next = detail::solve_boundary_control(offset, d.law(xhn->uhat, xhn->vhat, ym_next) + kI * cs.eta, w_end);
      }
      if (with_observer) {
        close_observer_boundary(*xhn, ym_next, U_next, *d.observer, p, t);
        xh = std::move(xhn);
      }
      close_plant_boundary(xn, p, sc.dist, U_next, t);
      x = std::move(xn);
      ym = ym_next;
      U = U_next;
    }
  } catch (const DivergenceError& e) {
    tr.diverged_at = e.last_valid_time();
    if (!opt.keep_partial_on_divergence) throw;
  }
  res.final_state = x;
  res.final_observer = xh;
  return res;
}

/// sup |y| over t in [a, b].
inline double sup_over(const TraceLog& tr, const std::vector<double>& series, double a, double b) {
  double m = 0.0;
  for (std::size_t i = 0; i < tr.t.size(); ++i)
    if (tr.t[i] >= a - 1e-12 && tr.t[i] <= b + 1e-12) m = std::max(m, std::abs(series[i]));
  return m;
}

}  // namespace hypreg

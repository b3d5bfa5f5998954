// Acceptance suite. One line per criterion: [PASS]/[FAIL], the measured
// quantities and the pinned tolerance. Exit status 1 if any criterion fails.
//   hypreg_acceptance            run all
//   hypreg_acceptance 3 5        run a subset

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hypreg/closed_loop.hpp"

using namespace hypreg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Reference plant used by criteria 3-7, 9-11.
SystemParams reference_plant(std::size_t n) { return SystemParams::constant(SpatialGrid(n), 1, 1, 0.5, 0.5, 0.8, 0.3); }
constexpr double kRhoTilde = 0.8;
constexpr double kMargin = 0.5;

// Smooth initial data compatible with u(0) = q v(0) and v(1) = rho u(1).
Profile initial_u(const SpatialGrid& g) {
  return g.sample([](double x) { return 0.4 * (1.0 - x) + 0.3 * std::sin(std::numbers::pi * x); });
}
Profile initial_v(const SpatialGrid& g) {
  return g.sample([](double x) { return 0.5 * std::cos(std::numbers::pi * x / 2.0); });
}

Scenario static_disturbance_scenario(std::size_t n, ControlMode mode) {
  Scenario s(reference_plant(n));
  auto& d = s.dist;
  d.d1 = TimeSignal::constant(1.0);
  d.d3 = TimeSignal::constant(1.0);
  d.d2 = TimeSignal::constant(0.5);
  d.d4 = TimeSignal::constant(0.5);
  d.m1 = s.params.grid.constant(1.0);
  d.m2 = s.params.grid.constant(1.0);
  s.control.mode = mode;
  s.control.rho_tilde = kRhoTilde;
  s.control.margin = kMargin;
  s.sim.horizon = 20.0 * build_transport_maps(s.params).tau;
  return s;
}

// Criterion 1 and 2 grid.
const std::vector<double> kK1{-0.9, -0.5, 0.0, 0.5, 0.9};
const std::vector<double> kK2{-2.0, -1.0, -0.1};

Outcome c1_tau0_agreement() {
  double worst = 0.0;
  for (double k1 : kK1)
    for (double k2 : kK2) worst = std::max(worst, std::abs(tau0_formula(k1, k2) - tau0_oracle(k1, k2)));
  return {worst < 1e-9, fmt("max |formula - oracle| = %.2e over 15 points (tol 1e-9)", worst)};
}

Outcome c2_stability_flip() {
  constexpr int kWindows = 40;      // horizon in units of tau
  constexpr int kStepsPerTau = 400;
  int ok = 0, total = 0, intrinsic_ok = 0;
  std::string bad;
  for (double k1 : kK1)
    for (double k2 : kK2) {
      const double t0 = tau0_oracle(k1, k2);
      double r[2];
      for (int side = 0; side < 2; ++side) {
        const double tau = (side == 0 ? 0.9 : 1.1) * t0;
        const FeedbackGains g{k1, k2, tau};
        const auto tr = simulate_nde(
            g, [](double) { return 0.0; }, [](double) { return 1.0; }, [](double) { return 0.0; }, kWindows * tau,
            tau / kStepsPerTau);
        r[side] = window_ratio(tr.t, tr.z, tau);
      }
      ++total;
      // Growth per tau-window of the dominant root, for reference.
      const double a = 0.9 * t0, b = 1.1 * t0;
      const double ia = std::exp(spectral_abscissa({k1, k2, a}).s0 * a);
      const double ib = std::exp(spectral_abscissa({k1, k2, b}).s0 * b);
      if (ia < 0.95 && ib > 1.05) ++intrinsic_ok;
      if (r[0] < 0.95 && r[1] > 1.05) {
        ++ok;
      } else {
        bad += fmt(" (%g,%g: %.3f/%.3f, exp(s0 tau) %.3f/%.3f)", k1, k2, r[0], r[1], ia, ib);
      }
    }
  return {ok == total, fmt("%d/%d points flip (ratio < 0.95 at 0.9 tau0, > 1.05 at 1.1 tau0); dominant-root "
                           "growth per tau-window clears both thresholds at %d/%d points",
                           ok, total, intrinsic_ok, total) +
                           (bad.empty() ? "" : "; failing k1,k2: ratios" + bad)};
}

double target_residual(std::size_t n) {
  const auto p = reference_plant(n);
  const auto k = solve_control_kernels(p);
  const auto d = DisturbanceSet::none(p.grid);
  const double dt = auto_time_step(p);
  const double horizon = 2.0 * build_transport_maps(p).tau;
  FieldState s{initial_u(p.grid), initial_v(p.grid), 0.0};
  auto ab = apply_transform({s.u, s.v}, k);
  double worst = 0.0;
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  for (std::size_t m = 0; m < steps; ++m) {
    s = step_plant(s, p, d, 0.0, dt);
    const auto nx = apply_transform({s.u, s.v}, k);
    for (std::size_t i = 0; i + 1 < p.grid.size(); ++i) {
      worst = std::max(worst, std::abs(nx.first[i + 1] - ab.first[i]) / dt);
      worst = std::max(worst, std::abs(nx.second[i] - ab.second[i + 1]) / dt);
    }
    ab = nx;
  }
  return worst;
}

Outcome c3_target_residual() {
  const double r1 = target_residual(200), r2 = target_residual(400);
  return {r2 <= 0.6 * r1, fmt("sup residual %.3e (n=200) -> %.3e (n=400), ratio %.3f (tol <= 0.6)", r1, r2, r2 / r1)};
}

Outcome c4_round_trip() {
  const auto p = reference_plant(200);
  const auto k = solve_control_kernels(p);
  const auto l = solve_inverse_kernels(k, p.grid);
  std::mt19937_64 rng(20240101);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  double worst = 0.0;
  for (int r = 0; r < 20; ++r) {
    Profile u(p.grid.size()), v(p.grid.size());
    for (auto& x : u) x = U(rng);
    for (auto& x : v) x = U(rng);
    const auto back = apply_inverse(apply_transform({u, v}, k), l);
    worst = std::max({worst, max_abs_diff(back.first, u), max_abs_diff(back.second, v)});
  }
  const double tol = 5.0 * p.grid.h();
  return {worst <= tol, fmt("max round-trip error %.3e over 20 random pairs (tol 5h = %.3e)", worst, tol)};
}

Outcome c5_static_rejection() {
  const auto sc = static_disturbance_scenario(200, ControlMode::state_feedback);
  const auto d = build_design(sc.params, sc.control);
  RunOptions o;
  o.log_alpha_bar = false;
  const auto r = run_closed_loop(sc, d, o);
  const double tau = d.maps.tau;
  const double s = sup_over(r.trace, r.trace.y, 15 * tau, 20 * tau);
  return {s < 1e-3, fmt("k_I = %.4f, sup|y| on [15tau,20tau] = %.3e (tol 1e-3)", d.config.k_I, s)};
}

Outcome c6_iss_boundedness() {
  Scenario sc(reference_plant(200));
  auto& ds = sc.dist;
  // Harmonics of 2 pi / (10 tau): the forced response repeats every 10 tau,
  // so the window comparison sees trend rather than beat alignment.
  const double tau = build_transport_maps(sc.params).tau;
  const double w0 = 2.0 * std::numbers::pi / (10.0 * tau);
  ds.d1 = TimeSignal::sinusoid(0.5, 3 * w0);
  ds.d2 = TimeSignal::sinusoid(0.3, 2 * w0, 0.4);
  ds.d3 = TimeSignal::sinusoid(0.4, 4 * w0);
  ds.d4 = TimeSignal::sinusoid(0.2, w0, 1.0);
  ds.m1 = sc.params.grid.constant(1.0);
  ds.m2 = sc.params.grid.constant(1.0);
  ds.n = TimeSignal::noise(0.1, 0.05, 7);
  sc.control.rho_tilde = kRhoTilde;
  sc.control.margin = kMargin;
  sc.sim.horizon = 50 * tau;
  const auto d = build_design(sc.params, sc.control);
  RunOptions o;
  o.log_alpha_bar = false;
  const auto r = run_closed_loop(sc, d, o);
  const double early = sup_over(r.trace, r.trace.y, 0, 10 * tau);
  const double late = sup_over(r.trace, r.trace.y, 40 * tau, 50 * tau);
  const double all = sup_over(r.trace, r.trace.y, 0, 50 * tau);
  const bool pass = std::isfinite(all) && late <= 1.05 * early;
  std::string windows;
  for (int k = 0; k < 5; ++k) windows += fmt(" %.4f", sup_over(r.trace, r.trace.y, 10 * k * tau, 10 * (k + 1) * tau));
  return {pass, fmt("sup|y| [0,10tau] = %.4f, [40tau,50tau] = %.4f, overall %.4f (tol late <= 1.05 early); "
                    "per 10tau window:",
                    early, late, all) +
                    windows};
}

double observer_error_after_tau(std::size_t n) {
  const auto p = reference_plant(n);
  const auto ok = observer_gains(solve_observer_kernels(p), p, 1.0);
  const auto d = DisturbanceSet::none(p.grid);
  const double dt = auto_time_step(p);
  const double tau = build_transport_maps(p).tau;
  FieldState x{initial_u(p.grid), initial_v(p.grid), 0.0};
  ObserverState xh{p.grid.constant(0.0), p.grid.constant(0.0), 0.0};
  auto err = [&] {
    Profile eu(p.grid.size()), ev(p.grid.size());
    for (std::size_t i = 0; i < eu.size(); ++i) {
      eu[i] = x.u[i] - xh.uhat[i];
      ev[i] = x.v[i] - xh.vhat[i];
    }
    return norm_Eprime(eu, ev);
  };
  const double e0 = err();
  const auto steps = static_cast<std::size_t>(std::llround(tau / dt)) + 5;
  for (std::size_t m = 0; m < steps; ++m) {
    const double y0 = measure(x, d.n, x.t);
    x = step_plant(x, p, d, 0.0, dt);
    xh = step_observer(xh, y0, measure(x, d.n, x.t), 0.0, ok, p, dt);
  }
  return err() / e0;
}

Outcome c7_observer_finite_time() {
  const double r1 = observer_error_after_tau(200);
  if (r1 <= 1e-6) return {true, fmt("relative error at tau+5dt = %.3e at n=200 (tol 1e-6)", r1)};
  const double r2 = observer_error_after_tau(400);
  const bool pass = r1 <= 1e-2 && r2 <= 0.6 * r1;
  return {pass, fmt("relative error at tau+5dt: %.3e (n=200), %.3e (n=400); 1e-6 not reached, fallback tol "
                    "<= 1e-2 at n=200 and ratio <= 0.6 (got %.3f)",
                    r1, r2, r2 / r1)};
}

double ideal_error_ratio(const SystemParams& p, const ObserverKernelSet& pk, double eps, double tau) {
  const auto ok = observer_gains(pk, p, eps);
  ObserverState s{initial_u(p.grid), initial_v(p.grid), 0.0};
  const auto norms = simulate_ideal_error(s, ok, p, 20 * tau, auto_time_step(p));
  std::vector<double> t(norms.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i) * auto_time_step(p);
  return window_ratio(t, norms, tau);
}

Outcome c8_epsilon_threshold() {
  const auto p = SystemParams::constant(SpatialGrid(100), 1, 1, 0.5, 0.5, 1.0, -2.0);
  const auto pk = solve_observer_kernels(p);
  const double tau = build_transport_maps(p).tau;
  const double r_hi = ideal_error_ratio(p, pk, 0.75, tau), r_lo = ideal_error_ratio(p, pk, 0.25, tau);
  // Sweep: flip = first eps (step 0.01) at which the error decays.
  double flip = std::nan("");
  for (int k = 0; k <= 100; ++k) {
    const double eps = 0.01 * k;
    if (ideal_error_ratio(p, pk, eps, tau) < 1.0) {
      flip = eps;
      break;
    }
  }
  const bool pass = r_hi < 1.0 && r_lo > 1.0 && std::abs(flip - 0.5) <= 0.05;
  return {pass, fmt("window ratio %.3f at eps=0.75, %.3f at eps=0.25; flip at eps = %.2f (tol |flip - 0.5| <= 0.05)",
                    r_hi, r_lo, flip)};
}

struct Gap {
  double increments, derivative;
};

Gap nde_pde_gap(std::size_t n) {
  const auto sc = static_disturbance_scenario(n, ControlMode::state_feedback);
  const auto d = build_design(sc.params, sc.control, false);
  const auto r = run_closed_loop(sc, d);
  const auto& tr = r.trace;
  const double dt = tr.t[1] - tr.t[0];
  const double tau = d.maps.tau;
  const auto m = static_cast<std::size_t>(std::llround(tau / dt));
  const auto& z = tr.alpha_bar_1;
  // History on [tau, 2tau] mapped to [-tau, 0]. The derivative uses backward
  // differences: a jump inside a history cell then integrates back to its full
  // size under the trapezoid step (central differences lose half of a jump in
  // the first cell).
  auto idx = [&](double s) { return static_cast<std::size_t>(std::llround((s + 2.0 * tau) / dt)); };
  auto zh = [&](double s) { return z[idx(s)]; };
  auto zdh = [&](double s) {
    const std::size_t i = idx(s);
    return (z[i] - z[i - 1]) / dt;
  };
  const SteadyModel model(sc.params, d.k, d.l, d.w, d.config, sc.dist.m1, sc.dist.m2);
  const NdeForcing K(sc.params, d.config, d.maps, model, sc.dist);
  const double horizon = tr.t.back() - 2.0 * tau;
  auto gap = [&](NeutralForm f) {
    const auto nde = simulate_nde(d.gains, [&](double s) { return K(s + 2.0 * tau); }, zh, zdh, horizon, dt, f);
    double e = 0.0;
    for (std::size_t i = 1; i < nde.z.size(); ++i) e = std::max(e, std::abs(nde.z[i] - z[2 * m + i]));
    return e;
  };
  return {gap(NeutralForm::increments), gap(NeutralForm::derivative)};
}

// The closed-loop trace has jumps (the zero initial state is incompatible with
// the boundary conditions), so the NDE is stepped in increment form, which
// carries jumps across a delay exactly. The derivative form splits each jump
// over two steps and is reported for reference.
Outcome c9_nde_pde() {
  const auto a = nde_pde_gap(100), b = nde_pde_gap(200);
  const double g1 = a.increments, g2 = b.increments;
  return {g2 <= 0.6 * g1,
          fmt("sup |z_pde - z_nde| on (2tau,20tau]: %.3e (n=100) -> %.3e (n=200), ratio %.3f (tol <= 0.6); "
              "derivative-form stepping: %.3e -> %.3e",
              g1, g2, g2 / g1, a.derivative, b.derivative)};
}

Outcome c10_output_feedback() {
  auto sc = static_disturbance_scenario(200, ControlMode::output_feedback);
  sc.u0 = initial_u(sc.params.grid);
  sc.v0 = initial_v(sc.params.grid);
  const auto d = build_design(sc.params, sc.control);
  RunOptions o;
  o.log_alpha_bar = false;
  const auto r = run_closed_loop(sc, d, o);
  const double tau = d.maps.tau;
  const double s = sup_over(r.trace, r.trace.y, 15 * tau, 20 * tau);
  return {s < 5e-3,
          fmt("eps = %.3f, k_I = %.4f, sup|y| on [15tau,20tau] = %.3e (tol 5e-3)", d.config.epsilon, d.config.k_I, s)};
}

Outcome c11_iss_envelope() {
  Scenario sc(reference_plant(100));
  auto& ds = sc.dist;
  ds.d1 = TimeSignal::sinusoid(0.5, 1.0);
  ds.d2 = TimeSignal::sinusoid(0.3, 0.7, 0.4);
  ds.d3 = TimeSignal::sinusoid(0.4, 1.3);
  ds.d4 = TimeSignal::sinusoid(0.2, 0.5, 1.0);
  ds.m1 = sc.params.grid.constant(1.0);
  ds.m2 = sc.params.grid.constant(1.0);
  ds.n = TimeSignal::noise(0.1, 0.05, 11);
  sc.control.mode = ControlMode::output_feedback;
  sc.control.rho_tilde = kRhoTilde;
  sc.u0 = initial_u(sc.params.grid);
  sc.v0 = initial_v(sc.params.grid);
  const double tau = build_transport_maps(sc.params).tau;
  sc.sim.horizon = 20 * tau;
  std::size_t violations = 0;
  double worst = std::numeric_limits<double>::infinity();
  std::string per_eps;
  for (double eps : {0.5, 1.0}) {
    sc.control.epsilon = eps;
    const auto d = build_design(sc.params, sc.control, false);
    RunOptions o;
    o.log_alpha_bar = false;
    o.log_target_error = true;
    const auto r = run_closed_loop(sc, d, o);
    const auto c = iss_constants(sc.params, eps, d.maps);
    const auto e = iss_envelope_check(r.trace.t, r.trace.obs_err_target, r.trace.input, r.trace.obs_err_target[0], c);
    violations += e.violations;
    worst = std::min(worst, e.worst_margin);
    per_eps += fmt(" eps=%.1f: C=%.3f nu=%.3f slope=%.1f min margin %.3e;", eps, c.C, c.nu, c.gain_h2_slope,
                   e.worst_margin);
  }
  return {violations == 0, fmt("%zu envelope violations (one-sided, tol 0);", violations) + per_eps};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  Outcome (*run)();
};

const std::vector<Criterion> kCriteria{
    {1, "tau0 agreement", 1.0, c1_tau0_agreement},
    {2, "stability flip", 30.0, c2_stability_flip},
    {3, "kernel target residual", 60.0, c3_target_residual},
    {4, "transform round trip", 10.0, c4_round_trip},
    {5, "static-disturbance rejection", 120.0, c5_static_rejection},
    {6, "ISS boundedness", 300.0, c6_iss_boundedness},
    {7, "observer finite time", 600.0, c7_observer_finite_time},
    {8, "epsilon threshold", 120.0, c8_epsilon_threshold},
    {9, "NDE-PDE cross-validation", 600.0, c9_nde_pde},
    {10, "output-feedback regulation", 180.0, c10_output_feedback},
    {11, "ISS envelope", 600.0, c11_iss_envelope},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> pick;
  for (int i = 1; i < argc; ++i) pick.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!pick.empty() && std::find(pick.begin(), pick.end(), c.id) == pick.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    std::printf("[%s] %2d %s: %s; runtime %.2f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.budget_s, in_time ? "" : " OVER BUDGET");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

#include <gtest/gtest.h>

#include <cmath>

#include "hypreg/observer.hpp"

using namespace hypreg;

namespace {
SystemParams coupled(std::size_t n, double q = 0.8, double rho = 0.3) {
  return SystemParams::constant(SpatialGrid(n), 1, 1, 0.5, 0.5, q, rho);
}
ObserverState bump(const SpatialGrid& g) {
  return {g.sample([](double x) { return std::sin(3 * x) + 0.5; }), g.sample([](double x) { return 1 - x * x; }), 0.0};
}
}  // namespace

TEST(Observer, CopiesPlantWhenStartedOnIt) {
  const auto p = coupled(80);
  const auto ok = observer_gains(solve_observer_kernels(p), p, 0.4);
  const auto d = DisturbanceSet::none(p.grid);
  const auto b = bump(p.grid);
  FieldState x{b.uhat, b.vhat, 0.0};
  ObserverState xh = b;
  const double dt = p.grid.h();
  for (int k = 0; k < 400; ++k) {
    const double U = 0.2 * std::sin(0.05 * k);
    const double y0 = measure(x, d.n, x.t);
    x = step_plant(x, p, d, U, dt);
    xh = step_observer(xh, y0, measure(x, d.n, x.t), U, ok, p, dt);
  }
  EXPECT_LT(max_abs_diff(x.u, xh.uhat), 1e-12);
  EXPECT_LT(max_abs_diff(x.v, xh.vhat), 1e-12);
}

TEST(Observer, FullOutputInjectionSettlesAfterOneTransportTime) {
  const auto p = coupled(200);
  const auto ok = observer_gains(solve_observer_kernels(p), p, 1.0);
  const auto norms = simulate_ideal_error(bump(p.grid), ok, p, 6.0, p.grid.h());
  const double h = p.grid.h();
  const auto at = [&](double t) { return norms[static_cast<std::size_t>(std::llround(t / h))]; };
  // tau = 2; allow a little slack for the kernel discretisation.
  EXPECT_LT(at(2.2) / norms[0], 1e-2);
  EXPECT_LT(at(6.0) / norms[0], 1e-3);
}

TEST(Observer, EpsilonFlipsStabilityAtTheBound) {
  // |q rho| = 2: the admissible interval is (0.5, 1].
  const auto p = SystemParams::constant(SpatialGrid(100), 1, 1, 0.5, 0.5, 1.0, -2.0);
  const auto pk = solve_observer_kernels(p);
  auto late_ratio = [&](double eps) {
    const auto n = simulate_ideal_error(bump(p.grid), observer_gains(pk, p, eps), p, 40.0, p.grid.h());
    return n.back() / n.front();
  };
  EXPECT_GT(late_ratio(0.4), 10.0);
  EXPECT_LT(late_ratio(0.6), 0.05);
  EXPECT_LT(late_ratio(0.7), 1e-3);
}

TEST(EpsilonInterval, Cases) {
  const auto g = SpatialGrid(10);
  auto e = epsilon_interval(SystemParams::constant(g, 1, 1, 0, 0, 0.8, 0.3));
  EXPECT_EQ(e.lower, 0.0);
  EXPECT_TRUE(e.contains(0.0));
  EXPECT_TRUE(e.contains(1.0));
  EXPECT_FALSE(e.contains(1.01));
  e = epsilon_interval(SystemParams::constant(g, 1, 1, 0, 0, 1.0, -2.0));
  EXPECT_DOUBLE_EQ(e.lower, 0.5);
  EXPECT_TRUE(e.lower_open);
  EXPECT_FALSE(e.contains(0.5));
  EXPECT_TRUE(e.contains(0.5 + 1e-9));
  EXPECT_DOUBLE_EQ(e.midpoint(), 0.75);
  e = epsilon_interval(SystemParams::constant(g, 1, 1, 0, 0, 0.0, 0.0));
  EXPECT_TRUE(e.contains(0.0));
}

TEST(ErrorForcing, CollapsesWithoutCoupling) {
  const auto p = SystemParams::constant(SpatialGrid(40), 1, 1, 0, 0, 0.8, 0.3);
  const auto ok = observer_gains(solve_observer_kernels(p), p, 0.5);
  const auto m1 = p.grid.sample([](double x) { return x; });
  const auto m2 = p.grid.sample([](double x) { return 1 - x; });
  const auto f = error_forcing_profiles(ok, p, m1, m2);
  EXPECT_EQ(sup_norm(f.f1), 0.0);
  EXPECT_EQ(max_abs_diff(f.f2, m1), 0.0);
  EXPECT_EQ(sup_norm(f.f3), 0.0);
  EXPECT_EQ(sup_norm(f.g2), 0.0);
  EXPECT_EQ(max_abs_diff(f.g3, m2), 0.0);
  EXPECT_EQ(sup_norm(f.g4), 0.0);
}

TEST(ErrorForcing, SatisfiesIntegralEquations) {
  const auto p = coupled(60);
  const auto ok = observer_gains(solve_observer_kernels(p), p, 0.3);
  const auto m1 = p.grid.sample([](double x) { return std::cos(x); });
  const auto m2 = p.grid.sample([](double x) { return x * x; });
  const auto f = error_forcing_profiles(ok, p, m1, m2);
  // Residual of f2 = m1 + int_x^1 (Puu f2 + Puv g2), g2 = int_x^1 (Pvu f2 + Pvv g2).
  auto rf = detail::upper_integral(ok.Puu, f.f2, ok.Puv, f.g2);
  auto rg = detail::upper_integral(ok.Pvu, f.f2, ok.Pvv, f.g2);
  for (std::size_t i = 0; i < rf.size(); ++i) {
    EXPECT_NEAR(f.f2[i], m1[i] + rf[i], 1e-9);
    EXPECT_NEAR(f.g2[i], rg[i], 1e-9);
  }
  // Linearity in the profile shape.
  auto m1s = m1;
  for (double& x : m1s) x *= 3.0;
  const auto f3 = error_forcing_profiles(ok, p, m1s, m2);
  for (std::size_t i = 0; i < rf.size(); ++i) EXPECT_NEAR(f3.f2[i], 3.0 * f.f2[i], 1e-9);
}

TEST(ISS, ConstantsByHand) {
  const auto p = SystemParams::constant(SpatialGrid(20), 1, 1, 0.5, 0.5, 1.0, 0.5);
  const auto c = iss_constants(p, 0.5, build_transport_maps(p));
  EXPECT_DOUBLE_EQ(c.C, 3.25);
  EXPECT_NEAR(c.nu, std::log(4.0) / 2.0, 1e-14);
  EXPECT_DOUBLE_EQ(c.contraction, 0.25);
  const auto f = iss_constants(p, 1.0, build_transport_maps(p));
  EXPECT_TRUE(std::isinf(f.nu));
  EXPECT_EQ(f.h1(1.0, 2.5), 0.0);
  EXPECT_EQ(f.h1(1.0, 1.5), f.C);
  EXPECT_THROW(iss_constants(SystemParams::constant(SpatialGrid(20), 1, 1, 0, 0, 1.0, -2.0), 0.4,
                             build_transport_maps(p)),
               ConfigurationError);
}

TEST(ISS, EnvelopeUsesRunningSup) {
  ISSConstants c;
  c.C = 1.0;
  c.nu = 1.0;
  c.gain_h2_slope = 2.0;
  const std::vector<double> t{0, 1, 2}, in{0.5, 0.0, 0.0};
  EXPECT_TRUE(iss_envelope_check(t, {1.0, 1.2, 1.0}, in, 1.0, c).pass);
  const auto r = iss_envelope_check(t, {1.0, 1.2, 1.2}, in, 1.0, c);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.violations, 1u);
  EXPECT_EQ(r.worst_time, 2.0);
}

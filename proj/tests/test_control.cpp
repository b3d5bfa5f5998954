#include <gtest/gtest.h>

#include <cmath>

#include "hypreg/control.hpp"

using namespace hypreg;

namespace {
struct Rig {
  SystemParams p;
  KernelSet k;
  InverseKernelSet l;
  IntegralWeights w;
  ControlConfig c{0.2, -0.3, 0.4};
  explicit Rig(std::size_t n, double g1 = 0.5, double g2 = 0.4)
      : p(SystemParams::from_functions(
            SpatialGrid(n), [](double x) { return 1.0 + 0.2 * x; }, [](double x) { return 1.1 - 0.1 * x; },
            [g1](double x) { return g1 * (1 - 0.3 * x); }, [g2](double) { return g2; }, 0.8, 0.3)),
        k(solve_control_kernels(p)),
        l(solve_inverse_kernels(k, p.grid)),
        w(solve_integral_weights(l, p)) {}
  Profile f1() const { return p.grid.sample([](double x) { return std::sin(3 * x) + 0.2; }); }
  Profile f2() const { return p.grid.sample([](double x) { return x * x - 0.5; }); }
};
}  // namespace

TEST(StateFeedback, ZeroStateZeroControl) {
  Rig s(30);
  const auto z = s.p.grid.constant(0.0);
  EXPECT_EQ(state_feedback_ubs(z, z, s.k, s.l, s.w, s.p, s.c), 0.0);
  EXPECT_EQ(output_feedback_ubs(z, z, 0.0, s.k, s.w, s.p, s.c), 0.0);
}

TEST(StateFeedback, ZeroCouplingReducesToReflectionTerm) {
  Rig s(30, 0.0, 0.0);
  const auto u = s.f1(), v = s.f2();
  EXPECT_NEAR(state_feedback_ubs(u, v, s.k, s.l, s.w, s.p, s.c), -s.c.rho_tilde * u.back(), 1e-15);
}

TEST(StateFeedback, ConvergesUnderRefinement) {
  auto val = [](std::size_t n) {
    Rig s(n);
    return state_feedback_ubs(s.f1(), s.f2(), s.k, s.l, s.w, s.p, s.c);
  };
  const double a = val(40), b = val(80), c = val(160);
  EXPECT_LT(std::abs(c - b), 0.6 * std::abs(b - a));
  EXPECT_LT(std::abs(c - b), 1e-2);
}

TEST(OutputFeedback, BlendCollapsesWhenObserverMatches) {
  Rig s(60);
  const auto u = s.f1(), v = s.f2();
  const double sf = state_feedback_ubs(u, v, s.k, s.l, s.w, s.p, s.c);
  for (double eps : {0.0, 0.4, 1.0}) {
    auto c = s.c;
    c.epsilon = eps;
    const double of = output_feedback_ubs(u, v, u.back(), s.k, s.w, s.p, c);
    EXPECT_NEAR(of, sf, 5e-4) << eps;
  }
}

TEST(OutputFeedback, EquivalenceErrorIsQuadratureSized) {
  auto gap = [](std::size_t n) {
    Rig s(n);
    const auto u = s.f1(), v = s.f2();
    return std::abs(state_feedback_ubs(u, v, s.k, s.l, s.w, s.p, s.c) -
                    output_feedback_ubs(u, v, u.back(), s.k, s.w, s.p, s.c));
  };
  const double a = gap(40), b = gap(80);
  EXPECT_LT(b, 0.35 * a + 1e-13);
}

TEST(Compiled, MatchesDirectEvaluation) {
  Rig s(50);
  const auto u = s.f1(), v = s.f2();
  const auto sf = compile_state_feedback(s.k, s.l, s.w, s.p, s.c);
  EXPECT_NEAR(sf(u, v), state_feedback_ubs(u, v, s.k, s.l, s.w, s.p, s.c), 1e-12);
  const auto of = compile_output_feedback(s.k, s.w, s.p, s.c);
  EXPECT_NEAR(of(u, v, 0.37), output_feedback_ubs(u, v, 0.37, s.k, s.w, s.p, s.c), 1e-12);
}

TEST(Control, LinearInState) {
  Rig s(40);
  const auto u = s.f1(), v = s.f2();
  auto u2 = u, v2 = v;
  for (auto& x : u2) x = 2 * x + 0.1;
  for (auto& x : v2) x = -x;
  auto us = u, vs = v;
  for (std::size_t i = 0; i < u.size(); ++i) {
    us[i] = 0.5 * u[i] + 1.5 * u2[i];
    vs[i] = 0.5 * v[i] + 1.5 * v2[i];
  }
  auto f = [&](const Profile& a, const Profile& b) { return state_feedback_ubs(a, b, s.k, s.l, s.w, s.p, s.c); };
  EXPECT_NEAR(f(us, vs), 0.5 * f(u, v) + 1.5 * f(u2, v2), 1e-12);
}

TEST(Integrator, TrapezoidUpdates) {
  ControllerState c;
  c = integrator_step(c, 0.0, 0.1);
  EXPECT_EQ(c.eta, 0.0);
  ControllerState d{0.0, 1.0};
  for (int k = 0; k < 20; ++k) d = integrator_step(d, 1.0, 0.1);
  EXPECT_NEAR(d.eta, 2.0, 1e-14);
}

TEST(Integrator, MatchesFineQuadrature) {
  auto run = [](double dt) {
    ControllerState c{0.0, std::cos(0.0)};
    const auto n = static_cast<int>(std::lround(2.0 / dt));
    for (int k = 1; k <= n; ++k) c = integrator_step(c, std::cos(k * dt), dt);
    return std::abs(c.eta - std::sin(2.0));
  };
  EXPECT_NEAR(run(0.01) / run(0.005), 4.0, 0.05);
}

TEST(TotalControl, Sum) {
  EXPECT_EQ(total_control(0, 0, 3), 0.0);
  EXPECT_EQ(total_control(1, 2, -0.5), 0.0);
  EXPECT_EQ(total_control(0.7, 5, 0), 0.7);
}

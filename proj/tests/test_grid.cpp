#include <gtest/gtest.h>

#include <cmath>

#include "hypreg/grid.hpp"
#include "hypreg/model.hpp"
#include "hypreg/signal.hpp"
#include "hypreg/triangular_field.hpp"

using namespace hypreg;

TEST(Grid, RejectsTooFewCells) { EXPECT_THROW(SpatialGrid(1), ParameterError); }

TEST(Grid, TrapezoidIntegratesQuadraticToSecondOrder) {
  double prev = 0.0;
  for (std::size_t n : {20u, 40u, 80u}) {
    SpatialGrid g(n);
    const auto f = g.sample([](double x) { return x * x; });
    const double err = std::abs(trapezoid(f, g.h()) - 1.0 / 3.0);
    if (prev > 0.0) EXPECT_NEAR(prev / err, 4.0, 0.1);
    prev = err;
  }
}

TEST(Grid, CumulativeIntegralsAreConsistent) {
  SpatialGrid g(50);
  const auto f = g.sample([](double x) { return std::cos(x); });
  const auto fwd = cumulative_trapezoid(f, g.h());
  const auto bwd = reverse_cumulative_trapezoid(f, g.h());
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(fwd[i] + bwd[i], fwd.back(), 1e-14);
  EXPECT_NEAR(fwd.back(), std::sin(1.0), 1e-4);
}

TEST(Grid, DerivativeExactForQuadratics) {
  SpatialGrid g(10);
  const auto f = g.sample([](double x) { return 3 * x * x - x; });
  const auto d = derivative(f, g.h());
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(d[i], 6 * g.node(i) - 1, 1e-12);
}

TEST(TriangularField, SampleReproducesLinearFunctions) {
  SpatialGrid g(8);
  for (auto tri : {Triangle::lower, Triangle::upper}) {
    TriangularField f(g, tri);
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g.size(); ++j)
        if (f.contains(i, j)) f(i, j) = 2 * g.node(i) - 3 * g.node(j) + 1;
    for (double x : {0.0, 0.13, 0.5, 0.77, 1.0})
      for (double xi : {0.0, 0.05, 0.5, 0.9, 1.0}) {
        const bool inside = tri == Triangle::lower ? xi <= x : xi >= x;
        if (inside) EXPECT_NEAR(f.sample(x, xi), 2 * x - 3 * xi + 1, 1e-12);
      }
  }
}

TEST(Model, ValidationFlagsEachCondition) {
  SpatialGrid g(10);
  auto p = SystemParams::constant(g, 1, 1, 0, 0, 0.8, 0.3);
  EXPECT_TRUE(validate_configuration(p, {0.5, 0, 1}).ok());
  EXPECT_FALSE(validate_configuration(p, {1.0, 0, 1}).ok());
  EXPECT_FALSE(validate_configuration(p, {0.0, 0, 1.5}).ok());
  p.mu[3] = -1;
  EXPECT_FALSE(validate_configuration(p, {}).ok());
  p = SystemParams::constant(g, 1, 1, 0, 0, 0.0, 0.3);
  EXPECT_FALSE(validate_configuration(p, {}).ok());
}

TEST(Model, TransportTimesForConstantSpeeds) {
  SpatialGrid g(20);
  const auto m = build_transport_maps(SystemParams::constant(g, 2, 0.5, 0, 0, 1, 0));
  EXPECT_NEAR(m.tau1, 0.5, 1e-14);
  EXPECT_NEAR(m.tau2, 2.0, 1e-14);
  EXPECT_NEAR(m.tau, 2.5, 1e-14);
}

TEST(Signal, SinusoidDerivativesMatchFiniteDifferences) {
  const auto s = TimeSignal::sinusoid(0.7, 2.0, 0.3, 0.1);
  const double t = 0.9, e = 1e-5;
  EXPECT_NEAR(s.derivative(t), (s(t + e) - s(t - e)) / (2 * e), 1e-8);
  EXPECT_NEAR(s.second_derivative(t), (s.derivative(t + e) - s.derivative(t - e)) / (2 * e), 1e-7);
}

TEST(Signal, NoiseIsBoundedDeterministicAndHasNoDerivative) {
  const auto n = TimeSignal::noise(0.1, 0.01, 7);
  for (int k = 0; k < 1000; ++k) {
    const double t = 0.003 * k;
    EXPECT_LE(std::abs(n(t)), 0.1);
    EXPECT_EQ(n(t), TimeSignal::noise(0.1, 0.01, 7)(t));
  }
  EXPECT_THROW(n.derivative(0.0), SignalError);
}

TEST(Signal, SmoothRandomRespectsAmplitude) {
  TimeSignal s(signals::SmoothRandom{0.5, 3.0, 6, 11});
  for (int k = 0; k < 2000; ++k) EXPECT_LE(std::abs(s(0.01 * k)), 0.5 + 1e-12);
  EXPECT_TRUE(s.smooth());
}

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "hypreg/kernels.hpp"

using namespace hypreg;

namespace {

SystemParams varying(std::size_t n) {
  SpatialGrid g(n);
  return SystemParams::from_functions(
      g, [](double x) { return 1.0 + 0.3 * x; }, [](double x) { return 0.8 + 0.2 * std::cos(x); },
      [](double x) { return 0.6 - 0.2 * x; }, [](double x) { return 0.4 + 0.3 * x * x; }, 0.7, 0.4);
}

SystemParams constant(std::size_t n) { return SystemParams::constant(SpatialGrid(n), 1.0, 1.0, 0.5, 0.5, 0.8, 0.3); }

using Coef = std::function<double(std::size_t)>;

// Central-difference residual of A(x) K_x + B(xi) K_xi - R over nodes whose
// stencil lies inside the triangle.
double residual(const TriangularField& k, const Coef& a, const Coef& b, const std::function<double(std::size_t, std::size_t)>& r) {
  const std::size_t n = k.size();
  const double h = k.h();
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i)
    for (std::size_t j = 1; j + 1 < n; ++j) {
      if (!k.contains(i - 1, j - 1) || !k.contains(i + 1, j + 1) || !k.contains(i - 1, j + 1) ||
          !k.contains(i + 1, j - 1))
        continue;
      const double kx = (k(i + 1, j) - k(i - 1, j)) / (2 * h);
      const double kxi = (k(i, j + 1) - k(i, j - 1)) / (2 * h);
      worst = std::max(worst, std::abs(a(i) * kx + b(j) * kxi - r(i, j)));
    }
  return worst;
}

double control_residual(const SystemParams& p, const KernelSet& k) {
  const auto dl = derivative(p.lambda, p.grid.h());
  const auto dm = derivative(p.mu, p.grid.h());
  auto L = [&](std::size_t i) { return p.lambda[i]; };
  auto M = [&](std::size_t i) { return p.mu[i]; };
  auto nL = [&](std::size_t i) { return -p.lambda[i]; };
  auto nM = [&](std::size_t i) { return -p.mu[i]; };
  double w = 0.0;
  w = std::max(w, residual(k.Kuu, L, L, [&](auto i, auto j) { return -dl[j] * k.Kuu(i, j) - p.gamma2[j] * k.Kuv(i, j); }));
  w = std::max(w, residual(k.Kuv, L, nM, [&](auto i, auto j) { return dm[j] * k.Kuv(i, j) - p.gamma1[j] * k.Kuu(i, j); }));
  w = std::max(w, residual(k.Kvu, M, nL, [&](auto i, auto j) { return dl[j] * k.Kvu(i, j) + p.gamma2[j] * k.Kvv(i, j); }));
  w = std::max(w, residual(k.Kvv, M, M, [&](auto i, auto j) { return -dm[j] * k.Kvv(i, j) + p.gamma1[j] * k.Kvu(i, j); }));
  return w;
}

double observer_residual(const SystemParams& p, const ObserverKernelSet& k) {
  const auto dl = derivative(p.lambda, p.grid.h());
  const auto dm = derivative(p.mu, p.grid.h());
  auto L = [&](std::size_t i) { return p.lambda[i]; };
  auto M = [&](std::size_t i) { return p.mu[i]; };
  auto nL = [&](std::size_t i) { return -p.lambda[i]; };
  auto nM = [&](std::size_t i) { return -p.mu[i]; };
  double w = 0.0;
  w = std::max(w, residual(k.Puu, L, L, [&](auto i, auto j) { return -dl[j] * k.Puu(i, j) + p.gamma1[i] * k.Pvu(i, j); }));
  w = std::max(w, residual(k.Puv, L, nM, [&](auto i, auto j) { return dm[j] * k.Puv(i, j) + p.gamma1[i] * k.Pvv(i, j); }));
  w = std::max(w, residual(k.Pvu, M, nL, [&](auto i, auto j) { return dl[j] * k.Pvu(i, j) - p.gamma2[i] * k.Puu(i, j); }));
  w = std::max(w, residual(k.Pvv, M, M, [&](auto i, auto j) { return -dm[j] * k.Pvv(i, j) - p.gamma2[i] * k.Puv(i, j); }));
  return w;
}

}  // namespace

TEST(ControlKernels, ZeroCouplingGivesZeroKernels) {
  auto p = SystemParams::constant(SpatialGrid(40), 1.0, 2.0, 0.0, 0.0, 0.5, 0.2);
  const auto k = solve_control_kernels(p);
  EXPECT_EQ(k.Kuu.sup_norm() + k.Kuv.sup_norm() + k.Kvu.sup_norm() + k.Kvv.sup_norm(), 0.0);
}

TEST(ControlKernels, BoundaryConditionsHold) {
  const auto p = varying(80);
  const auto k = solve_control_kernels(p);
  const auto& g = p.grid;
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(k.Kuv(i, i), p.gamma1[i] / (p.lambda[i] + p.mu[i]), 1e-14);
    EXPECT_NEAR(k.Kvu(i, i), -p.gamma2[i] / (p.lambda[i] + p.mu[i]), 1e-14);
    EXPECT_NEAR(p.mu[0] * k.Kuv(i, 0), p.q * p.lambda[0] * k.Kuu(i, 0), 1e-12);
    EXPECT_NEAR(p.mu[0] * k.Kvv(i, 0), p.q * p.lambda[0] * k.Kvu(i, 0), 1e-12);
  }
  EXPECT_LT(k.stats.updates.back(), 1e-10);
}

TEST(ControlKernels, ResidualDecreasesUnderRefinement) {
  for (auto make : {constant, varying}) {
    const auto p1 = make(40), p2 = make(80);
    const double r1 = control_residual(p1, solve_control_kernels(p1));
    const double r2 = control_residual(p2, solve_control_kernels(p2));
    EXPECT_LT(r2, 0.05);
    EXPECT_LT(r2, 0.6 * r1) << r1 << " " << r2;
  }
}

TEST(ControlKernels, SolverErrorCarriesHistory) {
  const auto p = varying(20);
  try {
    solve_control_kernels(p, {1e-30, 3});
    FAIL();
  } catch (const SolverError& e) {
    EXPECT_EQ(e.history().size(), 3u);
  }
}

TEST(ControlKernels, RejectsInvalidPlant) {
  auto p = constant(10);
  p.q = 0.0;
  EXPECT_THROW(solve_control_kernels(p), ParameterError);
}

TEST(InverseKernels, RoundTripConvergesAtSecondOrder) {
  auto err = [](std::size_t n) {
    const auto p = varying(n);
    const auto k = solve_control_kernels(p);
    const auto l = solve_inverse_kernels(k, p.grid);
    FieldPair uv{p.grid.sample([](double x) { return std::sin(3 * x); }),
                 p.grid.sample([](double x) { return x * x - 0.3; })};
    const auto back = apply_inverse(apply_transform(uv, k), l);
    return std::max(max_abs_diff(back.first, uv.first), max_abs_diff(back.second, uv.second));
  };
  const double e1 = err(40), e2 = err(80);
  EXPECT_LT(e2, 1e-5);
  EXPECT_NEAR(e1 / e2, 4.0, 1.0);
}

TEST(InverseKernels, DiagonalMatchesForwardKernel) {
  const auto p = varying(40);
  const auto k = solve_control_kernels(p);
  const auto l = solve_inverse_kernels(k, p.grid);
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    EXPECT_EQ(l.Lab(i, i), k.Kuv(i, i));
    EXPECT_EQ(l.Lba(i, i), k.Kvu(i, i));
  }
}

TEST(IntegralWeights, BoundaryFactorEqualsDirectFormula) {
  const auto p = varying(80);
  const auto k = solve_control_kernels(p);
  const auto l = solve_inverse_kernels(k, p.grid);
  const auto w = solve_integral_weights(l, p);
  EXPECT_NEAR(w.boundary_factor, boundary_factor_value(l, p.q, p.grid), 1e-12);
  EXPECT_NEAR(w.l2.back(), 0.0, 1e-15);
  EXPECT_NEAR(w.l1[0] * p.lambda[0] * p.q, p.mu[0] * w.l2[0], 1e-14);
}

TEST(Transform, AdjointMatchesDirectComposition) {
  const auto p = varying(50);
  const auto k = solve_control_kernels(p);
  const auto& g = p.grid;
  FieldPair uv{g.sample([](double x) { return std::exp(x); }), g.sample([](double x) { return std::cos(4 * x); })};
  FieldPair w{g.sample([](double x) { return 1 - x; }), g.sample([](double x) { return x * x; })};
  const auto ab = apply_transform(uv, k);
  const auto adj = transform_adjoint(w, k);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    lhs += w.first[i] * ab.first[i] + w.second[i] * ab.second[i];
    rhs += adj.first[i] * uv.first[i] + adj.second[i] * uv.second[i];
  }
  EXPECT_NEAR(lhs, rhs, 1e-12);
  EXPECT_NEAR(transformed_alpha_at_end(uv, k), ab.first.back(), 1e-14);
}

TEST(ObserverKernels, BoundaryConditionsAndResidual) {
  for (auto make : {constant, varying}) {
    const auto p1 = make(40), p2 = make(80);
    const auto k1 = solve_observer_kernels(p1);
    const auto k2 = solve_observer_kernels(p2);
    const auto& g = p2.grid;
    for (std::size_t j = 0; j < g.size(); ++j) {
      EXPECT_NEAR(k2.Puv(j, j), p2.gamma1[j] / (p2.lambda[j] + p2.mu[j]), 1e-14);
      EXPECT_NEAR(k2.Pvu(j, j), -p2.gamma2[j] / (p2.lambda[j] + p2.mu[j]), 1e-14);
      EXPECT_NEAR(k2.Puu(0, j), p2.q * k2.Pvu(0, j), 1e-12);
      EXPECT_NEAR(k2.Puv(0, j), p2.q * k2.Pvv(0, j), 1e-12);
    }
    const double r1 = observer_residual(p1, k1), r2 = observer_residual(p2, k2);
    EXPECT_LT(r2, 0.05);
    EXPECT_LT(r2, 0.6 * r1) << r1 << " " << r2;
  }
}

TEST(ObserverKernels, GainsFollowKernelTraces) {
  const auto p = varying(40);
  const auto k = observer_gains(solve_observer_kernels(p), p, 0.25);
  const std::size_t last = p.grid.last();
  const double lam1 = p.lambda[last], mu1 = p.mu[last];
  for (std::size_t i = 0; i < p.grid.size(); ++i) {
    EXPECT_NEAR(k.p_plus[i], -lam1 * k.Puu(i, last) + mu1 * p.rho * 0.75 * k.Puv(i, last), 1e-14);
    EXPECT_NEAR(k.p_minus[i], -lam1 * k.Pvu(i, last) + mu1 * p.rho * 0.75 * k.Pvv(i, last), 1e-14);
  }
  EXPECT_THROW(observer_gains(k, p, 1.5), ParameterError);
}

TEST(ObserverKernels, TransformInverseRoundTrip) {
  const auto p = varying(60);
  const auto k = solve_observer_kernels(p);
  FieldPair ab{p.grid.sample([](double x) { return std::sin(2 * x); }), p.grid.sample([](double x) { return 1 - x; })};
  const auto back = invert_observer_transform(apply_observer_transform(ab, k), k);
  EXPECT_LT(max_abs_diff(back.first, ab.first), 1e-12);
  EXPECT_LT(max_abs_diff(back.second, ab.second), 1e-12);
}

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "hypreg/error.hpp"
#include "hypreg/grid.hpp"
#include "hypreg/model.hpp"
#include "hypreg/triangular_field.hpp"

namespace hypreg {

struct SolverOptions {
  double tolerance = 1e-10;
  int max_iterations = 200;
};

struct SolveStats {
  int iterations = 0;
  std::vector<double> updates;
};

/// Kernels of alpha = u - int_0^x (Kuu u + Kuv v), beta = v - int_0^x (Kvu u + Kvv v).
struct KernelSet {
  TriangularField Kuu, Kuv, Kvu, Kvv;
  SolveStats stats;
};

/// Kernels of u = alpha + int_0^x (Laa alpha + Lab beta), v = beta + int_0^x (Lba alpha + Lbb beta).
struct InverseKernelSet {
  TriangularField Laa, Lab, Lba, Lbb;
};

/// Observer kernels on the upper triangle plus the output-injection gains.
struct ObserverKernelSet {
  TriangularField Puu, Puv, Pvu, Pvv;
  Profile p_plus, p_minus;
  double epsilon = 1.0;
  SolveStats stats;
};

/// Integral-action weights: (l1 lambda)' = Laa(1,x), (l2 mu)' = -Lab(1,x),
/// l2(1) = 0, l1(0) = mu(0) l2(0) / (q lambda(0)).
struct IntegralWeights {
  Profile l1, l2;
  double boundary_factor = 1.0;  // 1 + l1(1) lambda(1)
};

/// A pair of nodal profiles, e.g. (u, v) or (alpha, beta).
struct FieldPair {
  Profile first, second;
};

inline constexpr double kBoundaryFactorThreshold = 1e-6;

namespace detail {

enum class Inflow { diagonal, edge };

/// Integrates A(x) dK/dx + B(xi) dK/dxi = R along characteristics, marching
/// row by row away from the inflow boundary. `R` holds the right-hand side
/// evaluated on the previous iterate; `inflow(x, xi)` gives the boundary data
/// where a characteristic enters the triangle.
inline void characteristic_sweep(TriangularField& out, const TriangularField& R, const SpatialGrid& grid,
                                 const Profile& A, const Profile& B, int march, Inflow inflow,
                                 const std::function<double(double, double)>& boundary) {
  const Triangle tri = out.orientation();
  const std::size_t last = grid.last();
  const double h = grid.h();

  // Signed distance to the inflow boundary; positive means outside.
  auto outside = [&](double x, double xi) {
    if (inflow == Inflow::edge) return tri == Triangle::lower ? -xi : -x;
    return tri == Triangle::lower ? xi - x : x - xi;
  };
  auto on_boundary = [&](std::size_t i, std::size_t j) {
    if (inflow == Inflow::diagonal) return i == j;
    return tri == Triangle::lower ? j == 0 : i == 0;
  };

  auto process_row = [&](std::size_t i) {
    const std::size_t j_lo = tri == Triangle::lower ? 0 : i;
    const std::size_t j_hi = tri == Triangle::lower ? i : last;
    const double x = grid.node(i);
    for (std::size_t j = j_lo; j <= j_hi; ++j) {
      const double xi = grid.node(j);
      if (on_boundary(i, j)) {
        out(i, j) = boundary(x, xi);
        continue;
      }
      const std::size_t r = march > 0 ? i - 1 : i + 1;
      const double xr = grid.node(r);
      const double dx = xr - x;
      const double a_node = A[i];
      const double s1 = grid.interpolate(B, xi) / a_node;
      const double xi_pred = xi + dx * s1;
      const double s2 = grid.interpolate(B, xi_pred) / A[r];
      double xi_foot = xi + 0.5 * dx * (s1 + s2);
      double x_foot = xr;
      double k_foot = 0.0;

      const double g0 = outside(x, xi);
      const double g1 = outside(xr, xi_foot);
      if (g1 > 0.0 && inflow != Inflow::edge) {
        const double theta = g0 / (g0 - g1);
        x_foot = x + theta * dx;
        xi_foot = x_foot;
        k_foot = boundary(x_foot, xi_foot);
      } else if (g1 > 0.0 && tri == Triangle::lower) {
        const double theta = g0 / (g0 - g1);
        x_foot = x + theta * dx;
        xi_foot = 0.0;
        k_foot = boundary(x_foot, xi_foot);
      } else {
        // Foot lies on row r; project it into the triangle and interpolate.
        if (tri == Triangle::lower) xi_foot = std::clamp(xi_foot, 0.0, xr);
        else xi_foot = std::clamp(xi_foot, xr, 1.0);
        k_foot = grid.interpolate(out.row(r), xi_foot);
      }
      const double a_foot = grid.interpolate(A, x_foot);
      const double rhs = 0.5 * (R.sample(x_foot, xi_foot) / a_foot + R(i, j) / a_node);
      out(i, j) = k_foot + (x - x_foot) * rhs;
    }
  };

  if (march > 0) {
    for (std::size_t i = 0; i <= last; ++i) process_row(i);
  } else {
    for (std::size_t i = last + 1; i-- > 0;) process_row(i);
  }
}

struct Mat2 {
  double a = 0, b = 0, c = 0, d = 0;  // [[a, b], [c, d]]

  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
  Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
  Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
  Mat2 inverse() const {
    const double det = a * d - b * c;
    return {d / det, -b / det, -c / det, a / det};
  }
};

inline void require_valid(const SystemParams& p) {
  const auto report = validate_configuration(p, ControlConfig{});
  for (const auto& c : report.checks)
    if (!c.passed && c.name != "partial_cancellation")
      throw ParameterError("invalid plant parameters: " + c.name + ": " + c.detail);
}

inline Profile ratio_profile(const Profile& num, const Profile& l, const Profile& m, double sign) {
  Profile out(num.size());
  for (std::size_t i = 0; i < num.size(); ++i) out[i] = sign * num[i] / (l[i] + m[i]);
  return out;
}

}  // namespace detail

/// Solves the controller kernel equations on the lower triangle
///   lambda(x) Kuu_x + (lambda Kuu)_xi = -gamma2(xi) Kuv
///   lambda(x) Kuv_x - (mu Kuv)_xi     = -gamma1(xi) Kuu
///   mu(x) Kvu_x - (lambda Kvu)_xi     =  gamma2(xi) Kvv
///   mu(x) Kvv_x + (mu Kvv)_xi         =  gamma1(xi) Kvu
/// with Kuv(x,x) = gamma1/(lambda+mu), Kvu(x,x) = -gamma2/(lambda+mu),
/// mu(0) Kuv(x,0) = q lambda(0) Kuu(x,0), mu(0) Kvv(x,0) = q lambda(0) Kvu(x,0).
/// Characteristics are integrated with Heun steps; the couplings are resolved
/// by successive approximation.
inline KernelSet solve_control_kernels(const SystemParams& p, const SolverOptions& opt = {}) {
  detail::require_valid(p);
  const auto& g = p.grid;
  const std::size_t n = g.size();
  const Profile dl = derivative(p.lambda, g.h());
  const Profile dm = derivative(p.mu, g.h());
  Profile neg_mu(n), neg_l(n);
  for (std::size_t k = 0; k < n; ++k) {
    neg_mu[k] = -p.mu[k];
    neg_l[k] = -p.lambda[k];
  }
  const Profile diag_uv = detail::ratio_profile(p.gamma1, p.lambda, p.mu, 1.0);
  const Profile diag_vu = detail::ratio_profile(p.gamma2, p.lambda, p.mu, -1.0);
  const double c_uu = p.mu[0] / (p.q * p.lambda[0]);
  const double c_vv = p.q * p.lambda[0] / p.mu[0];

  KernelSet k{TriangularField(g, Triangle::lower), TriangularField(g, Triangle::lower),
              TriangularField(g, Triangle::lower), TriangularField(g, Triangle::lower), {}};
  TriangularField r_uu(g, Triangle::lower), r_uv(g, Triangle::lower), r_vu(g, Triangle::lower),
      r_vv(g, Triangle::lower);

  for (int it = 1; it <= opt.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        r_uu(i, j) = -dl[j] * k.Kuu(i, j) - p.gamma2[j] * k.Kuv(i, j);
        r_uv(i, j) = dm[j] * k.Kuv(i, j) - p.gamma1[j] * k.Kuu(i, j);
        r_vu(i, j) = dl[j] * k.Kvu(i, j) + p.gamma2[j] * k.Kvv(i, j);
        r_vv(i, j) = -dm[j] * k.Kvv(i, j) + p.gamma1[j] * k.Kvu(i, j);
      }
    KernelSet next = k;
    detail::characteristic_sweep(next.Kuv, r_uv, g, p.lambda, neg_mu, +1, detail::Inflow::diagonal,
                                 [&](double x, double) { return g.interpolate(diag_uv, x); });
    detail::characteristic_sweep(next.Kvu, r_vu, g, p.mu, neg_l, +1, detail::Inflow::diagonal,
                                 [&](double x, double) { return g.interpolate(diag_vu, x); });
    const Profile kuv0 = next.Kuv.column(0), kvu0 = next.Kvu.column(0);
    detail::characteristic_sweep(next.Kuu, r_uu, g, p.lambda, p.lambda, +1, detail::Inflow::edge,
                                 [&](double x, double) { return c_uu * g.interpolate(kuv0, x); });
    detail::characteristic_sweep(next.Kvv, r_vv, g, p.mu, p.mu, +1, detail::Inflow::edge,
                                 [&](double x, double) { return c_vv * g.interpolate(kvu0, x); });

    const double update = std::max({max_abs_diff(next.Kuu, k.Kuu), max_abs_diff(next.Kuv, k.Kuv),
                                     max_abs_diff(next.Kvu, k.Kvu), max_abs_diff(next.Kvv, k.Kvv)});
    next.stats.iterations = it;
    next.stats.updates.push_back(update);
    k = std::move(next);
    if (!std::isfinite(update)) break;
    if (update < opt.tolerance) return k;
  }
  throw SolverError("solve_control_kernels: successive approximation did not converge", k.stats.updates);
}

/// Solves the observer kernel equations on the upper triangle
///   lambda(x) Puu_x + (lambda Puu)_xi =  gamma1(x) Pvu
///   lambda(x) Puv_x - (mu Puv)_xi     =  gamma1(x) Pvv
///   mu(x) Pvu_x - (lambda Pvu)_xi     = -gamma2(x) Puu
///   mu(x) Pvv_x + (mu Pvv)_xi         = -gamma2(x) Puv
/// with Puv(x,x) = gamma1/(lambda+mu), Pvu(x,x) = -gamma2/(lambda+mu),
/// Puu(0,xi) = q Pvu(0,xi), Puv(0,xi) = q Pvv(0,xi). Gains are left empty;
/// see observer_gains.
inline ObserverKernelSet solve_observer_kernels(const SystemParams& p, const SolverOptions& opt = {}) {
  detail::require_valid(p);
  const auto& g = p.grid;
  const std::size_t n = g.size();
  const Profile dl = derivative(p.lambda, g.h());
  const Profile dm = derivative(p.mu, g.h());
  Profile neg_mu(n), neg_l(n);
  for (std::size_t k = 0; k < n; ++k) {
    neg_mu[k] = -p.mu[k];
    neg_l[k] = -p.lambda[k];
  }
  const Profile diag_uv = detail::ratio_profile(p.gamma1, p.lambda, p.mu, 1.0);
  const Profile diag_vu = detail::ratio_profile(p.gamma2, p.lambda, p.mu, -1.0);

  ObserverKernelSet k;
  k.Puu = k.Puv = k.Pvu = k.Pvv = TriangularField(g, Triangle::upper);
  TriangularField r_uu(g, Triangle::upper), r_uv(g, Triangle::upper), r_vu(g, Triangle::upper),
      r_vv(g, Triangle::upper);

  for (int it = 1; it <= opt.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        r_uu(i, j) = -dl[j] * k.Puu(i, j) + p.gamma1[i] * k.Pvu(i, j);
        r_uv(i, j) = dm[j] * k.Puv(i, j) + p.gamma1[i] * k.Pvv(i, j);
        r_vu(i, j) = dl[j] * k.Pvu(i, j) - p.gamma2[i] * k.Puu(i, j);
        r_vv(i, j) = -dm[j] * k.Pvv(i, j) - p.gamma2[i] * k.Puv(i, j);
      }
    ObserverKernelSet next = k;
    detail::characteristic_sweep(next.Puv, r_uv, g, p.lambda, neg_mu, -1, detail::Inflow::diagonal,
                                 [&](double x, double) { return g.interpolate(diag_uv, x); });
    detail::characteristic_sweep(next.Pvu, r_vu, g, p.mu, neg_l, -1, detail::Inflow::diagonal,
                                 [&](double x, double) { return g.interpolate(diag_vu, x); });
    const Profile puv0(next.Puv.row(0).begin(), next.Puv.row(0).end());
    const Profile pvu0(next.Pvu.row(0).begin(), next.Pvu.row(0).end());
    detail::characteristic_sweep(next.Puu, r_uu, g, p.lambda, p.lambda, +1, detail::Inflow::edge,
                                 [&](double, double xi) { return p.q * g.interpolate(pvu0, xi); });
    detail::characteristic_sweep(next.Pvv, r_vv, g, p.mu, p.mu, +1, detail::Inflow::edge,
                                 [&](double, double xi) { return g.interpolate(puv0, xi) / p.q; });

    const double update = std::max({max_abs_diff(next.Puu, k.Puu), max_abs_diff(next.Puv, k.Puv),
                                     max_abs_diff(next.Pvu, k.Pvu), max_abs_diff(next.Pvv, k.Pvv)});
    next.stats.iterations = it;
    next.stats.updates.push_back(update);
    k = std::move(next);
    if (!std::isfinite(update)) break;
    if (update < opt.tolerance) return k;
  }
  throw SolverError("solve_observer_kernels: successive approximation did not converge", k.stats.updates);
}

/// Output-injection gains from the kernel traces at xi = 1:
///   P+(x) = -lambda(1) Puu(x,1) + mu(1) rho (1-eps) Puv(x,1)
///   P-(x) = -lambda(1) Pvu(x,1) + mu(1) rho (1-eps) Pvv(x,1)
inline ObserverKernelSet observer_gains(ObserverKernelSet pset, const SystemParams& p, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ParameterError("observer_gains: epsilon must lie in [0, 1]");
  const std::size_t n = p.grid.size();
  const std::size_t last = p.grid.last();
  const double l1 = p.lambda[last], m1 = p.mu[last];
  const double blend = p.rho * (1.0 - epsilon);
  pset.p_plus.assign(n, 0.0);
  pset.p_minus.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    pset.p_plus[i] = -l1 * pset.Puu(i, last) + m1 * blend * pset.Puv(i, last);
    pset.p_minus[i] = -l1 * pset.Pvu(i, last) + m1 * blend * pset.Pvv(i, last);
  }
  pset.epsilon = epsilon;
  return pset;
}

/// Inverse kernels from the reciprocity relation
///   L(x,xi) = K(x,xi) + int_xi^x L(x,s) K(s,xi) ds    (2x2 blocks),
/// discretized with the trapezoid rule and solved row by row, from the
/// diagonal towards xi = 0. The implicit s = xi term is a 2x2 solve.
inline InverseKernelSet solve_inverse_kernels(const KernelSet& k, const SpatialGrid& g) {
  using detail::Mat2;
  const std::size_t n = g.size();
  const double h = g.h();
  auto kmat = [&](std::size_t i, std::size_t j) { return Mat2{k.Kuu(i, j), k.Kuv(i, j), k.Kvu(i, j), k.Kvv(i, j)}; };

  InverseKernelSet l{TriangularField(g, Triangle::lower), TriangularField(g, Triangle::lower),
                     TriangularField(g, Triangle::lower), TriangularField(g, Triangle::lower)};
  std::vector<Mat2> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    row[i] = kmat(i, i);
    for (std::size_t jj = i; jj-- > 0;) {
      const std::size_t j = jj;
      Mat2 rhs = kmat(i, j) + row[i] * kmat(i, j) * (0.5 * h);
      for (std::size_t s = j + 1; s < i; ++s) rhs = rhs + row[s] * kmat(s, j) * h;
      const Mat2 kjj = kmat(j, j);
      const Mat2 m{1.0 - 0.5 * h * kjj.a, -0.5 * h * kjj.b, -0.5 * h * kjj.c, 1.0 - 0.5 * h * kjj.d};
      row[j] = rhs * m.inverse();
    }
    for (std::size_t j = 0; j <= i; ++j) {
      l.Laa(i, j) = row[j].a;
      l.Lab(i, j) = row[j].b;
      l.Lba(i, j) = row[j].c;
      l.Lbb(i, j) = row[j].d;
    }
  }
  return l;
}

/// 1 + int_0^1 Laa(1,xi) dxi + (1/q) int_0^1 Lab(1,xi) dxi.
inline double boundary_factor_value(const InverseKernelSet& l, double q, const SpatialGrid& g) {
  const std::size_t last = g.last();
  return 1.0 + trapezoid(l.Laa.row(last), g.h()) + trapezoid(l.Lab.row(last), g.h()) / q;
}

inline IntegralWeights solve_integral_weights(const InverseKernelSet& l, const SystemParams& p) {
  const auto& g = p.grid;
  const double bf = boundary_factor_value(l, p.q, g);
  if (!(std::abs(bf) >= kBoundaryFactorThreshold))
    throw ConfigurationError("boundary factor vanishes: 1 + int Laa(1,.) + (1/q) int Lab(1,.) = " + std::to_string(bf));
  const std::size_t last = g.last();
  const auto laa = l.Laa.row(last);
  const auto lab = l.Lab.row(last);
  const Profile l2mu = reverse_cumulative_trapezoid(lab, g.h());
  const Profile int_laa = cumulative_trapezoid(laa, g.h());
  IntegralWeights w;
  w.l2.resize(g.size());
  w.l1.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) w.l2[i] = l2mu[i] / p.mu[i];
  const double l1lam0 = p.mu[0] * w.l2[0] / p.q;
  for (std::size_t i = 0; i < g.size(); ++i) w.l1[i] = (l1lam0 + int_laa[i]) / p.lambda[i];
  w.boundary_factor = 1.0 + w.l1[last] * p.lambda[last];
  return w;
}

/// Volterra map on a triangle: out_i = a_i + sign * int (K11 a + K12 b), same for the second component.
inline FieldPair volterra_apply(const FieldPair& w, const TriangularField& k11, const TriangularField& k12,
                                const TriangularField& k21, const TriangularField& k22, double sign) {
  const std::size_t n = w.first.size();
  const std::size_t last = n - 1;
  const double h = k11.h();
  const Triangle tri = k11.orientation();
  FieldPair out{w.first, w.second};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = tri == Triangle::lower ? 0 : i;
    const std::size_t hi = tri == Triangle::lower ? i : last;
    if (hi == lo) continue;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) {
      const double wt = (j == lo || j == hi) ? 0.5 : 1.0;
      s1 += wt * (k11(i, j) * w.first[j] + k12(i, j) * w.second[j]);
      s2 += wt * (k21(i, j) * w.first[j] + k22(i, j) * w.second[j]);
    }
    out.first[i] += sign * h * s1;
    out.second[i] += sign * h * s2;
  }
  return out;
}

/// (alpha, beta) = Gamma[(u, v)].
inline FieldPair apply_transform(const FieldPair& uv, const KernelSet& k) {
  return volterra_apply(uv, k.Kuu, k.Kuv, k.Kvu, k.Kvv, -1.0);
}

/// (u, v) = Gamma^{-1}[(alpha, beta)].
inline FieldPair apply_inverse(const FieldPair& ab, const InverseKernelSet& l) {
  return volterra_apply(ab, l.Laa, l.Lab, l.Lba, l.Lbb, +1.0);
}

/// alpha(t,1) = u(1) - int_0^1 (Kuu(1,.) u + Kuv(1,.) v).
inline double transformed_alpha_at_end(const FieldPair& uv, const KernelSet& k) {
  const std::size_t last = uv.first.size() - 1;
  const double h = k.Kuu.h();
  double s = 0.0;
  for (std::size_t j = 0; j <= last; ++j) {
    const double wt = (j == 0 || j == last) ? 0.5 : 1.0;
    s += wt * (k.Kuu(last, j) * uv.first[j] + k.Kuv(last, j) * uv.second[j]);
  }
  return uv.first[last] - h * s;
}

/// Adjoint of apply_transform: given weights (wa, wb) with
/// sum_i wa_i alpha_i + wb_i beta_i, returns (wu, wv) with the same value
/// as sum_j wu_j u_j + wv_j v_j.
inline FieldPair transform_adjoint(const FieldPair& wab, const KernelSet& k) {
  const std::size_t n = wab.first.size();
  const std::size_t last = n - 1;
  const double h = k.Kuu.h();
  FieldPair out{wab.first, wab.second};
  for (std::size_t i = 1; i < n; ++i) {
    const double wa = wab.first[i], wb = wab.second[i];
    if (wa == 0.0 && wb == 0.0) continue;
    for (std::size_t j = 0; j <= i; ++j) {
      const double wt = triangle_weight(Triangle::lower, i, j, last, h);
      out.first[j] -= wt * (wa * k.Kuu(i, j) + wb * k.Kvu(i, j));
      out.second[j] -= wt * (wa * k.Kuv(i, j) + wb * k.Kvv(i, j));
    }
  }
  return out;
}

/// (u~, v~) from the observer target coordinates: u~ = a - int_x^1 (Puu a + Puv b).
inline FieldPair apply_observer_transform(const FieldPair& ab, const ObserverKernelSet& pk) {
  return volterra_apply(ab, pk.Puu, pk.Puv, pk.Pvu, pk.Pvv, -1.0);
}

/// Inverse of apply_observer_transform, by backward marching from x = 1.
inline FieldPair invert_observer_transform(const FieldPair& uv, const ObserverKernelSet& pk) {
  using detail::Mat2;
  const std::size_t n = uv.first.size();
  const std::size_t last = n - 1;
  const double h = pk.Puu.h();
  auto pm = [&](std::size_t i, std::size_t j) { return Mat2{pk.Puu(i, j), pk.Puv(i, j), pk.Pvu(i, j), pk.Pvv(i, j)}; };
  FieldPair ab{Profile(n, 0.0), Profile(n, 0.0)};
  ab.first[last] = uv.first[last];
  ab.second[last] = uv.second[last];
  for (std::size_t i = last; i-- > 0;) {
    // (I - h/2 P(i,i)) a_i = w_i + sum_{s>i} wt_s P(i,s) a_s
    double r1 = uv.first[i], r2 = uv.second[i];
    for (std::size_t s = i + 1; s <= last; ++s) {
      const double wt = (s == last) ? 0.5 * h : h;
      const Mat2 m = pm(i, s);
      r1 += wt * (m.a * ab.first[s] + m.b * ab.second[s]);
      r2 += wt * (m.c * ab.first[s] + m.d * ab.second[s]);
    }
    const Mat2 pii = pm(i, i);
    const Mat2 inv = Mat2{1.0 - 0.5 * h * pii.a, -0.5 * h * pii.b, -0.5 * h * pii.c, 1.0 - 0.5 * h * pii.d}.inverse();
    ab.first[i] = inv.a * r1 + inv.b * r2;
    ab.second[i] = inv.c * r1 + inv.d * r2;
  }
  return ab;
}

}  // namespace hypreg

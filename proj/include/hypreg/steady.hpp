#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>

#include "hypreg/error.hpp"
#include "hypreg/grid.hpp"
#include "hypreg/kernels.hpp"
#include "hypreg/model.hpp"
#include "hypreg/signal.hpp"

namespace hypreg {

/// Target-system forcing D1M1(x), D2M2(x) at a fixed time, with first and
/// second time derivatives (empty when not requested).
struct ForcingProfiles {
  Profile D1M1, D2M2;
  Profile D1M1_t, D2M2_t;
  Profile D1M1_tt, D2M2_tt;
};

struct SteadyState {
  Profile alpha_ss, beta_ss;
  Profile alpha_ss_t, beta_ss_t;
  Profile alpha_ss_tt, beta_ss_tt;
  std::optional<double> eta_ss, eta_ss_t, eta_ss_tt;  // undefined when k_I = 0
};

struct ErrorState {
  Profile alpha_bar, beta_bar;
  double eta_bar = 0.0;
  double gamma = 0.0;
};

/// Pseudo-steady state as a linear map of the disturbance values.
///
/// For unit values of d1, d2, d3 the forcing profiles and steady profiles
/// are precomputed once; d4 only enters eta_ss. Values and time derivatives
/// at any t follow by combining the basis with (d_i, d_i', d_i'').
class SteadyModel {
 public:
  SteadyModel(const SystemParams& p, const KernelSet& k, const InverseKernelSet& l, const IntegralWeights& w,
              const ControlConfig& c, const Profile& m1, const Profile& m2)
      : grid_(p.grid), w_(w), c_(c) {
    const std::size_t n = grid_.size();
    const double h = grid_.h();
    const std::size_t last = grid_.last();
    if (m1.size() != n || m2.size() != n) throw ParameterError("SteadyModel: m1/m2 must be sampled on the grid");

    // Forcing basis: D1M1 = sum_i d_i f1[i], D2M2 = sum_i d_i f2[i], i = d1, d2, d3.
    for (auto& f : f1_) f.assign(n, 0.0);
    for (auto& f : f2_) f.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double kuu_m1 = 0, kuv_m2 = 0, kvu_m1 = 0, kvv_m2 = 0;
      for (std::size_t j = 0; j <= i; ++j) {
        const double wt = triangle_weight(Triangle::lower, i, j, last, h);
        kuu_m1 += wt * k.Kuu(i, j) * m1[j];
        kuv_m2 += wt * k.Kuv(i, j) * m2[j];
        kvu_m1 += wt * k.Kvu(i, j) * m1[j];
        kvv_m2 += wt * k.Kvv(i, j) * m2[j];
      }
      f1_[0][i] = m1[i] - kuu_m1;
      f1_[1][i] = -kuv_m2;
      f1_[2][i] = -k.Kuu(i, 0) * p.lambda[0];
      f2_[0][i] = -kvu_m1;
      f2_[1][i] = m2[i] - kvv_m2;
      f2_[2][i] = -k.Kvu(i, 0) * p.lambda[0];
    }

    const auto laa = l.Laa.row(last);
    const auto lab = l.Lab.row(last);
    const double int_laa = trapezoid(laa, h), int_lab = trapezoid(lab, h);
    const double a11 = 1.0 + int_laa, a12 = int_lab, a21 = -1.0 / p.q, a22 = 1.0;
    det_ = a11 * a22 - a12 * a21;
    if (!(std::abs(det_) >= 1e-10))
      throw ConfigurationError("pseudo-steady state: A1 is singular (det = " + std::to_string(det_) + ")");

    for (std::size_t b = 0; b < 3; ++b) {
      Profile g1(n), g2(n);
      for (std::size_t i = 0; i < n; ++i) {
        g1[i] = f1_[b][i] / p.lambda[i];
        g2[i] = f2_[b][i] / p.mu[i];
      }
      const Profile tail1 = reverse_cumulative_trapezoid(g1, h);  // int_x^1 D1M1/lambda
      const Profile head2 = cumulative_trapezoid(g2, h);          // int_0^x D2M2/mu
      Profile prod1(n), prod2(n);
      for (std::size_t i = 0; i < n; ++i) {
        prod1[i] = laa[i] * tail1[i];
        prod2[i] = lab[i] * head2[i];
      }
      const double b1 = trapezoid(prod1, h) + trapezoid(prod2, h);
      const double b2 = (b == 2 ? -1.0 / p.q : 0.0) - tail1[0] / p.q;
      const double x1 = (a22 * b1 - a12 * b2) / det_;
      const double x2 = (-a21 * b1 + a11 * b2) / det_;
      alpha_[b].resize(n);
      beta_[b].resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        alpha_[b][i] = x1 - tail1[i];
        beta_[b][i] = x2 - head2[i];
      }
      // eta_ss basis without the 1/k_I factor split: numerator and integral parts.
      num_[b] = beta_[b][last] - (p.rho - c.rho_tilde) * alpha_[b][last];
      Profile li(n);
      for (std::size_t i = 0; i < n; ++i) li[i] = w.l1[i] * alpha_[b][i] + w.l2[i] * beta_[b][i];
      int_[b] = trapezoid(li, h);
    }
  }

  const SpatialGrid& grid() const noexcept { return grid_; }
  double det_A1() const noexcept { return det_; }

  /// Forcing profiles at t. order = 0, 1 or 2 selects how many time
  /// derivatives are evaluated; derivatives of non-smooth signals throw.
  ForcingProfiles forcing(const DisturbanceSet& d, double t, int order = 0) const {
    ForcingProfiles out;
    out.D1M1 = combine(f1_, values(d, t, 0));
    out.D2M2 = combine(f2_, values(d, t, 0));
    if (order >= 1) {
      const auto v = values(d, t, 1);
      out.D1M1_t = combine(f1_, v);
      out.D2M2_t = combine(f2_, v);
    }
    if (order >= 2) {
      const auto v = values(d, t, 2);
      out.D1M1_tt = combine(f1_, v);
      out.D2M2_tt = combine(f2_, v);
    }
    return out;
  }

  SteadyState evaluate(const DisturbanceSet& d, double t, int order = 0) const {
    SteadyState s;
    auto fill = [&](int k, Profile& a, Profile& b, std::optional<double>& e) {
      const auto v = values(d, t, k);
      a = combine(alpha_, v);
      b = combine(beta_, v);
      e = eta_value(v, signal_value(d.d4, t, k));
    };
    fill(0, s.alpha_ss, s.beta_ss, s.eta_ss);
    if (order >= 1) fill(1, s.alpha_ss_t, s.beta_ss_t, s.eta_ss_t);
    if (order >= 2) fill(2, s.alpha_ss_tt, s.beta_ss_tt, s.eta_ss_tt);
    return s;
  }

  /// alpha_ss(1) and beta_ss(1) only (or their k-th time derivative).
  std::array<double, 2> end_values(const DisturbanceSet& d, double t, int k = 0) const {
    const auto v = values(d, t, k);
    const std::size_t last = grid_.last();
    double a = 0, b = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      a += v[i] * alpha_[i][last];
      b += v[i] * beta_[i][last];
    }
    return {a, b};
  }

  /// Basis profiles for unit d1, d2, d3 (index 0, 1, 2).
  const Profile& alpha_basis(std::size_t i) const { return alpha_[i]; }
  const Profile& beta_basis(std::size_t i) const { return beta_[i]; }

 private:
  static double signal_value(const TimeSignal& s, double t, int k) {
    if (k == 0) return s.value(t);
    if (s.is_constant()) return 0.0;
    return k == 1 ? s.derivative(t) : s.second_derivative(t);
  }

  static std::array<double, 3> values(const DisturbanceSet& d, double t, int k) {
    return {signal_value(d.d1, t, k), signal_value(d.d2, t, k), signal_value(d.d3, t, k)};
  }

  Profile combine(const std::array<Profile, 3>& basis, const std::array<double, 3>& v) const {
    Profile out(grid_.size(), 0.0);
    for (std::size_t b = 0; b < 3; ++b)
      if (v[b] != 0.0)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[b] * basis[b][i];
    return out;
  }

  std::optional<double> eta_value(const std::array<double, 3>& v, double d4) const {
    if (c_.k_I == 0.0) return std::nullopt;
    double num = -d4, integral = 0.0;
    for (std::size_t b = 0; b < 3; ++b) {
      num += v[b] * num_[b];
      integral += v[b] * int_[b];
    }
    return num / c_.k_I + integral;
  }

  SpatialGrid grid_;
  IntegralWeights w_;
  ControlConfig c_;
  double det_ = 1.0;
  std::array<Profile, 3> f1_, f2_, alpha_, beta_;
  std::array<double, 3> num_{}, int_{};
};

/// D1M1, D2M2 and their time derivatives at t, straight from the kernels.
inline ForcingProfiles forcing_profiles(const DisturbanceSet& d, const KernelSet& k, const SystemParams& p, double t,
                                        int order = 2) {
  const auto& g = p.grid;
  const std::size_t n = g.size(), last = g.last();
  const double h = g.h();
  auto at = [&](int ord, Profile& o1, Profile& o2) {
    auto val = [&](const TimeSignal& s) {
      if (ord == 0) return s.value(t);
      if (s.is_constant()) return 0.0;
      return ord == 1 ? s.derivative(t) : s.second_derivative(t);
    };
    const double d1 = val(d.d1), d2 = val(d.d2), d3 = val(d.d3);
    o1.assign(n, 0.0);
    o2.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s1 = 0, s2 = 0;
      for (std::size_t j = 0; j <= i; ++j) {
        const double wt = triangle_weight(Triangle::lower, i, j, last, h);
        s1 += wt * (k.Kuu(i, j) * d1 * d.m1[j] + k.Kuv(i, j) * d2 * d.m2[j]);
        s2 += wt * (k.Kvu(i, j) * d1 * d.m1[j] + k.Kvv(i, j) * d2 * d.m2[j]);
      }
      o1[i] = d1 * d.m1[i] - k.Kuu(i, 0) * p.lambda[0] * d3 - s1;
      o2[i] = d2 * d.m2[i] - k.Kvu(i, 0) * p.lambda[0] * d3 - s2;
    }
  };
  ForcingProfiles f;
  at(0, f.D1M1, f.D2M2);
  if (order >= 1) at(1, f.D1M1_t, f.D2M2_t);
  if (order >= 2) at(2, f.D1M1_tt, f.D2M2_tt);
  return f;
}

inline SteadyState solve_pseudo_steady(const SystemParams& p, const KernelSet& k, const InverseKernelSet& l,
                                       const IntegralWeights& w, const ControlConfig& c, const DisturbanceSet& d,
                                       double t, int order = 0) {
  return SteadyModel(p, k, l, w, c, d.m1, d.m2).evaluate(d, t, order);
}

/// alpha_bar = alpha - alpha_ss, ..., gamma = eta_bar - int (l1 alpha_bar + l2 beta_bar).
inline ErrorState error_variables(const Profile& alpha, const Profile& beta, double eta, const SteadyState& ss,
                                  const IntegralWeights& w, double h) {
  ErrorState e;
  const std::size_t n = alpha.size();
  e.alpha_bar.resize(n);
  e.beta_bar.resize(n);
  Profile integrand(n);
  for (std::size_t i = 0; i < n; ++i) {
    e.alpha_bar[i] = alpha[i] - ss.alpha_ss[i];
    e.beta_bar[i] = beta[i] - ss.beta_ss[i];
    integrand[i] = w.l1[i] * e.alpha_bar[i] + w.l2[i] * e.beta_bar[i];
  }
  e.eta_bar = eta - ss.eta_ss.value_or(0.0);
  e.gamma = e.eta_bar - trapezoid(integrand, h);
  return e;
}

}  // namespace hypreg

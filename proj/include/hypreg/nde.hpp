#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "hypreg/error.hpp"
#include "hypreg/kernels.hpp"
#include "hypreg/model.hpp"
#include "hypreg/signal.hpp"
#include "hypreg/steady.hpp"

namespace hypreg {

/// z'(t) = k1 z'(t - tau) + k2 z(t - tau) + K(t)
struct FeedbackGains {
  double k1 = 0.0;
  double k2 = 0.0;
  double tau = 0.0;
};

struct StabilityReport {
  bool stable = false;
  double tau0 = std::numeric_limits<double>::infinity();
  double omega_star = 0.0;
  double s0_estimate = -std::numeric_limits<double>::infinity();
  double margin = 0.0;  // tau0 - tau
  std::vector<std::complex<double>> roots;
  std::string note;
};

inline FeedbackGains effective_gains(const SystemParams& p, const ControlConfig& c, const IntegralWeights& w,
                                     const TransportMaps& maps) {
  return {(p.rho - c.rho_tilde) * p.q, c.k_I * p.q * w.boundary_factor, maps.tau};
}

namespace detail {
inline void check_tau0_domain(double k1, double k2, const char* who) {
  if (k2 == 0.0) throw DomainError(std::string(who) + ": k2 must be nonzero");
  if (!(k2 < 0.0)) throw DomainError(std::string(who) + ": k2 must be negative");
  if (!(std::abs(k1) < 1.0)) throw DomainError(std::string(who) + ": |k1| must be < 1");
}
}  // namespace detail

/// Largest stabilizing delay, three-branch closed form. In the k1 in (0, 1)
/// branch the arctan argument is sqrt(1 - k1^2) / k1.
inline double tau0_formula(double k1, double k2) {
  detail::check_tau0_domain(k1, k2, "tau0_formula");
  const double c = std::sqrt(1.0 - k1 * k1);
  const double a = std::abs(k2);
  if (k1 < 0.0) return c / a * (std::numbers::pi - std::atan(c / std::abs(k1)));
  if (k1 == 0.0) return std::numbers::pi / (2.0 * a);
  return c / a * std::atan(c / k1);
}

inline double crossing_frequency(double k1, double k2) { return std::abs(k2) / std::sqrt(1.0 - k1 * k1); }

/// Smallest tau > 0 at which s = i omega* solves s = (k1 s + k2) exp(-s tau).
inline double tau0_oracle(double k1, double k2) {
  detail::check_tau0_domain(k1, k2, "tau0_oracle");
  const double w = crossing_frequency(k1, k2);
  const std::complex<double> iw(0.0, w);
  const std::complex<double> z = iw / (k1 * iw + k2);
  double phase = std::fmod(-std::arg(z) + 4.0 * std::numbers::pi, 2.0 * std::numbers::pi);
  if (phase <= 0.0) phase += 2.0 * std::numbers::pi;
  return phase / w;
}

struct ScanRegion {
  double re_min = 0.0, re_max = 0.0, im_max = 0.0;
  int n_re = 40, n_im = 80;

  static ScanRegion for_delay(double tau) {
    return {-5.0 / tau, 2.0 / tau, 20.0 * std::numbers::pi / tau, 40, 80};
  }
};

struct RootScan {
  double s0 = -std::numeric_limits<double>::infinity();
  std::vector<std::complex<double>> roots;
};

/// Roots of s - (k1 s + k2) e^{-s tau} in the scan rectangle (upper half plane),
/// by damped Newton from a grid of seeds. An estimate, not a certificate.
inline RootScan spectral_abscissa(const FeedbackGains& g, std::optional<ScanRegion> region = std::nullopt) {
  if (g.k2 == 0.0) throw ParameterError("spectral_abscissa: k2 must be nonzero");
  if (!(g.tau > 0.0)) throw ParameterError("spectral_abscissa: tau must be positive");
  const ScanRegion r = region.value_or(ScanRegion::for_delay(g.tau));
  if (!(r.re_max > r.re_min) || !(r.im_max > 0.0) || r.n_re < 1 || r.n_im < 1)
    throw ParameterError("spectral_abscissa: degenerate scan region");
  using C = std::complex<double>;
  const double k1 = g.k1, k2 = g.k2, tau = g.tau;
  auto f = [&](C s) { return s - (k1 * s + k2) * std::exp(-s * tau); };
  auto df = [&](C s) {
    const C e = std::exp(-s * tau);
    return 1.0 - k1 * e + tau * (k1 * s + k2) * e;
  };
  const double scale = std::max({std::abs(r.re_min), r.re_max, r.im_max, 1.0});
  const double dedup = 1e-6 * scale;
  RootScan out;
  for (int a = 0; a < r.n_re; ++a)
    for (int b = 0; b < r.n_im; ++b) {
      C s(r.re_min + (a + 0.5) * (r.re_max - r.re_min) / r.n_re, (b + 0.5) * r.im_max / r.n_im);
      bool converged = false;
      for (int it = 0; it < 80; ++it) {
        const C fs = f(s);
        const C d = df(s);
        if (std::abs(d) == 0.0) break;
        C step = fs / d;
        double damp = 1.0;
        // Backtrack until the residual decreases.
        for (int k = 0; k < 20; ++k) {
          if (std::abs(f(s - damp * step)) < std::abs(fs) || damp < 1e-4) break;
          damp *= 0.5;
        }
        s -= damp * step;
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) break;
        if (std::abs(damp * step) < 1e-13 * std::max(1.0, std::abs(s))) {
          converged = std::abs(f(s)) < 1e-9 * std::max(1.0, std::abs(s));
          break;
        }
      }
      if (!converged) continue;
      if (s.imag() < 0.0) s = std::conj(s);
      const double pad_re = 0.05 * (r.re_max - r.re_min), pad_im = 0.05 * r.im_max;
      if (s.real() < r.re_min - pad_re || s.real() > r.re_max + pad_re || s.imag() > r.im_max + pad_im) continue;
      const bool seen = std::any_of(out.roots.begin(), out.roots.end(), [&](C q) { return std::abs(q - s) < dedup; });
      if (!seen) out.roots.push_back(s);
    }
  std::sort(out.roots.begin(), out.roots.end(), [](C a, C b) { return a.real() > b.real(); });
  if (!out.roots.empty()) out.s0 = out.roots.front().real();
  return out;
}

/// Stability predicate |k1| < 1, k2 < 0, 0 < tau < tau0, plus the root scan.
inline StabilityReport analyze_stability(const FeedbackGains& g, bool scan = true) {
  StabilityReport r;
  if (g.k2 == 0.0) {
    r.note = "k2 = 0: delay stability criterion does not apply";
  } else if (std::abs(g.k1) < 1.0 && g.k2 < 0.0) {
    r.tau0 = tau0_formula(g.k1, g.k2);
    r.omega_star = crossing_frequency(g.k1, g.k2);
    r.margin = r.tau0 - g.tau;
    r.stable = g.tau > 0.0 && g.tau < r.tau0;
  } else {
    r.tau0 = 0.0;
    r.margin = -g.tau;
    r.note = std::abs(g.k1) >= 1.0 ? "|k1| >= 1" : "k2 > 0";
  }
  if (scan && g.k2 != 0.0 && g.tau > 0.0) {
    auto rs = spectral_abscissa(g);
    r.s0_estimate = rs.s0;
    r.roots = std::move(rs.roots);
  }
  return r;
}

struct GainSelection {
  double k_I = 0.0;
  FeedbackGains gains;
  StabilityReport report;
};

/// Picks k_I so that k2 = k_I q b < 0 and tau = safety_margin * tau0(k1, k2),
/// with b = 1 + l1(1) lambda(1).
inline GainSelection select_kI(double k1, double q, double boundary_factor, double tau, double safety_margin,
                               bool scan = true) {
  if (!(safety_margin > 0.0 && safety_margin < 1.0))
    throw ParameterError("select_kI: safety margin must lie in (0, 1)");
  if (!(tau > 0.0)) throw ParameterError("select_kI: tau must be positive");
  if (q == 0.0) throw ParameterError("select_kI: q must be nonzero");
  if (std::abs(boundary_factor) < kBoundaryFactorThreshold)
    throw ConfigurationError("select_kI: 1 + l1(1) lambda(1) vanishes");
  if (!(std::abs(k1) < 1.0)) throw ConfigurationError("select_kI: |k1| must be < 1");
  // tau0 scales as 1/|k2|.
  const double k2_abs = safety_margin * tau0_formula(k1, -1.0) / tau;
  const double qb = q * boundary_factor;
  GainSelection s;
  s.k_I = -(qb > 0.0 ? 1.0 : -1.0) * k2_abs / std::abs(qb);
  s.gains = {k1, s.k_I * qb, tau};
  s.report = analyze_stability(s.gains, scan);
  return s;
}

inline GainSelection select_kI(const SystemParams& p, const IntegralWeights& w, const TransportMaps& maps,
                               double rho_tilde, double safety_margin, bool scan = true) {
  return select_kI((p.rho - rho_tilde) * p.q, p.q, w.boundary_factor, maps.tau, safety_margin, scan);
}

struct NDETrace {
  double dt = 0.0;
  std::vector<double> t, z, zdot, K;
};

/// How the neutral term k1 z'(t - tau) enters the step.
///   derivative: trapezoid on the stored z' history (default).
///   increments: k1 (z(t - tau) - z(t - tau - dt)); same order on smooth data,
///               carries jumps of z across a delay exactly.
enum class NeutralForm { derivative, increments };

/// Method of steps on a uniform grid t_n = n dt, dt = tau / m:
/// z'_n = k1 z'_{n-m} + k2 z_{n-m} + K(t_n), z advanced by the trapezoid rule.
/// History functions are sampled on [-tau, 0].
inline NDETrace simulate_nde(const FeedbackGains& g, const std::function<double(double)>& forcing,
                             const std::function<double(double)>& z_hist, const std::function<double(double)>& zdot_hist,
                             double horizon, double dt, NeutralForm form = NeutralForm::derivative) {
  if (!(dt > 0.0) || !(g.tau > 0.0)) throw ParameterError("simulate_nde: need dt > 0 and tau > 0");
  const double ratio = g.tau / dt;
  const auto m = static_cast<std::size_t>(std::llround(ratio));
  if (m == 0 || std::abs(ratio - static_cast<double>(m)) > 1e-9 * std::max(1.0, ratio))
    throw ParameterError("simulate_nde: dt must divide tau");
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  // z' generally jumps at t = 0 (the history need not solve the equation) and
  // the jump recurs at every multiple of tau, so left and right limits are kept
  // apart: the step over [t_{i-1}, t_i] uses the right limit at t_{i-1}.
  std::vector<double> z(m + steps + 1), zl(m + steps + 1), zr(m + steps + 1);
  for (std::size_t k = 0; k <= m; ++k) {
    const double t = -g.tau + static_cast<double>(k) * dt;
    z[k] = z_hist(t);
    zl[k] = zr[k] = zdot_hist(t);
  }
  double k_prev = forcing(0.0);
  zr[m] = g.k1 * zr[0] + g.k2 * z[0] + k_prev;
  NDETrace tr;
  tr.dt = dt;
  tr.t.reserve(steps + 1);
  tr.t.push_back(0.0);
  tr.K.push_back(k_prev);
  for (std::size_t n = 1; n <= steps; ++n) {
    const std::size_t i = m + n;
    const double t = static_cast<double>(n) * dt;
    const double kf = forcing(t);
    zl[i] = g.k1 * zl[i - m] + g.k2 * z[i - m] + kf;
    zr[i] = g.k1 * zr[i - m] + g.k2 * z[i - m] + kf;
    if (form == NeutralForm::derivative) {
      z[i] = z[i - 1] + 0.5 * dt * (zr[i - 1] + zl[i]);
    } else {
      z[i] = z[i - 1] + g.k1 * (z[i - m] - z[i - m - 1]) +
             0.5 * dt * (g.k2 * (z[i - m - 1] + z[i - m]) + k_prev + kf);
    }
    k_prev = kf;
    if (!std::isfinite(z[i])) throw DivergenceError("simulate_nde: non-finite state", t - dt);
    tr.t.push_back(t);
    tr.K.push_back(kf);
  }
  tr.z.assign(z.begin() + static_cast<std::ptrdiff_t>(m), z.end());
  tr.zdot.assign(zr.begin() + static_cast<std::ptrdiff_t>(m), zr.end());
  return tr;
}

enum class Growth { decays, grows, inconclusive };

/// Ratio of sup|z| over the last window of length `window` to the one before.
inline double window_ratio(const std::vector<double>& t, const std::vector<double>& z, double window) {
  const double end = t.back();
  double last = 0.0, prev = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] > end - window) last = std::max(last, std::abs(z[i]));
    else if (t[i] > end - 2.0 * window) prev = std::max(prev, std::abs(z[i]));
  }
  if (prev == 0.0) return last == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return last / prev;
}

inline Growth classify_growth(double ratio) {
  if (ratio < 0.95) return Growth::decays;
  if (ratio > 1.05) return Growth::grows;
  return Growth::inconclusive;
}

inline const char* to_string(Growth g) {
  switch (g) {
    case Growth::decays:
      return "decays";
    case Growth::grows:
      return "grows";
    default:
      return "inconclusive";
  }
}

/// Forcing of the boundary delay equation built from the disturbance model:
///   K(t) = k_I q n(t - tau) - q c'(t - tau)
///          - q int_0^1 beta_ss_tt(xi, t - tau1 - phi2(xi)) / mu(xi) dxi
///          - int_0^1 alpha_ss_tt(xi, t - (tau1 - phi1(xi))) / lambda(xi) dxi
/// with c(t) = beta_ss(t,1) - (rho - rho_tilde) alpha_ss(t,1) - d4(t).
class NdeForcing {
 public:
  NdeForcing(const SystemParams& p, const ControlConfig& c, const TransportMaps& maps, const SteadyModel& model,
             DisturbanceSet d)
      : p_(p), c_(c), maps_(maps), model_(model), d_(std::move(d)) {
    for (const auto* s : {&d_.d1, &d_.d2, &d_.d3, &d_.d4})
      if (!s->smooth()) throw SignalError("NDE forcing needs twice differentiable disturbances");
    const std::size_t n = p_.grid.size();
    wa_.resize(n);
    wb_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double wt = triangle_weight(Triangle::lower, p_.grid.last(), i, p_.grid.last(), p_.grid.h());
      wa_[i] = wt / p_.lambda[i];
      wb_[i] = wt / p_.mu[i];
    }
  }

  double operator()(double t) const {
    const double tau = maps_.tau;
    const double s = t - tau;
    const auto ends = model_.end_values(d_, s, 1);
    const double d4t = d_.d4.is_constant() ? 0.0 : d_.d4.derivative(s);
    const double cdot = ends[1] - (p_.rho - c_.rho_tilde) * ends[0] - d4t;
    double k = c_.k_I * p_.q * d_.n(s) - p_.q * cdot;
    if (d_.d1.is_constant() && d_.d2.is_constant() && d_.d3.is_constant()) return k;
    double ia = 0.0, ib = 0.0;
    const std::size_t n = p_.grid.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double tb = t - maps_.tau1 - maps_.phi2[i];
      const double ta = t - maps_.u_time_to_end(i);
      ib += wb_[i] * point_tt(1, i, tb);
      ia += wa_[i] * point_tt(0, i, ta);
    }
    return k - p_.q * ib - ia;
  }

 private:
  // Second time derivative of alpha_ss (which = 0) or beta_ss (which = 1) at node i.
  double point_tt(int which, std::size_t i, double t) const {
    const double v[3] = {dd(d_.d1, t), dd(d_.d2, t), dd(d_.d3, t)};
    double acc = 0.0;
    for (std::size_t b = 0; b < 3; ++b)
      acc += v[b] * (which == 0 ? model_.alpha_basis(b)[i] : model_.beta_basis(b)[i]);
    return acc;
  }
  static double dd(const TimeSignal& s, double t) { return s.is_constant() ? 0.0 : s.second_derivative(t); }

  SystemParams p_;
  ControlConfig c_;
  TransportMaps maps_;
  SteadyModel model_;
  DisturbanceSet d_;
  Profile wa_, wb_;
};

}  // namespace hypreg

#pragma once

#include <cmath>

#include "hypreg/grid.hpp"
#include "hypreg/kernels.hpp"
#include "hypreg/model.hpp"

namespace hypreg {

/// observer_only: U = 0 while the observer runs on the measurement.
enum class ControlMode { open_loop, state_feedback, output_feedback, observer_only };

struct ControllerState {
  double eta = 0.0;
  double last_measurement = 0.0;
  ControlMode mode = ControlMode::state_feedback;
};

namespace detail {
inline double weighted_row(std::span<const double> row, std::span<const double> f, double h) {
  double s = 0.0;
  const std::size_t last = f.size() - 1;
  for (std::size_t j = 0; j <= last; ++j) s += ((j == 0 || j == last) ? 0.5 : 1.0) * row[j] * f[j];
  return h * s;
}
}  // namespace detail

/// U_BS = -rho_tilde alpha(1) - rho int (Laa(1,.) alpha + Lab(1,.) beta)
///        + int (Lba(1,.) alpha + Lbb(1,.) beta) - k_I int (l1 alpha + l2 beta),
/// with (alpha, beta) the transformed state.
inline double state_feedback_ubs(const Profile& u, const Profile& v, const KernelSet& k, const InverseKernelSet& l,
                                 const IntegralWeights& w, const SystemParams& p, const ControlConfig& c) {
  const auto ab = apply_transform({u, v}, k);
  const std::size_t last = p.grid.last();
  const double h = p.grid.h();
  const double ia = detail::weighted_row(l.Laa.row(last), ab.first, h) + detail::weighted_row(l.Lab.row(last), ab.second, h);
  const double ib = detail::weighted_row(l.Lba.row(last), ab.first, h) + detail::weighted_row(l.Lbb.row(last), ab.second, h);
  const double il = detail::weighted_row(w.l1, ab.first, h) + detail::weighted_row(w.l2, ab.second, h);
  return -c.rho_tilde * ab.first[last] - p.rho * ia + ib - c.k_I * il;
}

/// Observer-based law:
///   U_BS = -rho_tilde (1-eps) uhat(1) - rho_tilde eps y_m
///          - (rho - rho_tilde) int (Kuu(1,.) uhat + Kuv(1,.) vhat)
///          + int (Kvu(1,.) uhat + Kvv(1,.) vhat)
///          - k_I int (l1 Gamma1[uhat, vhat] + l2 Gamma2[uhat, vhat]).
inline double output_feedback_ubs(const Profile& uhat, const Profile& vhat, double y_m, const KernelSet& k,
                                  const IntegralWeights& w, const SystemParams& p, const ControlConfig& c) {
  const std::size_t last = p.grid.last();
  const double h = p.grid.h();
  const double eps = c.epsilon;
  const double iu = detail::weighted_row(k.Kuu.row(last), uhat, h) + detail::weighted_row(k.Kuv.row(last), vhat, h);
  const double iv = detail::weighted_row(k.Kvu.row(last), uhat, h) + detail::weighted_row(k.Kvv.row(last), vhat, h);
  const auto ab = apply_transform({uhat, vhat}, k);
  const double il = detail::weighted_row(w.l1, ab.first, h) + detail::weighted_row(w.l2, ab.second, h);
  return -c.rho_tilde * (1.0 - eps) * uhat[last] - c.rho_tilde * eps * y_m - (p.rho - c.rho_tilde) * iu + iv -
         c.k_I * il;
}

/// eta += dt (y_prev + y) / 2
inline ControllerState integrator_step(ControllerState s, double y_m, double dt) {
  s.eta += 0.5 * dt * (s.last_measurement + y_m);
  s.last_measurement = y_m;
  return s;
}

inline double total_control(double ubs, double eta, double k_I) { return ubs + k_I * eta; }

/// A control law reduced to weights on the nodal state: U_BS = <wu, u> + <wv, v> + c_y y_m.
/// Built once per design; each evaluation is a pair of dot products.
struct LinearFunctional {
  Profile wu, wv;
  double c_y = 0.0;

  double operator()(const Profile& u, const Profile& v, double y_m = 0.0) const {
    double s = c_y * y_m;
    for (std::size_t i = 0; i < wu.size(); ++i) s += wu[i] * u[i] + wv[i] * v[i];
    return s;
  }
};

namespace detail {
inline Profile trapezoid_weights(const Profile& f, double h) {
  Profile out(f.size());
  const std::size_t last = f.size() - 1;
  for (std::size_t j = 0; j <= last; ++j) out[j] = ((j == 0 || j == last) ? 0.5 : 1.0) * h * f[j];
  return out;
}
inline Profile row_weights(const TriangularField& k, std::size_t row, double scale, double h) {
  const auto r = k.row(row);
  Profile f(r.begin(), r.end());
  for (double& x : f) x *= scale;
  return trapezoid_weights(f, h);
}
inline void axpy(Profile& y, const Profile& x, double a = 1.0) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}
}  // namespace detail

inline LinearFunctional compile_state_feedback(const KernelSet& k, const InverseKernelSet& l, const IntegralWeights& w,
                                               const SystemParams& p, const ControlConfig& c) {
  const std::size_t n = p.grid.size(), last = p.grid.last();
  const double h = p.grid.h();
  FieldPair wab{Profile(n, 0.0), Profile(n, 0.0)};
  wab.first[last] -= c.rho_tilde;
  detail::axpy(wab.first, detail::row_weights(l.Laa, last, -p.rho, h));
  detail::axpy(wab.second, detail::row_weights(l.Lab, last, -p.rho, h));
  detail::axpy(wab.first, detail::row_weights(l.Lba, last, 1.0, h));
  detail::axpy(wab.second, detail::row_weights(l.Lbb, last, 1.0, h));
  detail::axpy(wab.first, detail::trapezoid_weights(w.l1, h), -c.k_I);
  detail::axpy(wab.second, detail::trapezoid_weights(w.l2, h), -c.k_I);
  const auto wuv = transform_adjoint(wab, k);
  return {wuv.first, wuv.second, 0.0};
}

inline LinearFunctional compile_output_feedback(const KernelSet& k, const IntegralWeights& w, const SystemParams& p,
                                                const ControlConfig& c) {
  const std::size_t last = p.grid.last();
  const double h = p.grid.h();
  FieldPair wab{detail::trapezoid_weights(w.l1, h), detail::trapezoid_weights(w.l2, h)};
  for (double& x : wab.first) x *= -c.k_I;
  for (double& x : wab.second) x *= -c.k_I;
  auto f = transform_adjoint(wab, k);
  const double rr = p.rho - c.rho_tilde;
  detail::axpy(f.first, detail::row_weights(k.Kuu, last, -rr, h));
  detail::axpy(f.second, detail::row_weights(k.Kuv, last, -rr, h));
  detail::axpy(f.first, detail::row_weights(k.Kvu, last, 1.0, h));
  detail::axpy(f.second, detail::row_weights(k.Kvv, last, 1.0, h));
  f.first[last] -= c.rho_tilde * (1.0 - c.epsilon);
  return {f.first, f.second, -c.rho_tilde * c.epsilon};
}

}  // namespace hypreg

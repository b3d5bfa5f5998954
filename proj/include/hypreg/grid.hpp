#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "hypreg/error.hpp"

namespace hypreg {

/// Nodal samples of a function of x on the shared grid.
using Profile = std::vector<double>;

/// Uniform grid on [0, 1] with `n_cells` cells and `n_cells + 1` nodes.
class SpatialGrid {
 public:
  explicit SpatialGrid(std::size_t n_cells) : n_cells_(n_cells) {
    if (n_cells < 2) throw ParameterError("SpatialGrid: need at least 2 cells");
    h_ = 1.0 / static_cast<double>(n_cells);
    nodes_.resize(n_cells + 1);
    for (std::size_t i = 0; i <= n_cells; ++i) nodes_[i] = static_cast<double>(i) * h_;
    nodes_.back() = 1.0;
  }

  std::size_t n_cells() const noexcept { return n_cells_; }
  std::size_t size() const noexcept { return n_cells_ + 1; }
  std::size_t last() const noexcept { return n_cells_; }
  double h() const noexcept { return h_; }
  double node(std::size_t i) const { return nodes_[i]; }
  const std::vector<double>& nodes() const noexcept { return nodes_; }

  template <typename F>
  Profile sample(F&& f) const {
    Profile out(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] = f(nodes_[i]);
    return out;
  }

  Profile constant(double value) const { return Profile(size(), value); }

  /// Linear interpolation of nodal values at x, clamped to [0, 1].
  double interpolate(std::span<const double> values, double x) const {
    const double s = std::clamp(x, 0.0, 1.0) / h_;
    auto i = static_cast<std::size_t>(s);
    if (i >= n_cells_) return values[n_cells_];
    const double w = s - static_cast<double>(i);
    return (1.0 - w) * values[i] + w * values[i + 1];
  }

  bool operator==(const SpatialGrid& other) const noexcept { return n_cells_ == other.n_cells_; }

 private:
  std::size_t n_cells_;
  double h_;
  std::vector<double> nodes_;
};

/// Composite trapezoid of nodal values over nodes [first, last].
inline double trapezoid(std::span<const double> f, double h, std::size_t first, std::size_t last) {
  if (last <= first) return 0.0;
  double acc = 0.5 * (f[first] + f[last]);
  for (std::size_t k = first + 1; k < last; ++k) acc += f[k];
  return acc * h;
}

inline double trapezoid(std::span<const double> f, double h) {
  return f.empty() ? 0.0 : trapezoid(f, h, 0, f.size() - 1);
}

/// Running trapezoid integral from x = 0: out[i] = int_0^{x_i} f.
inline Profile cumulative_trapezoid(std::span<const double> f, double h) {
  Profile out(f.size(), 0.0);
  for (std::size_t i = 1; i < f.size(); ++i) out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
  return out;
}

/// Running trapezoid integral towards x = 1: out[i] = int_{x_i}^1 f.
inline Profile reverse_cumulative_trapezoid(std::span<const double> f, double h) {
  Profile out(f.size(), 0.0);
  for (std::size_t i = f.size() - 1; i-- > 0;) out[i] = out[i + 1] + 0.5 * h * (f[i] + f[i + 1]);
  return out;
}

/// Second-order finite-difference derivative (one-sided at the ends).
inline Profile derivative(std::span<const double> f, double h) {
  const std::size_t n = f.size();
  Profile out(n, 0.0);
  if (n < 3) {
    if (n == 2) out[0] = out[1] = (f[1] - f[0]) / h;
    return out;
  }
  out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
  out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
  return out;
}

inline double sup_norm(std::span<const double> f) {
  double m = 0.0;
  for (double v : f) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool all_finite(std::span<const double> f) {
  return std::all_of(f.begin(), f.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace hypreg

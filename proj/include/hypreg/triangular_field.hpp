#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "hypreg/grid.hpp"

namespace hypreg {

/// lower: T = {0 <= xi <= x <= 1} (controller and inverse kernels).
/// upper: {0 <= x <= xi <= 1} (observer kernels).
enum class Triangle { lower, upper };

/// A kernel K(x, xi) sampled on the grid nodes of a triangle. Storage is a
/// dense square; entries outside the triangle stay zero.
class TriangularField {
 public:
  TriangularField() = default;
  TriangularField(const SpatialGrid& grid, Triangle tri)
      : n_(grid.size()), h_(grid.h()), tri_(tri), data_(n_ * n_, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double h() const noexcept { return h_; }
  Triangle orientation() const noexcept { return tri_; }

  bool contains(std::size_t i, std::size_t j) const noexcept { return tri_ == Triangle::lower ? j <= i : j >= i; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

  /// Values along xi at fixed x_i (zero outside the triangle).
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * n_, n_}; }

  Profile column(std::size_t j) const {
    Profile c(n_);
    for (std::size_t i = 0; i < n_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  /// Piecewise-linear interpolation on the grid cells split along the main
  /// diagonal; points outside the triangle are projected onto it.
  double sample(double x, double xi) const {
    x = std::clamp(x, 0.0, 1.0);
    xi = std::clamp(xi, 0.0, 1.0);
    if (tri_ == Triangle::lower) xi = std::min(xi, x);
    else xi = std::max(xi, x);
    const std::size_t last = n_ - 1;
    const double sx = x / h_, sxi = xi / h_;
    const std::size_t i = std::min(static_cast<std::size_t>(sx), last - 1);
    const std::size_t j = std::min(static_cast<std::size_t>(sxi), last - 1);
    double a = sx - static_cast<double>(i);
    double b = sxi - static_cast<double>(j);
    if (i == j) {
      // Diagonal cell: only the half inside the triangle is valid.
      if (tri_ == Triangle::lower) b = std::min(b, a);
      else b = std::max(b, a);
    }
    const auto& f = *this;
    if (b <= a) return (1.0 - a) * f(i, j) + (a - b) * f(i + 1, j) + b * f(i + 1, j + 1);
    return (1.0 - b) * f(i, j) + (b - a) * f(i, j + 1) + a * f(i + 1, j + 1);
  }

  double sup_norm() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  bool all_finite() const { return hypreg::all_finite(data_); }

  friend double max_abs_diff(const TriangularField& a, const TriangularField& b) {
    return hypreg::max_abs_diff(a.data_, b.data_);
  }

 private:
  std::size_t n_ = 0;
  double h_ = 0.0;
  Triangle tri_ = Triangle::lower;
  std::vector<double> data_;
};

/// Trapezoid weight of node j in int_0^{x_i} (lower) or int_{x_i}^1 (upper).
inline double triangle_weight(Triangle tri, std::size_t i, std::size_t j, std::size_t last, double h) {
  const std::size_t lo = tri == Triangle::lower ? 0 : i;
  const std::size_t hi = tri == Triangle::lower ? i : last;
  if (hi == lo) return 0.0;
  return (j == lo || j == hi) ? 0.5 * h : h;
}

}  // namespace hypreg

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "hypreg/error.hpp"
#include "hypreg/grid.hpp"

namespace hypreg {

namespace signals {

struct Constant {
  double value = 0.0;
};

/// amplitude * 1{t >= start}. Not differentiable.
struct Step {
  double amplitude = 1.0;
  double start = 0.0;
};

/// amplitude on [start, start + width), zero elsewhere. Not differentiable.
struct Pulse {
  double amplitude = 1.0;
  double start = 0.0;
  double width = 0.0;
};

/// offset + amplitude * sin(omega t + phase)
struct Sinusoid {
  double amplitude = 1.0;
  double omega = 1.0;
  double phase = 0.0;
  double offset = 0.0;
};

/// Uniform noise in [-amplitude, amplitude], held piecewise constant over
/// intervals of length `hold`. Stateless: sample k is a hash of (seed, k).
struct UniformNoise {
  double amplitude = 0.0;
  double hold = 1e-3;
  std::uint64_t seed = 0;
};

/// Smooth random signal: a seeded sum of sinusoids with random phases and
/// frequencies in (0, max_omega], scaled so that |value| <= amplitude.
struct SmoothRandom {
  double amplitude = 1.0;
  double max_omega = 1.0;
  int modes = 8;
  std::uint64_t seed = 0;
  std::vector<double> omegas{};
  std::vector<double> phases{};
  std::vector<double> weights{};
};

/// Uniformly sampled values starting at t = 0, linear interpolation,
/// clamped at both ends. Not differentiable.
struct Samples {
  double dt = 1.0;
  std::vector<double> values{};
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Deterministic uniform sample in [0, 1) for (seed, index).
inline double unit_hash(std::uint64_t seed, std::int64_t index) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace signals

/// A scalar signal t -> R. Smooth generators expose analytic first and
/// second derivatives; the others throw SignalError when asked.
class TimeSignal {
 public:
  using Generator = std::variant<signals::Constant, signals::Step, signals::Pulse, signals::Sinusoid,
                                 signals::UniformNoise, signals::SmoothRandom, signals::Samples>;

  TimeSignal() : gen_(signals::Constant{0.0}) {}
  TimeSignal(Generator g) : gen_(std::move(g)) {  // NOLINT(google-explicit-constructor)
    if (auto* r = std::get_if<signals::SmoothRandom>(&gen_)) init_random(*r);
    if (auto* n = std::get_if<signals::UniformNoise>(&gen_); n && !(n->hold > 0.0))
      throw ParameterError("UniformNoise: hold must be positive");
    if (auto* s = std::get_if<signals::Samples>(&gen_); s && (!(s->dt > 0.0) || s->values.empty()))
      throw ParameterError("Samples: need positive dt and at least one value");
  }

  static TimeSignal constant(double v) { return TimeSignal(signals::Constant{v}); }
  static TimeSignal zero() { return constant(0.0); }
  static TimeSignal sinusoid(double amplitude, double omega, double phase = 0.0, double offset = 0.0) {
    return TimeSignal(signals::Sinusoid{amplitude, omega, phase, offset});
  }
  static TimeSignal noise(double amplitude, double hold, std::uint64_t seed) {
    return TimeSignal(signals::UniformNoise{amplitude, hold, seed});
  }

  double operator()(double t) const { return value(t); }

  double value(double t) const {
    return std::visit([t](const auto& g) { return eval(g, t, 0); }, gen_);
  }
  double derivative(double t) const {
    return std::visit([t](const auto& g) { return eval(g, t, 1); }, gen_);
  }
  double second_derivative(double t) const {
    return std::visit([t](const auto& g) { return eval(g, t, 2); }, gen_);
  }

  /// True when analytic derivatives are available (W^{2,inf} generators).
  bool smooth() const {
    return std::holds_alternative<signals::Constant>(gen_) || std::holds_alternative<signals::Sinusoid>(gen_) ||
           std::holds_alternative<signals::SmoothRandom>(gen_);
  }

  /// True when the signal is constant in time (all derivatives vanish).
  bool is_constant() const { return std::holds_alternative<signals::Constant>(gen_); }

  bool is_zero() const {
    const auto* c = std::get_if<signals::Constant>(&gen_);
    return c != nullptr && c->value == 0.0;
  }

  const Generator& generator() const noexcept { return gen_; }

 private:
  static double eval(const signals::Constant& g, double, int order) { return order == 0 ? g.value : 0.0; }

  static double eval(const signals::Step& g, double t, int order) {
    if (order > 0) throw SignalError("step signal has no derivative");
    return t >= g.start ? g.amplitude : 0.0;
  }

  static double eval(const signals::Pulse& g, double t, int order) {
    if (order > 0) throw SignalError("pulse signal has no derivative");
    return (t >= g.start && t < g.start + g.width) ? g.amplitude : 0.0;
  }

  static double eval(const signals::Sinusoid& g, double t, int order) {
    const double arg = g.omega * t + g.phase;
    switch (order) {
      case 0:
        return g.offset + g.amplitude * std::sin(arg);
      case 1:
        return g.amplitude * g.omega * std::cos(arg);
      default:
        return -g.amplitude * g.omega * g.omega * std::sin(arg);
    }
  }

  static double eval(const signals::UniformNoise& g, double t, int order) {
    if (order > 0) throw SignalError("noise signal has no derivative");
    const auto k = static_cast<std::int64_t>(std::floor(t / g.hold + 1e-9));
    return g.amplitude * (2.0 * signals::unit_hash(g.seed, k) - 1.0);
  }

  static double eval(const signals::SmoothRandom& g, double t, int order) {
    double acc = 0.0;
    for (std::size_t k = 0; k < g.omegas.size(); ++k) {
      const double w = g.omegas[k];
      const double arg = w * t + g.phases[k];
      switch (order) {
        case 0:
          acc += g.weights[k] * std::sin(arg);
          break;
        case 1:
          acc += g.weights[k] * w * std::cos(arg);
          break;
        default:
          acc -= g.weights[k] * w * w * std::sin(arg);
      }
    }
    return acc;
  }

  static double eval(const signals::Samples& g, double t, int order) {
    if (order > 0) throw SignalError("sampled signal has no analytic derivative");
    const double s = std::max(t, 0.0) / g.dt;
    const auto i = static_cast<std::size_t>(s);
    if (i + 1 >= g.values.size()) return g.values.back();
    const double w = s - static_cast<double>(i);
    return (1.0 - w) * g.values[i] + w * g.values[i + 1];
  }

  static void init_random(signals::SmoothRandom& r) {
    if (r.modes <= 0 || !(r.max_omega > 0.0)) throw ParameterError("SmoothRandom: need modes > 0 and max_omega > 0");
    r.omegas.resize(static_cast<std::size_t>(r.modes));
    r.phases.resize(r.omegas.size());
    r.weights.resize(r.omegas.size());
    double total = 0.0;
    for (std::size_t k = 0; k < r.omegas.size(); ++k) {
      const auto base = static_cast<std::int64_t>(3 * k);
      r.omegas[k] = r.max_omega * (0.05 + 0.95 * signals::unit_hash(r.seed, base));
      r.phases[k] = 2.0 * std::numbers::pi * signals::unit_hash(r.seed, base + 1);
      r.weights[k] = 0.2 + signals::unit_hash(r.seed, base + 2);
      total += r.weights[k];
    }
    for (double& w : r.weights) w *= r.amplitude / total;
  }

  Generator gen_;
};

/// Disturbances d1..d4 acting on the plant, their spatial locations m1, m2,
/// and the measurement noise n.
struct DisturbanceSet {
  TimeSignal d1, d2, d3, d4;
  Profile m1, m2;
  TimeSignal n;

  static DisturbanceSet none(const SpatialGrid& grid) {
    return DisturbanceSet{{}, {}, {}, {}, grid.constant(0.0), grid.constant(0.0), {}};
  }

  /// Sup over the four disturbances and the noise of |signal(t)|.
  double input_magnitude(double t) const {
    double m = std::abs(n(t));
    for (const auto* s : {&d1, &d2, &d3, &d4}) m = std::max(m, std::abs((*s)(t)));
    return m;
  }

  bool disturbance_free() const {
    return d1.is_zero() && d2.is_zero() && d3.is_zero() && d4.is_zero();
  }

  void validate(const SpatialGrid& grid) const {
    if (m1.size() != grid.size() || m2.size() != grid.size())
      throw ParameterError("DisturbanceSet: m1/m2 must be sampled on the grid");
    for (const auto* m : {&m1, &m2})
      for (double v : *m)
        if (!(v >= 0.0) || !std::isfinite(v)) throw ParameterError("DisturbanceSet: m1/m2 must be finite and >= 0");
  }
};

}  // namespace hypreg

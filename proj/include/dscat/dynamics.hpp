#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "dscat/config.hpp"

namespace dscat {

struct State {
  double x = 0.0;
  double p = 0.0;
  double t = 0.0;
};

struct Crossing {
  double t;
  double p;
};

struct TurningPoint {
  double t;
  double x;
};

enum class EscapeReason { None, Energy, NoReturn };

struct EventLog {
  std::vector<Crossing> zero_crossings;
  std::vector<TurningPoint> turning_points;
  bool escaped = false;
  std::optional<double> escape_time;
  EscapeReason reason = EscapeReason::None;
};

struct Trajectory {
  std::vector<State> samples;
  std::vector<State> strobe;
  EventLog events;
  State final_state;
};

// Potentials are written once for any floating scalar so tests can evaluate
// them in extended precision.

template <class Scalar>
Scalar potential_value(PotentialKind kind, Scalar x) {
  using std::abs;
  const Scalar a = abs(x);
  if (kind == PotentialKind::V2Lorentz) return Scalar(1.2) * x * x / (Scalar(2.4) + x * x);
  if (a <= Scalar(2)) {
    const Scalar a2 = a * a;
    return a2 / Scalar(2) - Scalar(3) / Scalar(16) * a2 * a + a2 * a2 * a / Scalar(160);
  }
  return Scalar(1.2) - Scalar(1) / a;
}

/// -dV/dx.
template <class Scalar>
Scalar potential_force(PotentialKind kind, Scalar x) {
  using std::abs;
  if (kind == PotentialKind::V2Lorentz) {
    const Scalar d = Scalar(2.4) + x * x;
    return -Scalar(5.76) * x / (d * d);
  }
  const Scalar a = abs(x);
  if (a <= Scalar(2)) return -(x - Scalar(9) / Scalar(16) * x * a + x * a * a * a / Scalar(32));
  return -x / (a * a * a);
}

/// d^2V/dx^2.
template <class Scalar>
Scalar potential_curvature(PotentialKind kind, Scalar x) {
  using std::abs;
  if (kind == PotentialKind::V2Lorentz) {
    const Scalar d = Scalar(2.4) + x * x;
    return Scalar(5.76) * (Scalar(2.4) - Scalar(3) * x * x) / (d * d * d);
  }
  const Scalar a = abs(x);
  if (a <= Scalar(2)) return Scalar(1) - Scalar(9) / Scalar(8) * a + a * a * a / Scalar(8);
  return -Scalar(2) / (a * a * a);
}

/// External force f(t) including the amplitude e0.
double driver_value(DriverKind kind, const SystemConfig& cfg, double t);

/// H = p^2/2 + omega^2 V(x) - f(t) x.
double hamiltonian(const SystemConfig& cfg, const State& s);

/// H0 = p^2/2 + omega^2 V(x).
double free_energy(const SystemConfig& cfg, const State& s);

/// Free energy in the frame co-moving with the driver-induced quiver motion.
/// Equals free_energy when no periodic driver acts at time s.t.
double comoving_energy(const SystemConfig& cfg, const State& s);

/// Quiver velocity of a free particle under the driver at time t (zero for
/// drivers other than f2).
double quiver_velocity(const SystemConfig& cfg, double t);

/// One classical RK4 step; dt may be negative for backward integration.
State rk4_step(const SystemConfig& cfg, const State& s, double dt);

struct IntegrateOptions {
  double t_end = 0.0;
  /// Record every stride-th grid state; 0 disables sampling.
  std::size_t sample_stride = 0;
  /// Stop once this many crossings past the start have been recorded (-1: never).
  int stop_after_crossings = -1;
  /// Stop on escape criterion (a) or (b), after running on for run_after_escape.
  bool stop_on_escape = true;
  double run_after_escape = 0.0;
  /// Whether escape tests are armed; for f1 they arm only after switch-off.
  bool detect_escape = true;
  /// Extra states interpolated at t = strobe_origin + k*strobe_period
  /// (disabled when strobe_period <= 0).
  double strobe_period = 0.0;
  double strobe_origin = 0.0;
};

/// Fixed-step RK4 from s0 to t_end (forward or backward in time) with
/// bisection-refined zero crossings and turning points. A start exactly at
/// x=0 is logged as the first crossing.
Trajectory integrate(const SystemConfig& cfg, const State& s0, const IntegrateOptions& opt);
Trajectory integrate(const SystemConfig& cfg, const State& s0, double t_end);

}  // namespace dscat

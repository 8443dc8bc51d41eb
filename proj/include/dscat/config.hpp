#pragma once

#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dscat {

enum class PotentialKind { V1RigidSpheres, V2Lorentz };
enum class DriverKind { F1Finite, F2Periodic, None };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DSCAT_ERROR(Name)                        \
  class Name : public Error {                    \
   public:                                       \
    using Error::Error;                          \
  };

DSCAT_ERROR(StepLimitExceeded)
DSCAT_ERROR(NonFiniteState)
DSCAT_ERROR(ValidationError)
DSCAT_ERROR(DegenerateScan)
DSCAT_ERROR(InsufficientData)
DSCAT_ERROR(NotInRPlus)
DSCAT_ERROR(SameClassEndpoints)
DSCAT_ERROR(RegionNotInRPlus)
DSCAT_ERROR(NoSaddleFound)
DSCAT_ERROR(NoConvergence)
DSCAT_ERROR(CurvatureBlowup)
DSCAT_ERROR(NoIntersection)
DSCAT_ERROR(TipNotFound)
DSCAT_ERROR(EmptyCloud)
DSCAT_ERROR(MissingColumn)
DSCAT_ERROR(Cancelled)

#undef DSCAT_ERROR

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line) : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Physical parameters plus integrator settings. Zero-valued dt and t_noreturn
/// select the defaults (2000 steps per driver period, 200 driver periods).
struct SystemConfig {
  PotentialKind potential = PotentialKind::V1RigidSpheres;
  DriverKind driver = DriverKind::F2Periodic;
  double omega = 0.7;
  double e0 = 1.0;
  double nu = 0.8;
  int envelope_n = 340;
  double dt = 0.0;
  double escape_x = 50.0;
  double t_noreturn = 0.0;
  /// Driver phase nu*t0 at which scattering orbits are launched.
  double launch_phase = 0.0;
  /// Added to h' in the escape test when the drive amplitude is nonzero.
  double escape_margin = 1e-4;
  double parabolic_tol = 1e-3;
  std::size_t max_steps = 200'000'000;

  double period() const { return 2.0 * std::numbers::pi / nu; }
  double step() const { return dt > 0.0 ? dt : period() / 2000.0; }
  double noreturn_time() const { return t_noreturn > 0.0 ? t_noreturn : 200.0 * period(); }
  double launch_time() const { return launch_phase / nu; }
  double amplitude() const { return driver == DriverKind::None ? 0.0 : e0; }
  /// End of the f1 pulse, n*pi/nu.
  double switch_off_time() const { return envelope_n * std::numbers::pi / nu; }
  /// Energy of the unperturbed escape orbit, omega^2 * V(infinity).
  double escape_energy() const { return 1.2 * omega * omega; }

  /// Throws ValidationError naming the violated invariant.
  void validate() const;

  bool operator==(const SystemConfig&) const = default;
};

}  // namespace dscat

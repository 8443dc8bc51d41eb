#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dscat/scattering.hpp"

namespace dscat {

enum class Sampling { UniformGrid, UniformRandom };

struct EnsembleSpec {
  double x0 = 0.0;
  double v0_lo = 1.55;
  double v0_hi = 1.57;
  std::size_t count = 20000;
  Sampling sampling = Sampling::UniformGrid;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Initial velocities: cell midpoints of the open interval for the grid,
/// seeded draws for random sampling.
std::vector<double> ensemble_velocities(const EnsembleSpec& spec);

struct EnsembleRun {
  std::vector<ScatterRecord> records;
  std::size_t failures = 0;
  /// Integration horizon measured from launch.
  double cutoff = 0.0;
};

EnsembleRun run_ensemble(const SystemConfig& cfg, const EnsembleSpec& spec, const ScatterOptions& opt = {},
                         std::size_t workers = 0);

struct DecayCurve {
  std::vector<double> abscissa;
  std::vector<double> counts;
  std::size_t failures = 0;
  double cutoff = 0.0;
};

/// Time an orbit spends between launch and its last zero crossing; orbits
/// trapped at the cutoff survive through it.
double survival_time(const ScatterRecord& r, double cutoff);

/// N(t) on t=0 followed by `bins` logarithmic times between the earliest
/// positive survival time and the cutoff.
DecayCurve survival_from_records(const std::vector<ScatterRecord>& records, double cutoff,
                                 std::size_t bins = 200);
/// N(n) for n = 1 .. max N_c.
DecayCurve zeros_from_records(const std::vector<ScatterRecord>& records);

DecayCurve survival_function(const SystemConfig& cfg, const EnsembleSpec& spec, const ScatterOptions& opt = {},
                             std::size_t workers = 0);
DecayCurve zeros_distribution(const SystemConfig& cfg, const EnsembleSpec& spec, const ScatterOptions& opt = {},
                              std::size_t workers = 0);

struct PowerLawFit {
  double z = 0.0;
  double stderr_z = 0.0;
  double range_lo = 0.0;
  double range_hi = 0.0;
  /// Root-mean-square residual in natural-log units.
  double residual = 0.0;
  std::size_t points = 0;
  double amplitude = 0.0;
};

/// Least-squares line through (log x, log N) for points with N >= min_count
/// inside [lo, hi].
PowerLawFit powerlaw_fit(const DecayCurve& curve, double lo, double hi, double min_count = 10.0);

/// Default N(t) range: from one driver period to the last abscissa where at
/// least 10 orbits remain and at least 10 of them still escape before the
/// cutoff (the plateau of orbits trapped at the cutoff is excluded).
PowerLawFit survival_fit(const DecayCurve& curve, double period);

/// Abscissae beyond `from` where the counts strictly decrease.
std::vector<double> staircase_detect(const DecayCurve& curve, double from);

}  // namespace dscat

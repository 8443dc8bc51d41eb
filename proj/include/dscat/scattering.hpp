#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dscat/dynamics.hpp"

namespace dscat {

enum class OrbitClass { Hyperbolic, Parabolic, TrappedAtCutoff };

const char* to_string(OrbitClass c);

struct ScatterRecord {
  double input = 0.0;
  /// Free energy after switch-off (f1: one value) or at each stroboscopic time.
  std::vector<double> h0_out;
  /// Asymptotic outgoing free energy (stroboscopic value with the decaying
  /// potential tail removed for f2; the conserved value for f1).
  double h0_out_final = 0.0;
  /// Energy in the frame co-moving with the quiver motion; decides the class.
  double h0_comoving = 0.0;
  int n_c = 0;
  double delay_time = 0.0;
  double t_launch = 0.0;
  double t_first = 0.0;
  double t_last = 0.0;
  OrbitClass classification = OrbitClass::TrappedAtCutoff;
  std::string error;

  bool ok() const { return error.empty(); }
  bool trapped() const { return classification == OrbitClass::TrappedAtCutoff; }
};

struct ScatterOptions {
  /// Stroboscopic horizon for S^2, in driver periods.
  int k_max = 500;
  /// Phase nu*t of the stroboscopic samples.
  double sample_phase = 0.0;
  /// Periods integrated after the escape test fires (post-escape samples).
  int post_escape_periods = 4;
};

/// S^1: f1 driver, launched at t=0, energy read after the pulse.
ScatterRecord scatter_s1(const SystemConfig& cfg, double x0, double v0);

/// S^2: f2 driver, launched at the configured launch phase, free energy
/// sampled every driver period.
ScatterRecord scatter_s2(const SystemConfig& cfg, double x0, double v0, int k_max);
ScatterRecord scatter_s2(const SystemConfig& cfg, double x0, double v0, const ScatterOptions& opt);

/// Dispatches on the driver kind (f1 -> S^1, otherwise S^2).
ScatterRecord scatter(const SystemConfig& cfg, double x0, double v0, const ScatterOptions& opt = {});

enum class ScanAxis { V0, X0, E0 };

struct SweepSpec {
  ScanAxis axis = ScanAxis::V0;
  double x0 = 0.0;
  double v0 = 0.0;
  double lo = 0.0;
  double hi = 1.0;
  std::size_t samples = 2;
  ScatterOptions scatter;
  std::size_t workers = 0;
};

/// Uniform scan; per-record failures are stored in ScatterRecord::error.
std::vector<ScatterRecord> sweep(const SystemConfig& cfg, const SweepSpec& spec);

/// Default stroboscopic phase for a scan axis (pi/2 for amplitude scans).
double default_sample_phase(ScanAxis axis);

struct RegularInterval {
  double lo = 0.0;
  double hi = 0.0;
  int n_c = 0;
  std::size_t first = 0;
  std::size_t last = 0;
  std::size_t count() const { return last - first + 1; }
};

struct SingularGap {
  double lo = 0.0;
  double hi = 0.0;
};

struct IntervalSegmentation {
  std::vector<RegularInterval> regular_intervals;
  std::vector<SingularGap> singular_gaps;
  double resolution = 0.0;
  /// Per-sample inputs and zero counts (-1 for samples outside every interval).
  std::vector<double> inputs;
  std::vector<int> sample_nc;
};

IntervalSegmentation segment_intervals(const std::vector<ScatterRecord>& records);

struct RuleResult {
  bool pass = true;
  std::size_t checked = 0;
  std::size_t violations = 0;
  std::vector<std::string> witnesses;
};

struct HierarchyReport {
  RuleResult constant_nc;      // rule (i)
  RuleResult higher_between;   // rule (ii)
  RuleResult accumulation;     // rule (iii)
  std::size_t families_tested = 0;
  std::size_t families_passed = 0;
  bool all_pass() const { return constant_nc.pass && higher_between.pass && accumulation.pass; }
};

struct HierarchyOptions {
  /// Members of an accumulation family examined for monotone shrinking.
  std::size_t family_members = 5;
  std::size_t max_witnesses = 20;
};

HierarchyReport validate_hierarchy(const IntervalSegmentation& seg, const HierarchyOptions& opt = {});

struct GridField {
  std::vector<double> x0_axis;
  std::vector<double> v0_axis;
  /// Row-major [iv * nx + ix]; -1 marks a failed cell.
  std::vector<int> n_c;
  std::vector<unsigned char> same_as_neighbors;
  std::size_t nx() const { return x0_axis.size(); }
  std::size_t nv() const { return v0_axis.size(); }
  int at(std::size_t ix, std::size_t iv) const { return n_c[iv * nx() + ix]; }
};

GridField grid_nc(const SystemConfig& cfg, double x0_lo, double x0_hi, double v0_lo, double v0_hi,
                  std::size_t nx, std::size_t nv, const ScatterOptions& opt = {}, std::size_t workers = 0);

/// Boundary between two neighbouring regular intervals with different N_c.
struct NcJump {
  /// Bracket left after refinement.
  double lo = 0.0;
  double hi = 0.0;
  int nc_left = 0;
  int nc_right = 0;
  /// |h0_out_final| difference across the bracket at the scan resolution and
  /// after the last refinement.
  double initial_jump = 0.0;
  double final_jump = 0.0;
  int levels_done = 0;
  /// The refined scans kept a single switch and the jump shrank with the
  /// spacing: the outgoing energy is continuous across the change of N_c.
  bool continuous = false;
};

struct JumpOptions {
  /// Minimum sample count of both neighbouring intervals.
  std::size_t min_run = 3;
  std::size_t refine_samples = 21;
  int levels = 2;
  /// Required shrink of the jump per refinement level.
  double shrink = 0.1;
};

/// Examines every boundary of the scan where two regular intervals touch by
/// rescanning the bracket between their end samples.
std::vector<NcJump> find_nc_jumps(const SystemConfig& cfg, const SweepSpec& spec,
                                  const std::vector<ScatterRecord>& records, const JumpOptions& opt = {});

}  // namespace dscat

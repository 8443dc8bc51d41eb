#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "dscat/dynamics.hpp"

namespace dscat {

/// Point of the x=0 section in polar form. A crossing with negative momentum
/// at phase tau is stored as (|p|, tau + pi) through the symmetry
/// (x, p, t) -> (-x, -p, t + pi/nu).
struct SectionPoint {
  double p = 0.0;
  double tau = 0.0;
};

/// Wraps tau into [0, 2pi).
double wrap_phase(double tau);
SectionPoint canonical_point(double p, double t, double nu);

enum class Direction { Forward, Backward };

enum class ReturnKind { Returns, Escapes, Undecided };

struct ReturnOutcome {
  ReturnKind kind = ReturnKind::Undecided;
  Direction direction = Direction::Forward;
  SectionPoint next;
  /// Extremum of x between the two crossings (X+ forward, X- backward).
  double turning_x = 0.0;
  /// |t_next - t_start|; the elapsed horizon for Escapes/Undecided.
  double return_time = 0.0;
};

struct ReturnOptions {
  /// Time horizon per return; 0 selects the configured no-return time.
  double horizon = 0.0;
};

/// One application of D (forward) or D^-1 (backward). Reaching the horizon
/// without a crossing or an energy escape is Undecided.
ReturnOutcome return_map(const SystemConfig& cfg, const SectionPoint& pt, Direction dir,
                         const ReturnOptions& opt = {});

/// (p, tau) -> (p, -tau): the image of D under t -> -t, x -> -x.
SectionPoint mirror(const SectionPoint& pt);

/// omega^2 V(X+) and omega^2 V(X-); throw NotInRPlus when the point does not return.
double h_plus(const SystemConfig& cfg, const SectionPoint& pt, const ReturnOptions& opt = {});
double h_minus(const SystemConfig& cfg, const SectionPoint& pt, const ReturnOptions& opt = {});

enum class ForwardClass { Rplus, Pplus_approx, Hplus, Undecided };
enum class BackwardClass { Rminus, Pminus_approx, Hminus, Undecided };

const char* to_string(ForwardClass c);
const char* to_string(BackwardClass c);

struct RegionClass {
  ForwardClass forward = ForwardClass::Undecided;
  BackwardClass backward = BackwardClass::Undecided;
};

/// Single-evaluation classification (never yields the P classes).
RegionClass classify(const SystemConfig& cfg, const SectionPoint& pt, const ReturnOptions& opt = {});

struct BisectionStep {
  double p = 0.0;
  ReturnKind kind = ReturnKind::Undecided;
  double return_time = 0.0;
};

struct BoundaryEstimate {
  double p_boundary = 0.0;
  /// Bracket [inside, outside] after the last step; inside does not escape.
  double p_inside = 0.0;
  double p_outside = 0.0;
  /// Successive inside endpoints in the order they were adopted.
  std::vector<BisectionStep> inside_sequence;
  std::size_t evaluations = 0;
};

/// Bisection along the ray tau = const between a non-escaping and an escaping
/// momentum. Undecided midpoints are counted on the non-escaping side.
BoundaryEstimate boundary_bisect(const SystemConfig& cfg, double tau, double p_a, double p_b, Direction dir,
                                 double tol, const ReturnOptions& opt = {});

enum class Membership { False, True, Undecided };

const char* to_string(Membership m);

/// Q_n: the first n-1 forward iterates return and the n-th escapes.
Membership qn_membership(const SystemConfig& cfg, const SectionPoint& pt, int n, const ReturnOptions& opt = {});

/// Number of forward applications until escape (the n with pt in Q_n), 0 if
/// the point still returns after n_max applications, -1 if undecided.
int escape_iterate(const SystemConfig& cfg, const SectionPoint& pt, int n_max, const ReturnOptions& opt = {});

/// Disk of the given radius centred at (p_center^2/2, tau_center) in the
/// chart (J, tau), J = p^2/2, where p dp dtau is the plain area element.
struct SectionDisk {
  double p_center = 0.0;
  double tau_center = 0.0;
  double radius = 0.0;
};

struct AreaReport {
  double ratio = 0.0;
  double source_area = 0.0;
  double image_area = 0.0;
  std::size_t samples = 0;
};

/// Area of the convex hull of D(disk samples) over that of the samples,
/// both in the (J, tau) chart. Throws RegionNotInRPlus if any sample fails
/// to return.
AreaReport area_check(const SystemConfig& cfg, const SectionDisk& disk, std::size_t samples,
                      std::uint64_t seed = 1, std::size_t workers = 0, const ReturnOptions& opt = {});

/// Area of the convex hull of planar points.
double convex_hull_area(std::vector<std::pair<double, double>> pts);

struct GammaCell {
  SectionPoint pt;
  RegionClass cls;
  double h_plus = 0.0;   // NaN unless forward returns
  double h_minus = 0.0;  // NaN unless backward returns
  int q_n = 0;           // first n with pt in Q_n, 0 if none up to n_max, -1 undecided
};

/// Classified grid over p in [p_lo, p_hi] x tau in [0, 2pi), row-major in tau.
std::vector<GammaCell> classify_grid(const SystemConfig& cfg, double p_lo, double p_hi, std::size_t np,
                                     std::size_t ntau, int n_max, std::size_t workers = 0,
                                     const ReturnOptions& opt = {});

}  // namespace dscat

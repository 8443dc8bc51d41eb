#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dscat/dynamics.hpp"

namespace dscat {

using Point2 = Eigen::Vector2d;

/// Invertible area-preserving planar map. A non-finite image marks a point
/// that left the domain of the map.
struct PlanarMap {
  std::function<Point2(const Point2&)> forward;
  std::function<Point2(const Point2&)> backward;
};

/// Advances one driver period (or goes back one period) from s.t.
State strobo_map(const SystemConfig& cfg, const State& s);
State strobo_map_inverse(const SystemConfig& cfg, const State& s);

/// Stroboscopic map on (x, p) at driver phase nu*t = section_phase.
PlanarMap stroboscopic_map(const SystemConfig& cfg, double section_phase = 0.0);

/// Returns m o m o ... (k times).
PlanarMap iterate_map(const PlanarMap& m, int k);

/// Central-difference Jacobian of the forward map.
Eigen::Matrix2d map_jacobian(const PlanarMap& m, const Point2& z, double h = 1e-6);

enum class Stability { Saddle, Elliptic, Parabolic };
enum class FixedPointLabel { A, B, Inner, Other };

const char* to_string(Stability s);
const char* to_string(FixedPointLabel l);

struct FixedPointInfo {
  Point2 location = Point2::Zero();
  /// (expanding, contracting) for saddles; real parts otherwise.
  Eigen::Vector2d eigenvalues = Eigen::Vector2d::Zero();
  /// Columns match eigenvalues; unit length. Zero for non-saddles.
  Eigen::Matrix2d eigenvectors = Eigen::Matrix2d::Zero();
  double trace = 0.0;
  double determinant = 0.0;
  double residual = 0.0;
  Stability stability = Stability::Elliptic;
  FixedPointLabel label = FixedPointLabel::Other;
};

struct SeedRegion {
  double x_lo = -6.0;
  double x_hi = 6.0;
  double p_lo = -2.0;
  double p_hi = 2.0;
  std::size_t nx = 25;
  std::size_t np = 9;
};

struct NewtonOptions {
  double jacobian_step = 1e-6;
  double step_tol = 1e-12;
  double residual_tol = 1e-10;
  int max_iterations = 60;
  /// Longest accepted Newton step (damping).
  double max_step = 0.5;
  /// Roots closer than this are merged.
  double merge_tol = 1e-6;
};

struct FixedPointSearch {
  /// Deduplicated roots sorted by (x, p).
  std::vector<FixedPointInfo> points;
  /// Seeds whose Newton iteration did not converge.
  std::size_t failed_seeds = 0;
};

/// Newton iteration on m(z) - z from every seed of the grid. Saddles with the
/// largest positive x and smallest negative x are labeled A and B; the
/// elliptic point nearest the origin is labeled Inner.
FixedPointSearch find_fixed_points(const PlanarMap& m, const SeedRegion& seeds = {}, const NewtonOptions& opt = {},
                                   std::size_t workers = 0);

/// Classification of a Jacobian at a fixed point.
FixedPointInfo classify_fixed_point(const Eigen::Matrix2d& jac, const Point2& z);

struct SaddlePair {
  FixedPointInfo a;
  FixedPointInfo b;
};

/// Throws NoSaddleFound unless both A and B are present.
SaddlePair outermost_saddles(const FixedPointSearch& search);

struct Rect {
  double x_lo = 0.0;
  double x_hi = 0.0;
  double p_lo = 0.0;
  double p_hi = 0.0;
  bool contains(const Point2& z) const {
    return z.allFinite() && z.x() >= x_lo && z.x() <= x_hi && z.y() >= p_lo && z.y() <= p_hi;
  }
};

struct SprinklerClouds {
  std::vector<Point2> stable;
  std::vector<Point2> unstable;
};

/// Grid points of the region whose first t_stay iterates all stay inside form
/// the stable cloud; their t_stay-th iterates form the unstable cloud.
SprinklerClouds sprinkler(const PlanarMap& m, const Rect& region, std::size_t nx, std::size_t np, int t_stay,
                          std::size_t workers = 0);

enum class ManifoldKind { Stable, Unstable };

const char* to_string(ManifoldKind k);

struct ContinuationOptions {
  double delta0 = 1e-7;
  double ds_max = 1e-2;
  double theta_max = 0.3;
  double ds_min = 1e-5;
  std::size_t max_points = 400000;
  /// End the curve before an unresolvable fold instead of throwing.
  bool truncate_on_blowup = false;
};

struct ManifoldCurve {
  FixedPointLabel owner = FixedPointLabel::Other;
  ManifoldKind kind = ManifoldKind::Unstable;
  int branch = 1;
  /// Iteration power used for growth (2 when the eigenvalue is negative).
  int power = 1;
  std::vector<Point2> points;
  std::vector<double> arclength;
  /// Set when growth stopped at an unresolvable fold.
  bool truncated = false;
  /// Arclengths where the curve re-enters the region after leaving it.
  std::vector<double> order_marks;
};

/// Grows one branch of W_u (forward iteration) or W_s (backward iteration)
/// from delta0 along the eigenvector, inserting points until consecutive
/// spacing is at most ds_max and turning angles at most theta_max. Stops at
/// max_arclength or when iterates leave the domain.
ManifoldCurve manifold_continuation(const PlanarMap& m, const FixedPointInfo& fp, ManifoldKind kind, int branch,
                                    double max_arclength, const ContinuationOptions& opt = {});

/// Closed polygon given by its vertices (last edge joins back to the first).
using Polygon = std::vector<Point2>;

bool point_in_polygon(const Polygon& poly, const Point2& z);
double polygon_area(const Polygon& poly);
double polyline_distance(const std::vector<Point2>& line, const Point2& z);

/// Recomputes order_marks of the curve against a region.
void mark_orders(ManifoldCurve& curve, const Polygon& region);

struct RegionCurves {
  ManifoldCurve unstable_a;
  ManifoldCurve stable_a;
  ManifoldCurve unstable_b;
  ManifoldCurve stable_b;
};

struct FundamentalRegion {
  Point2 a = Point2::Zero();
  Point2 a1 = Point2::Zero();
  Point2 b = Point2::Zero();
  Point2 b1 = Point2::Zero();
  /// Boundary A -> A1 (W_u of A), A1 -> B (W_s of B), B -> B1 (W_u of B),
  /// B1 -> A (W_s of A).
  Polygon boundary;
  /// Vertex counts of the four sides in boundary order.
  std::size_t side_sizes[4] = {0, 0, 0, 0};
};

/// The four boundary branches of A and B, each chosen to leave its fixed point
/// toward the midpoint of A and B. Branches are grown concurrently.
RegionCurves region_curves(const PlanarMap& m, const SaddlePair& saddles, double max_arclength,
                           const ContinuationOptions& opt = {}, std::size_t workers = 0);

/// A1 is the first crossing of W_u(A) with W_s(B), B1 the first crossing of
/// W_u(B) with W_s(A). Throws NoIntersection if a crossing is missing.
FundamentalRegion fundamental_region(const FixedPointInfo& a, const FixedPointInfo& b, const RegionCurves& curves);

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

std::string to_string(const Rational& r);
std::int64_t pow3(int n);

struct GapNode {
  /// n + n1 for a gap created at subdivision depth n1.
  int order = 0;
  int depth = 0;
  /// 1-based position counted from the fixed-point side over all depths.
  std::int64_t index = 0;
  /// Extent in units of 5^-depth_max of the stable coordinate.
  std::int64_t lo = 0;
  std::int64_t hi = 0;
};

/// Symbolic ternary subdivision: every strip splits into three strips and two
/// gaps per level.
struct GapTree {
  int tendril_order = 0;
  int depth = 0;
  std::int64_t scale = 1;
  /// Gaps per depth (index 0 holds depth 1), ordered by position.
  std::vector<std::vector<GapNode>> levels;

  std::size_t gaps_at(int n1) const;
  std::size_t cumulative(int n1) const;
  /// Gaps of depth <= n1 in order from the fixed point.
  std::vector<GapNode> ordered(int n1) const;
};

GapTree gap_tree(int tendril_order, int depth);

/// gamma = r_n / 3^n with 1 <= r_n <= 3^n.
Rational development_gamma(std::int64_t r, int n);

/// r_n for a tip at the given stable coordinate (same units as GapNode) on a
/// symbolic tree: the index of the gap containing it, the last gap before it
/// when it lies in a strip, 3^n when it reaches the far side.
std::int64_t symbolic_tip_index(const GapTree& tree, int n, std::int64_t tip);

struct GapComponent {
  int order = 0;
  std::size_t cells = 0;
  Point2 centroid = Point2::Zero();
  /// Normalised arclength along W_u(A) and W_u(B) boundary sides where the gap
  /// crosses them (NaN when it does not).
  double position_a = 0.0;
  double position_b = 0.0;
};

struct HorseshoeOptions {
  std::size_t raster = 300;
  /// Components smaller than this many cells are treated as raster noise.
  std::size_t min_cells = 3;
  /// A tip overlapping its gap by at most this many cells is ambiguous.
  std::size_t ambiguity_cells = 2;
};

struct HorseshoeReport {
  Rational gamma_a;
  Rational gamma_b;
  int n_used = 0;
  std::int64_t r_a = 0;
  std::int64_t r_b = 0;
  bool complete_a = false;
  bool complete_b = false;
  bool complete = false;
  std::vector<GapComponent> stable_gaps;
  std::size_t unstable_gaps = 0;
  std::vector<std::string> ambiguities;
};

/// Rasterises the fundamental region, labels stable gaps of order <= n as the
/// connected components of the first-exit level sets, orders them along the
/// W_u boundary sides from each fixed point, and finds how deep the first
/// unstable gap reaching in from that fixed point's side penetrates.
/// Throws TipNotFound when no unstable gap or no ordered stable gap exists,
/// AmbiguousTip when the tip only grazes its gap.
HorseshoeReport development_parameter(const PlanarMap& m, const FundamentalRegion& region, const GapTree& tree,
                                      int n, const HorseshoeOptions& opt = {}, std::size_t workers = 0);

class AmbiguousTip : public Error {
 public:
  AmbiguousTip(const std::string& what, HorseshoeReport report) : Error(what), report_(std::move(report)) {}
  const HorseshoeReport& report() const { return report_; }

 private:
  HorseshoeReport report_;
};

}  // namespace dscat

#include "dscat/saddle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "dscat/parallel.hpp"

namespace dscat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Point2 nan_point() { return {kNaN, kNaN}; }

State advance(const SystemConfig& cfg, const State& s, double span) {
  if (cfg.driver == DriverKind::F1Finite) throw ValidationError("stroboscopic map needs the periodic driver");
  IntegrateOptions io;
  io.t_end = s.t + span;
  io.detect_escape = false;
  io.stop_on_escape = false;
  return integrate(cfg, s, io).final_state;
}

double turning_angle(const Point2& a, const Point2& b, const Point2& c) {
  const Point2 u = b - a;
  const Point2 v = c - b;
  return std::abs(std::atan2(u.x() * v.y() - u.y() * v.x(), u.dot(v)));
}

struct SegmentHit {
  std::size_t i = 0;
  double s = 0.0;
  std::size_t j = 0;
  double t = 0.0;
  Point2 at = Point2::Zero();
};

std::optional<SegmentHit> segment_intersection(const Point2& p0, const Point2& p1, const Point2& q0,
                                               const Point2& q1) {
  const Point2 r = p1 - p0;
  const Point2 d = q1 - q0;
  const double den = r.x() * d.y() - r.y() * d.x();
  if (den == 0.0) return std::nullopt;
  const Point2 w = q0 - p0;
  const double s = (w.x() * d.y() - w.y() * d.x()) / den;
  const double t = (w.x() * r.y() - w.y() * r.x()) / den;
  if (s < 0.0 || s > 1.0 || t < 0.0 || t > 1.0) return std::nullopt;
  SegmentHit h;
  h.s = s;
  h.t = t;
  h.at = p0 + s * r;
  return h;
}

/// First crossing along `line` (in its own order) with any segment of `other`.
std::optional<SegmentHit> first_crossing(const std::vector<Point2>& line, const std::vector<Point2>& other) {
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const Point2& p0 = line[i];
    const Point2& p1 = line[i + 1];
    const Eigen::Array2d lo = p0.array().min(p1.array());
    const Eigen::Array2d hi = p0.array().max(p1.array());
    std::optional<SegmentHit> best;
    for (std::size_t j = 0; j + 1 < other.size(); ++j) {
      const Point2& q0 = other[j];
      const Point2& q1 = other[j + 1];
      if (std::max(q0.x(), q1.x()) < lo.x() || std::min(q0.x(), q1.x()) > hi.x() ||
          std::max(q0.y(), q1.y()) < lo.y() || std::min(q0.y(), q1.y()) > hi.y())
        continue;
      if (auto h = segment_intersection(p0, p1, q0, q1)) {
        if (!best || h->s < best->s) {
          best = h;
          best->i = i;
          best->j = j;
        }
      }
    }
    if (best) return best;
  }
  return std::nullopt;
}

std::vector<double> cumulative_length(const std::vector<Point2>& pts) {
  std::vector<double> s(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) s[i] = s[i - 1] + (pts[i] - pts[i - 1]).norm();
  return s;
}

}  // namespace

State strobo_map(const SystemConfig& cfg, const State& s) { return advance(cfg, s, cfg.period()); }

State strobo_map_inverse(const SystemConfig& cfg, const State& s) { return advance(cfg, s, -cfg.period()); }

PlanarMap stroboscopic_map(const SystemConfig& cfg, double section_phase) {
  cfg.validate();
  if (cfg.driver == DriverKind::F1Finite) throw ValidationError("stroboscopic map needs the periodic driver");
  const double t0 = section_phase / cfg.nu;
  auto make = [cfg, t0](double span) {
    return [cfg, t0, span](const Point2& z) -> Point2 {
      if (!z.allFinite()) return nan_point();
      try {
        const State s = advance(cfg, {z.x(), z.y(), t0}, span);
        return {s.x, s.p};
      } catch (const NonFiniteState&) {
        return nan_point();
      }
    };
  };
  return {make(cfg.period()), make(-cfg.period())};
}

PlanarMap iterate_map(const PlanarMap& m, int k) {
  if (k < 1) throw ValidationError("map power >= 1");
  if (k == 1) return m;
  auto power = [k](std::function<Point2(const Point2&)> f) {
    return [f, k](const Point2& z) {
      Point2 w = z;
      for (int i = 0; i < k && w.allFinite(); ++i) w = f(w);
      return w;
    };
  };
  return {power(m.forward), power(m.backward)};
}

Eigen::Matrix2d map_jacobian(const PlanarMap& m, const Point2& z, double h) {
  Eigen::Matrix2d jac;
  for (int k = 0; k < 2; ++k) {
    Point2 d = Point2::Zero();
    d(k) = h;
    jac.col(k) = (m.forward(z + d) - m.forward(z - d)) / (2.0 * h);
  }
  return jac;
}

const char* to_string(Stability s) {
  switch (s) {
    case Stability::Saddle: return "saddle";
    case Stability::Elliptic: return "elliptic";
    case Stability::Parabolic: return "parabolic";
  }
  return "?";
}

const char* to_string(FixedPointLabel l) {
  switch (l) {
    case FixedPointLabel::A: return "A";
    case FixedPointLabel::B: return "B";
    case FixedPointLabel::Inner: return "inner";
    case FixedPointLabel::Other: return "other";
  }
  return "?";
}

const char* to_string(ManifoldKind k) { return k == ManifoldKind::Stable ? "stable" : "unstable"; }

FixedPointInfo classify_fixed_point(const Eigen::Matrix2d& jac, const Point2& z) {
  FixedPointInfo fp;
  fp.location = z;
  fp.trace = jac.trace();
  fp.determinant = jac.determinant();
  const double disc = fp.trace * fp.trace - 4.0 * fp.determinant;
  if (disc <= 0.0) {
    fp.stability = Stability::Elliptic;
    fp.eigenvalues = Eigen::Vector2d::Constant(0.5 * fp.trace);
    return fp;
  }
  Eigen::EigenSolver<Eigen::Matrix2d> es(jac);
  Eigen::Vector2d ev = es.eigenvalues().real();
  Eigen::Matrix2d vec = es.eigenvectors().real();
  if (std::abs(ev(1)) > std::abs(ev(0))) {
    std::swap(ev(0), ev(1));
    vec.col(0).swap(vec.col(1));
  }
  fp.eigenvalues = ev;
  vec.col(0).normalize();
  vec.col(1).normalize();
  fp.eigenvectors = vec;
  const bool hyperbolic = std::abs(ev(0)) > 1.0 && std::abs(ev(1)) < 1.0;
  fp.stability = hyperbolic ? Stability::Saddle : Stability::Parabolic;
  return fp;
}

FixedPointSearch find_fixed_points(const PlanarMap& m, const SeedRegion& seeds, const NewtonOptions& opt,
                                   std::size_t workers) {
  if (seeds.nx < 1 || seeds.np < 1) throw ValidationError("seed grid needs at least one point per axis");
  const std::size_t n = seeds.nx * seeds.np;
  auto axis = [](double lo, double hi, std::size_t k, std::size_t i) {
    return k == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
  };
  std::vector<std::optional<Point2>> roots(n);
  parallel_for(
      n,
      [&](std::size_t idx) {
        Point2 z(axis(seeds.x_lo, seeds.x_hi, seeds.nx, idx / seeds.np),
                 axis(seeds.p_lo, seeds.p_hi, seeds.np, idx % seeds.np));
        for (int it = 0; it < opt.max_iterations; ++it) {
          const Point2 f = m.forward(z) - z;
          if (!f.allFinite()) return;
          if (f.norm() < opt.residual_tol) {
            roots[idx] = z;
            return;
          }
          const Eigen::Matrix2d a = map_jacobian(m, z, opt.jacobian_step) - Eigen::Matrix2d::Identity();
          Point2 step = a.fullPivLu().solve(-f);
          if (!step.allFinite()) return;
          if (step.norm() > opt.max_step) step *= opt.max_step / step.norm();
          z += step;
          if (step.norm() < opt.step_tol) {
            roots[idx] = z;
            return;
          }
        }
      },
      workers);

  std::vector<Point2> found;
  FixedPointSearch out;
  for (const auto& r : roots) {
    if (r)
      found.push_back(*r);
    else
      ++out.failed_seeds;
  }
  std::sort(found.begin(), found.end(),
            [](const Point2& a, const Point2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
  std::vector<Point2> unique;
  for (const Point2& z : found) {
    const bool dup = std::any_of(unique.begin(), unique.end(),
                                 [&](const Point2& u) { return (u - z).norm() < opt.merge_tol; });
    if (!dup) unique.push_back(z);
  }
  for (const Point2& z : unique) {
    FixedPointInfo fp = classify_fixed_point(map_jacobian(m, z, opt.jacobian_step), z);
    fp.residual = (m.forward(z) - z).norm();
    out.points.push_back(fp);
  }

  FixedPointInfo* a = nullptr;
  FixedPointInfo* b = nullptr;
  FixedPointInfo* inner = nullptr;
  for (auto& fp : out.points) {
    if (fp.stability == Stability::Saddle) {
      if (fp.location.x() > 0.0 && (!a || fp.location.x() > a->location.x())) a = &fp;
      if (fp.location.x() < 0.0 && (!b || fp.location.x() < b->location.x())) b = &fp;
    } else if (fp.stability == Stability::Elliptic) {
      if (!inner || fp.location.norm() < inner->location.norm()) inner = &fp;
    }
  }
  if (a) a->label = FixedPointLabel::A;
  if (b) b->label = FixedPointLabel::B;
  if (inner) inner->label = FixedPointLabel::Inner;
  return out;
}

SaddlePair outermost_saddles(const FixedPointSearch& search) {
  std::optional<FixedPointInfo> a;
  std::optional<FixedPointInfo> b;
  for (const auto& fp : search.points) {
    if (fp.label == FixedPointLabel::A) a = fp;
    if (fp.label == FixedPointLabel::B) b = fp;
  }
  if (!a || !b) {
    std::string what = "no saddle pair: found";
    for (const auto& fp : search.points)
      what += " " + std::string(to_string(fp.stability)) + "(" + std::to_string(fp.location.x()) + "," +
              std::to_string(fp.location.y()) + ")";
    throw NoSaddleFound(what);
  }
  return {*a, *b};
}

SprinklerClouds sprinkler(const PlanarMap& m, const Rect& region, std::size_t nx, std::size_t np, int t_stay,
                          std::size_t workers) {
  if (nx < 100 || np < 100) throw ValidationError("sprinkler grid must be at least 100x100");
  if (t_stay < 3) throw ValidationError("sprinkler stay time must be at least 3 periods");
  if (!(region.x_lo < region.x_hi && region.p_lo < region.p_hi)) throw ValidationError("empty sprinkler region");
  const double dx = (region.x_hi - region.x_lo) / static_cast<double>(nx);
  const double dp = (region.p_hi - region.p_lo) / static_cast<double>(np);
  std::vector<std::optional<Point2>> finals(nx * np);
  parallel_for(
      nx * np,
      [&](std::size_t idx) {
        const Point2 z0(region.x_lo + (static_cast<double>(idx / np) + 0.5) * dx,
                        region.p_lo + (static_cast<double>(idx % np) + 0.5) * dp);
        Point2 z = z0;
        for (int k = 0; k < t_stay; ++k) {
          z = m.forward(z);
          if (!region.contains(z)) return;
        }
        finals[idx] = z;
      },
      workers);
  SprinklerClouds out;
  for (std::size_t idx = 0; idx < finals.size(); ++idx) {
    if (!finals[idx]) continue;
    out.stable.emplace_back(region.x_lo + (static_cast<double>(idx / np) + 0.5) * dx,
                            region.p_lo + (static_cast<double>(idx % np) + 0.5) * dp);
    out.unstable.push_back(*finals[idx]);
  }
  if (out.stable.empty()) throw EmptyCloud("no grid point stays in the region for the stay time");
  return out;
}

ManifoldCurve manifold_continuation(const PlanarMap& m, const FixedPointInfo& fp, ManifoldKind kind, int branch,
                                    double max_arclength, const ContinuationOptions& opt) {
  if (fp.stability != Stability::Saddle) throw ValidationError("manifold continuation needs a saddle");
  if (branch != 1 && branch != -1) throw ValidationError("branch must be +1 or -1");
  const bool unstable = kind == ManifoldKind::Unstable;
  const double lambda = unstable ? fp.eigenvalues(0) : 1.0 / fp.eigenvalues(1);
  const Point2 dir = (unstable ? fp.eigenvectors.col(0) : fp.eigenvectors.col(1)) * static_cast<double>(branch);
  const int power = lambda < 0.0 ? 2 : 1;
  const double growth = std::pow(std::abs(lambda), power);
  const auto& step = unstable ? m.forward : m.backward;
  const Point2 z = fp.location;

  auto evaluate = [&](int level, double u) -> Point2 {
    Point2 w = z + opt.delta0 * std::pow(growth, u) * dir;
    for (int k = 0; k < level * power && w.allFinite(); ++k) w = step(w);
    return w;
  };

  ManifoldCurve curve;
  curve.owner = fp.label;
  curve.kind = kind;
  curve.branch = branch;
  curve.power = power;
  curve.points.push_back(z);
  curve.arclength.push_back(0.0);

  for (int level = 0;; ++level) {
    std::vector<double> us{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<Point2> pts;
    for (double u : us) pts.push_back(evaluate(level, u));
    // Keep only the finite prefix; iterates beyond it left the domain.
    auto finite_prefix = [&] {
      std::size_t k = 0;
      while (k < pts.size() && pts[k].allFinite()) ++k;
      return k;
    };
    for (;;) {
      const std::size_t nf = finite_prefix();
      std::size_t cut = us.size();
      std::vector<char> split(us.size(), 0);
      bool any = false;
      for (std::size_t i = 0; i + 1 < us.size(); ++i) {
        if (i + 1 >= nf) {
          if (i < nf && us[i + 1] - us[i] > 1e-12) split[i] = 1, any = true;
          break;
        }
        if ((pts[i + 1] - pts[i]).norm() > opt.ds_max) split[i] = 1, any = true;
      }
      for (std::size_t i = 1; i + 1 < nf; ++i) {
        const Point2& prev = pts[i - 1];
        if (turning_angle(prev, pts[i], pts[i + 1]) <= opt.theta_max) continue;
        const double l0 = (pts[i] - prev).norm();
        const double l1 = (pts[i + 1] - pts[i]).norm();
        if (l0 <= opt.ds_min && l1 <= opt.ds_min) {
          if (!opt.truncate_on_blowup) throw CurvatureBlowup("turning angle above theta_max at spacing below ds_min");
          cut = std::min(cut, i);
          continue;
        }
        if (l0 > opt.ds_min) split[i - 1] = 1, any = true;
        if (l1 > opt.ds_min) split[i] = 1, any = true;
      }
      if (cut < us.size()) {
        us.resize(cut);
        pts.resize(cut);
        curve.truncated = true;
        continue;
      }
      if (!any) break;
      std::vector<double> nu;
      std::vector<Point2> np;
      for (std::size_t i = 0; i < us.size(); ++i) {
        nu.push_back(us[i]);
        np.push_back(pts[i]);
        if (i + 1 < us.size() && split[i]) {
          if (us[i + 1] - us[i] < 1e-15) throw CurvatureBlowup("parameter spacing exhausted");
          const double um = 0.5 * (us[i] + us[i + 1]);
          nu.push_back(um);
          np.push_back(evaluate(level, um));
        }
      }
      us.swap(nu);
      pts.swap(np);
      if (us.size() > opt.max_points) throw CurvatureBlowup("point budget exhausted during refinement");
    }

    const std::size_t nf = finite_prefix();
    bool done = nf < pts.size() || curve.truncated;
    for (std::size_t i = level == 0 ? 0 : 1; i < nf; ++i) {
      const double s = curve.arclength.back() + (pts[i] - curve.points.back()).norm();
      if (s > max_arclength) {
        done = true;
        break;
      }
      curve.points.push_back(pts[i]);
      curve.arclength.push_back(s);
    }
    if (done || curve.points.size() > opt.max_points) break;
  }
  return curve;
}

bool point_in_polygon(const Polygon& poly, const Point2& z) {
  if (!z.allFinite()) return false;
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = poly[i];
    const Point2& b = poly[j];
    if ((a.y() > z.y()) != (b.y() > z.y())) {
      const double x = a.x() + (z.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (z.x() < x) inside = !inside;
    }
  }
  return inside;
}

double polygon_area(const Polygon& poly) {
  double twice = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++)
    twice += poly[j].x() * poly[i].y() - poly[i].x() * poly[j].y();
  return std::abs(0.5 * twice);
}

double polyline_distance(const std::vector<Point2>& line, const Point2& z) {
  double best = std::numeric_limits<double>::infinity();
  if (line.size() == 1) return (line[0] - z).norm();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const Point2 d = line[i + 1] - line[i];
    const double len2 = d.squaredNorm();
    double t = len2 > 0.0 ? (z - line[i]).dot(d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    best = std::min(best, (line[i] + t * d - z).norm());
  }
  return best;
}

void mark_orders(ManifoldCurve& curve, const Polygon& region) {
  curve.order_marks.clear();
  bool seen_outside = false;
  bool prev_inside = false;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    const bool in = point_in_polygon(region, curve.points[i]);
    if (!in) seen_outside = true;
    if (in && seen_outside && !prev_inside && i > 0) curve.order_marks.push_back(curve.arclength[i]);
    prev_inside = in;
  }
}

RegionCurves region_curves(const PlanarMap& m, const SaddlePair& saddles, double max_arclength,
                           const ContinuationOptions& opt, std::size_t workers) {
  const Point2 mid = 0.5 * (saddles.a.location + saddles.b.location);
  auto branch_toward = [&](const FixedPointInfo& fp, int col) {
    return fp.eigenvectors.col(col).dot(mid - fp.location) >= 0.0 ? 1 : -1;
  };
  std::array<ManifoldCurve, 4> curves;
  const std::array<const FixedPointInfo*, 4> owners{&saddles.a, &saddles.a, &saddles.b, &saddles.b};
  const std::array<ManifoldKind, 4> kinds{ManifoldKind::Unstable, ManifoldKind::Stable, ManifoldKind::Unstable,
                                          ManifoldKind::Stable};
  parallel_for(
      4,
      [&](std::size_t k) {
        const int col = kinds[k] == ManifoldKind::Unstable ? 0 : 1;
        curves[k] = manifold_continuation(m, *owners[k], kinds[k], branch_toward(*owners[k], col), max_arclength, opt);
      },
      workers);
  return {curves[0], curves[1], curves[2], curves[3]};
}

FundamentalRegion fundamental_region(const FixedPointInfo& a, const FixedPointInfo& b, const RegionCurves& curves) {
  const auto hit_a = first_crossing(curves.unstable_a.points, curves.stable_b.points);
  if (!hit_a) throw NoIntersection("unstable manifold of A does not reach the stable manifold of B");
  const auto hit_b = first_crossing(curves.unstable_b.points, curves.stable_a.points);
  if (!hit_b) throw NoIntersection("unstable manifold of B does not reach the stable manifold of A");

  FundamentalRegion r;
  r.a = a.location;
  r.b = b.location;
  r.a1 = hit_a->at;
  r.b1 = hit_b->at;
  auto& poly = r.boundary;
  auto side = [&](int k, auto&& fill) {
    const std::size_t before = poly.size();
    fill();
    r.side_sizes[k] = poly.size() - before;
  };
  side(0, [&] {
    for (std::size_t i = 0; i <= hit_a->i; ++i) poly.push_back(curves.unstable_a.points[i]);
  });
  side(1, [&] {
    poly.push_back(r.a1);
    for (std::size_t j = hit_a->j + 1; j-- > 1;) poly.push_back(curves.stable_b.points[j]);
  });
  side(2, [&] {
    for (std::size_t i = 0; i <= hit_b->i; ++i) poly.push_back(curves.unstable_b.points[i]);
  });
  side(3, [&] {
    poly.push_back(r.b1);
    for (std::size_t j = hit_b->j + 1; j-- > 1;) poly.push_back(curves.stable_a.points[j]);
  });
  return r;
}

std::string to_string(const Rational& r) {
  return r.den == 1 ? std::to_string(r.num) : std::to_string(r.num) + "/" + std::to_string(r.den);
}

std::int64_t pow3(int n) {
  std::int64_t p = 1;
  for (int i = 0; i < n; ++i) p *= 3;
  return p;
}

std::size_t GapTree::gaps_at(int n1) const {
  if (n1 < 1 || n1 > depth) throw ValidationError("gap tree depth out of range");
  return levels[static_cast<std::size_t>(n1 - 1)].size();
}

std::size_t GapTree::cumulative(int n1) const {
  std::size_t total = 0;
  for (int d = 1; d <= n1; ++d) total += gaps_at(d);
  return total;
}

std::vector<GapNode> GapTree::ordered(int n1) const {
  if (n1 < 1 || n1 > depth) throw ValidationError("gap tree depth out of range");
  std::vector<GapNode> all;
  for (int d = 1; d <= n1; ++d) all.insert(all.end(), levels[d - 1].begin(), levels[d - 1].end());
  std::sort(all.begin(), all.end(), [](const GapNode& x, const GapNode& y) { return x.lo < y.lo; });
  for (std::size_t i = 0; i < all.size(); ++i) all[i].index = static_cast<std::int64_t>(i + 1);
  return all;
}

GapTree gap_tree(int tendril_order, int depth) {
  if (depth < 1) throw ValidationError("gap tree depth >= 1");
  if (depth > 20) throw ValidationError("gap tree depth <= 20");
  GapTree tree;
  tree.tendril_order = tendril_order;
  tree.depth = depth;
  for (int d = 0; d < depth; ++d) tree.scale *= 5;
  std::vector<std::pair<std::int64_t, std::int64_t>> strips{{0, tree.scale}};
  tree.levels.resize(static_cast<std::size_t>(depth));
  for (int d = 1; d <= depth; ++d) {
    std::vector<std::pair<std::int64_t, std::int64_t>> next;
    next.reserve(strips.size() * 3);
    auto& gaps = tree.levels[static_cast<std::size_t>(d - 1)];
    for (const auto& [lo, hi] : strips) {
      const std::int64_t w = (hi - lo) / 5;
      next.emplace_back(lo, lo + w);
      next.emplace_back(lo + 2 * w, lo + 3 * w);
      next.emplace_back(lo + 4 * w, hi);
      gaps.push_back({tendril_order + d, d, 0, lo + w, lo + 2 * w});
      gaps.push_back({tendril_order + d, d, 0, lo + 3 * w, lo + 4 * w});
    }
    strips.swap(next);
  }
  const auto all = tree.ordered(depth);
  for (auto& level : tree.levels)
    for (auto& g : level)
      g.index = std::lower_bound(all.begin(), all.end(), g.lo,
                                 [](const GapNode& x, std::int64_t lo) { return x.lo < lo; })
                    ->index;
  return tree;
}

Rational development_gamma(std::int64_t r, int n) {
  if (n < 1) throw ValidationError("gap order n >= 1");
  const std::int64_t den = pow3(n);
  if (r < 1 || r > den) throw ValidationError("gap index must lie in [1, 3^n]");
  const std::int64_t g = std::gcd(r, den);
  return {r / g, den / g};
}

std::int64_t symbolic_tip_index(const GapTree& tree, int n, std::int64_t tip) {
  if (tip >= tree.scale) return pow3(n);
  const auto gaps = tree.ordered(n);
  std::int64_t before = 0;
  for (const auto& g : gaps) {
    if (tip >= g.lo && tip < g.hi) return g.index;
    if (g.hi <= tip) before = g.index;
  }
  if (before == 0) throw TipNotFound("tip does not reach the first gap");
  return before;
}

namespace {

struct Raster {
  Eigen::Array2d origin;
  Eigen::Array2d cell;
  std::size_t n = 0;

  Point2 center(std::size_t ix, std::size_t iy) const {
    return {origin.x() + (static_cast<double>(ix) + 0.5) * cell.x(),
            origin.y() + (static_cast<double>(iy) + 0.5) * cell.y()};
  }
  std::optional<std::size_t> index_of(const Point2& z) const {
    const double fx = (z.x() - origin.x()) / cell.x();
    const double fy = (z.y() - origin.y()) / cell.y();
    if (!(fx >= 0.0 && fy >= 0.0)) return std::nullopt;
    const auto ix = static_cast<std::size_t>(fx);
    const auto iy = static_cast<std::size_t>(fy);
    if (ix >= n || iy >= n) return std::nullopt;
    return iy * n + ix;
  }
};

/// Connected components (4-neighbour) of cells where key(i) holds the same
/// non-negative value. Returns per-cell component ids (-1 outside).
std::vector<int> label_components(std::size_t n, const std::vector<int>& key, std::vector<std::size_t>& sizes) {
  std::vector<int> comp(key.size(), -1);
  sizes.clear();
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < key.size(); ++start) {
    if (key[start] < 0 || comp[start] >= 0) continue;
    const int id = static_cast<int>(sizes.size());
    sizes.push_back(0);
    comp[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t c = stack.back();
      stack.pop_back();
      ++sizes[id];
      const std::size_t ix = c % n;
      const std::size_t iy = c / n;
      const std::array<std::pair<bool, std::size_t>, 4> nb{{{ix > 0, c - 1},
                                                           {ix + 1 < n, c + 1},
                                                           {iy > 0, c - n},
                                                           {iy + 1 < n, c + n}}};
      for (const auto& [ok, d] : nb) {
        if (ok && comp[d] < 0 && key[d] == key[c]) {
          comp[d] = id;
          stack.push_back(d);
        }
      }
    }
  }
  return comp;
}

/// Densified copy of a polyline with spacing at most h.
std::vector<Point2> densify(const std::vector<Point2>& line, double h) {
  std::vector<Point2> out;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const double len = (line[i + 1] - line[i]).norm();
    const int k = std::max(1, static_cast<int>(std::ceil(len / h)));
    for (int j = 0; j < k; ++j) out.push_back(line[i] + (line[i + 1] - line[i]) * (static_cast<double>(j) / k));
  }
  if (!line.empty()) out.push_back(line.back());
  return out;
}

/// Component id of the inside cell at or next to z, if any.
int component_near(const Raster& ras, const std::vector<int>& comp, const Point2& z) {
  const auto c = ras.index_of(z);
  if (!c) return -1;
  if (comp[*c] >= 0) return comp[*c];
  const std::size_t ix = *c % ras.n;
  const std::size_t iy = *c / ras.n;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) {
      const auto jx = static_cast<long>(ix) + dx;
      const auto jy = static_cast<long>(iy) + dy;
      if (jx < 0 || jy < 0 || jx >= static_cast<long>(ras.n) || jy >= static_cast<long>(ras.n)) continue;
      const int id = comp[static_cast<std::size_t>(jy) * ras.n + static_cast<std::size_t>(jx)];
      if (id >= 0) return id;
    }
  return -1;
}

}  // namespace

HorseshoeReport development_parameter(const PlanarMap& m, const FundamentalRegion& region, const GapTree& tree,
                                      int n, const HorseshoeOptions& opt, std::size_t workers) {
  if (n < 1 || n > tree.depth) throw ValidationError("order n must lie in [1, gap tree depth]");
  if (opt.raster < 16) throw ValidationError("raster must be at least 16 cells per axis");
  const Polygon& poly = region.boundary;
  if (poly.size() < 3) throw ValidationError("fundamental region needs a closed boundary");

  Eigen::Array2d lo = poly.front().array();
  Eigen::Array2d hi = lo;
  for (const auto& v : poly) {
    lo = lo.min(v.array());
    hi = hi.max(v.array());
  }
  Raster ras{lo, (hi - lo) / static_cast<double>(opt.raster), opt.raster};
  const std::size_t cells = ras.n * ras.n;

  // First-exit order under forward iteration (n+1 when the cell stays), and
  // whether the backward image has left the region.
  std::vector<int> exit_fwd(cells, -1);
  std::vector<char> exit_bwd(cells, 0);
  parallel_for(
      ras.n,
      [&](std::size_t iy) {
        for (std::size_t ix = 0; ix < ras.n; ++ix) {
          const Point2 z = ras.center(ix, iy);
          if (!point_in_polygon(poly, z)) continue;
          const std::size_t c = iy * ras.n + ix;
          int k = 1;
          Point2 w = z;
          for (; k <= n; ++k) {
            w = m.forward(w);
            if (!point_in_polygon(poly, w)) break;
          }
          exit_fwd[c] = k;
          exit_bwd[c] = point_in_polygon(poly, m.backward(z)) ? 0 : 1;
        }
      },
      workers);

  std::vector<int> gap_key(cells, -1);
  for (std::size_t c = 0; c < cells; ++c)
    if (exit_fwd[c] >= 1 && exit_fwd[c] <= n) gap_key[c] = exit_fwd[c];
  std::vector<std::size_t> gap_sizes;
  std::vector<int> gap_comp = label_components(ras.n, gap_key, gap_sizes);
  std::vector<int> u_key(cells, -1);
  for (std::size_t c = 0; c < cells; ++c)
    if (exit_fwd[c] >= 0 && exit_bwd[c]) u_key[c] = 1;
  std::vector<std::size_t> u_sizes;
  std::vector<int> u_comp = label_components(ras.n, u_key, u_sizes);

  // Drop raster noise.
  for (std::size_t c = 0; c < cells; ++c) {
    if (gap_comp[c] >= 0 && gap_sizes[gap_comp[c]] < opt.min_cells) gap_comp[c] = -1;
    if (u_comp[c] >= 0 && u_sizes[u_comp[c]] < opt.min_cells) u_comp[c] = -1;
  }

  // Boundary sides in order: W_u(A), W_s(B) from A1, W_u(B), W_s(A) from B1.
  std::array<std::vector<Point2>, 4> sides;
  std::size_t at = 0;
  for (int k = 0; k < 4; ++k) {
    std::vector<Point2> s(poly.begin() + static_cast<long>(at), poly.begin() + static_cast<long>(at + region.side_sizes[k]));
    at += region.side_sizes[k];
    s.push_back(at < poly.size() ? poly[at] : poly.front());
    sides[k] = densify(s, 0.25 * ras.cell.minCoeff());
  }

  HorseshoeReport report;
  report.n_used = n;
  const std::size_t ngaps = gap_sizes.size();
  std::vector<double> pos_a(ngaps, kNaN), pos_b(ngaps, kNaN);
  for (int which : {0, 2}) {
    const auto& side = sides[which];
    const std::vector<double> s = cumulative_length(side);
    std::vector<double> sum(ngaps, 0.0);
    std::vector<std::size_t> count(ngaps, 0);
    for (std::size_t i = 0; i < side.size(); ++i) {
      const int id = component_near(ras, gap_comp, side[i]);
      if (id < 0) continue;
      sum[id] += s[i] / s.back();
      ++count[id];
    }
    auto& pos = which == 0 ? pos_a : pos_b;
    for (std::size_t g = 0; g < ngaps; ++g)
      if (count[g] > 0) pos[g] = sum[g] / static_cast<double>(count[g]);
  }

  std::vector<int> live(ngaps, 0);
  for (std::size_t c = 0; c < cells; ++c)
    if (gap_comp[c] >= 0) live[gap_comp[c]] = 1;
  std::vector<Eigen::Vector3d> acc(ngaps, Eigen::Vector3d::Zero());
  for (std::size_t c = 0; c < cells; ++c) {
    if (gap_comp[c] < 0) continue;
    const Point2 z = ras.center(c % ras.n, c / ras.n);
    acc[gap_comp[c]] += Eigen::Vector3d(z.x(), z.y(), 1.0);
  }
  std::vector<int> gap_order(ngaps, 0);
  for (std::size_t c = 0; c < cells; ++c)
    if (gap_comp[c] >= 0) gap_order[gap_comp[c]] = exit_fwd[c];
  for (std::size_t g = 0; g < ngaps; ++g) {
    if (!live[g]) continue;
    GapComponent gc;
    gc.order = gap_order[g];
    gc.cells = static_cast<std::size_t>(acc[g].z());
    gc.centroid = acc[g].head<2>() / acc[g].z();
    gc.position_a = pos_a[g];
    gc.position_b = pos_b[g];
    report.stable_gaps.push_back(gc);
  }

  std::vector<int> u_live(u_sizes.size(), 0);
  for (std::size_t c = 0; c < cells; ++c)
    if (u_comp[c] >= 0) u_live[u_comp[c]] = 1;
  for (int v : u_live) report.unstable_gaps += static_cast<std::size_t>(v);

  // overlap[u][g]: cells shared by unstable gap u and stable gap g.
  std::vector<std::vector<std::size_t>> overlap(u_sizes.size(), std::vector<std::size_t>(ngaps, 0));
  for (std::size_t c = 0; c < cells; ++c)
    if (u_comp[c] >= 0 && gap_comp[c] >= 0) ++overlap[u_comp[c]][gap_comp[c]];

  const std::int64_t full = pow3(n);
  bool ambiguous = false;
  auto evaluate = [&](const std::vector<double>& pos, int far_side, const char* name, std::int64_t& r_out,
                      bool& complete_out) {
    std::vector<std::size_t> ordered;
    for (std::size_t g = 0; g < ngaps; ++g)
      if (live[g] && std::isfinite(pos[g])) ordered.push_back(g);
    std::sort(ordered.begin(), ordered.end(), [&](std::size_t x, std::size_t y) { return pos[x] < pos[y]; });
    if (ordered.empty()) throw TipNotFound(std::string("no stable gap crosses the unstable side of ") + name);
    const std::size_t first = ordered.front();
    int tip_gap = -1;
    for (std::size_t u = 0; u < u_sizes.size(); ++u) {
      if (!u_live[u] || overlap[u][first] == 0) continue;
      if (tip_gap < 0 || overlap[u][first] > overlap[static_cast<std::size_t>(tip_gap)][first])
        tip_gap = static_cast<int>(u);
    }
    if (tip_gap < 0) throw TipNotFound(std::string("no unstable gap reaches the first stable gap of ") + name);
    const auto& ov = overlap[static_cast<std::size_t>(tip_gap)];
    std::size_t r = 0;
    while (r < ordered.size() && ov[ordered[r]] > 0) ++r;
    for (std::size_t k = r; k < ordered.size(); ++k)
      if (ov[ordered[k]] > 0) {
        report.ambiguities.push_back(std::string(name) + ": unstable gap skips stable gap " + std::to_string(r + 1));
        ambiguous = true;
        break;
      }
    if (ordered.size() != static_cast<std::size_t>(full - 1))
      report.ambiguities.push_back(std::string(name) + ": " + std::to_string(ordered.size()) +
                                   " ordered gaps against " + std::to_string(full - 1) + " in the symbolic tree");
    bool touches_far = false;
    for (const auto& z : sides[static_cast<std::size_t>(far_side)])
      if (component_near(ras, u_comp, z) == tip_gap) {
        touches_far = true;
        break;
      }
    complete_out = r == ordered.size() && touches_far;
    if (!complete_out && ov[ordered[r - 1]] <= opt.ambiguity_cells) {
      report.ambiguities.push_back(std::string(name) + ": tip grazes stable gap " + std::to_string(r));
      ambiguous = true;
    }
    r_out = complete_out ? full : std::min<std::int64_t>(static_cast<std::int64_t>(r), full);
  };
  evaluate(pos_a, 1, "A", report.r_a, report.complete_a);
  evaluate(pos_b, 3, "B", report.r_b, report.complete_b);
  report.gamma_a = development_gamma(report.r_a, n);
  report.gamma_b = development_gamma(report.r_b, n);
  report.complete = report.complete_a && report.complete_b;
  if (ambiguous) throw AmbiguousTip("tip position is ambiguous at this raster", report);
  return report;
}

}  // namespace dscat

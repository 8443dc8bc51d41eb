#include "dscat/return_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "dscat/parallel.hpp"

namespace dscat {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void require_periodic(const SystemConfig& cfg) {
  cfg.validate();
  if (cfg.driver == DriverKind::F1Finite) throw ValidationError("return map needs the periodic driver");
}

double horizon_of(const SystemConfig& cfg, const ReturnOptions& opt) {
  return opt.horizon > 0.0 ? opt.horizon : cfg.noreturn_time();
}

double h_of(const SystemConfig& cfg, double x) {
  return cfg.omega * cfg.omega * potential_value(cfg.potential, x);
}

}  // namespace

double wrap_phase(double tau) {
  double r = std::fmod(tau, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

SectionPoint canonical_point(double p, double t, double nu) {
  if (p < 0.0) return {-p, wrap_phase(nu * t + std::numbers::pi)};
  return {p, wrap_phase(nu * t)};
}

SectionPoint mirror(const SectionPoint& pt) { return {pt.p, wrap_phase(-pt.tau)}; }

ReturnOutcome return_map(const SystemConfig& cfg, const SectionPoint& pt, Direction dir, const ReturnOptions& opt) {
  require_periodic(cfg);
  if (!(pt.p >= 0.0)) throw ValidationError("section momentum must be >= 0");
  const double sign = dir == Direction::Forward ? 1.0 : -1.0;
  const double t0 = pt.tau / cfg.nu;
  IntegrateOptions io;
  io.t_end = t0 + sign * horizon_of(cfg, opt);
  io.stop_after_crossings = 1;
  const Trajectory tr = integrate(cfg, {0.0, pt.p, t0}, io);

  ReturnOutcome out;
  out.direction = dir;
  const auto& zc = tr.events.zero_crossings;
  if (zc.size() >= 2) {
    const Crossing& c = zc.back();
    out.kind = ReturnKind::Returns;
    out.next = canonical_point(c.p, c.t, cfg.nu);
    out.return_time = std::abs(c.t - t0);
    for (const auto& tp : tr.events.turning_points)
      if (std::abs(tp.x) > std::abs(out.turning_x)) out.turning_x = tp.x;
    return out;
  }
  out.return_time = std::abs(tr.final_state.t - t0);
  out.kind = tr.events.escaped && tr.events.reason == EscapeReason::Energy ? ReturnKind::Escapes
                                                                           : ReturnKind::Undecided;
  return out;
}

double h_plus(const SystemConfig& cfg, const SectionPoint& pt, const ReturnOptions& opt) {
  const ReturnOutcome o = return_map(cfg, pt, Direction::Forward, opt);
  if (o.kind != ReturnKind::Returns) throw NotInRPlus("point does not return forward");
  return h_of(cfg, o.turning_x);
}

double h_minus(const SystemConfig& cfg, const SectionPoint& pt, const ReturnOptions& opt) {
  const ReturnOutcome o = return_map(cfg, pt, Direction::Backward, opt);
  if (o.kind != ReturnKind::Returns) throw NotInRPlus("point does not return backward");
  return h_of(cfg, o.turning_x);
}

const char* to_string(ForwardClass c) {
  switch (c) {
    case ForwardClass::Rplus: return "R+";
    case ForwardClass::Pplus_approx: return "P+";
    case ForwardClass::Hplus: return "H+";
    case ForwardClass::Undecided: return "undecided";
  }
  return "?";
}

const char* to_string(BackwardClass c) {
  switch (c) {
    case BackwardClass::Rminus: return "R-";
    case BackwardClass::Pminus_approx: return "P-";
    case BackwardClass::Hminus: return "H-";
    case BackwardClass::Undecided: return "undecided";
  }
  return "?";
}

const char* to_string(Membership m) {
  switch (m) {
    case Membership::False: return "false";
    case Membership::True: return "true";
    case Membership::Undecided: return "undecided";
  }
  return "?";
}

namespace {

ForwardClass forward_class(ReturnKind k) {
  switch (k) {
    case ReturnKind::Returns: return ForwardClass::Rplus;
    case ReturnKind::Escapes: return ForwardClass::Hplus;
    case ReturnKind::Undecided: break;
  }
  return ForwardClass::Undecided;
}

BackwardClass backward_class(ReturnKind k) {
  switch (k) {
    case ReturnKind::Returns: return BackwardClass::Rminus;
    case ReturnKind::Escapes: return BackwardClass::Hminus;
    case ReturnKind::Undecided: break;
  }
  return BackwardClass::Undecided;
}

}  // namespace

RegionClass classify(const SystemConfig& cfg, const SectionPoint& pt, const ReturnOptions& opt) {
  return {forward_class(return_map(cfg, pt, Direction::Forward, opt).kind),
          backward_class(return_map(cfg, pt, Direction::Backward, opt).kind)};
}

BoundaryEstimate boundary_bisect(const SystemConfig& cfg, double tau, double p_a, double p_b, Direction dir,
                                 double tol, const ReturnOptions& opt) {
  if (!(tol > 0.0)) throw ValidationError("bisection tolerance must be > 0");
  BoundaryEstimate est;
  const auto eval = [&](double p) {
    ++est.evaluations;
    const ReturnOutcome o = return_map(cfg, {p, tau}, dir, opt);
    return BisectionStep{p, o.kind, o.return_time};
  };
  const BisectionStep a = eval(p_a), b = eval(p_b);
  const bool esc_a = a.kind == ReturnKind::Escapes, esc_b = b.kind == ReturnKind::Escapes;
  if (esc_a == esc_b) throw SameClassEndpoints("both endpoints lie on the same side of the boundary");
  BisectionStep in = esc_a ? b : a;
  double out = esc_a ? p_a : p_b;
  est.inside_sequence.push_back(in);
  while (std::abs(out - in.p) > tol) {
    const BisectionStep m = eval(0.5 * (in.p + out));
    if (m.kind == ReturnKind::Escapes) {
      out = m.p;
    } else {
      in = m;
      est.inside_sequence.push_back(m);
    }
  }
  est.p_inside = in.p;
  est.p_outside = out;
  est.p_boundary = 0.5 * (in.p + out);
  return est;
}

Membership qn_membership(const SystemConfig& cfg, const SectionPoint& pt, int n, const ReturnOptions& opt) {
  if (n < 1) throw ValidationError("Q_n needs n >= 1");
  SectionPoint cur = pt;
  for (int k = 1; k <= n; ++k) {
    const ReturnOutcome o = return_map(cfg, cur, Direction::Forward, opt);
    if (o.kind == ReturnKind::Undecided) return Membership::Undecided;
    if (k == n) return o.kind == ReturnKind::Escapes ? Membership::True : Membership::False;
    if (o.kind == ReturnKind::Escapes) return Membership::False;
    cur = o.next;
  }
  return Membership::False;
}

int escape_iterate(const SystemConfig& cfg, const SectionPoint& pt, int n_max, const ReturnOptions& opt) {
  SectionPoint cur = pt;
  for (int k = 1; k <= n_max; ++k) {
    const ReturnOutcome o = return_map(cfg, cur, Direction::Forward, opt);
    if (o.kind == ReturnKind::Escapes) return k;
    if (o.kind == ReturnKind::Undecided) return -1;
    cur = o.next;
  }
  return 0;
}

double convex_hull_area(std::vector<std::pair<double, double>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return 0.0;
  const auto cross = [](const auto& o, const auto& a, const auto& b) {
    return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
  };
  std::vector<std::pair<double, double>> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& q : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], q) <= 0.0) --k;
    hull[k++] = q;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  double area = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto& u = hull[i];
    const auto& v = hull[(i + 1) % hull.size()];
    area += u.first * v.second - v.first * u.second;
  }
  return 0.5 * std::abs(area);
}

AreaReport area_check(const SystemConfig& cfg, const SectionDisk& disk, std::size_t samples, std::uint64_t seed,
                      std::size_t workers, const ReturnOptions& opt) {
  require_periodic(cfg);
  if (samples < 3) throw ValidationError("area check needs >= 3 samples");
  if (!(disk.radius > 0.0)) throw ValidationError("disk radius must be > 0");
  // chart (J, tau) with J = p^2/2, where p dp dtau is the plain area element
  const double jc = 0.5 * disk.p_center * disk.p_center;
  if (disk.radius > jc) throw ValidationError("disk must stay clear of p = 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<std::pair<double, double>> src(samples), img(samples);
  for (auto& s : src) {
    double dx, dy;
    do {
      dx = unit(rng);
      dy = unit(rng);
    } while (dx * dx + dy * dy > 1.0);
    s = {jc + disk.radius * dx, disk.tau_center + disk.radius * dy};
  }
  std::vector<unsigned char> returned(samples, 0);
  parallel_for(
      samples,
      [&](std::size_t i) {
        const SectionPoint pt{std::sqrt(2.0 * src[i].first), wrap_phase(src[i].second)};
        const ReturnOutcome o = return_map(cfg, pt, Direction::Forward, opt);
        if (o.kind != ReturnKind::Returns) return;
        returned[i] = 1;
        img[i] = {0.5 * o.next.p * o.next.p, o.next.tau};
      },
      workers);
  if (std::find(returned.begin(), returned.end(), 0) != returned.end())
    throw RegionNotInRPlus("a disk sample does not return");
  // unwrap the image phases onto the branch of the first sample
  const double ref = img[0].second;
  for (auto& q : img) q.second = ref + std::remainder(q.second - ref, kTwoPi);
  AreaReport rep;
  rep.samples = samples;
  rep.source_area = convex_hull_area(src);
  rep.image_area = convex_hull_area(img);
  rep.ratio = rep.image_area / rep.source_area;
  return rep;
}

std::vector<GammaCell> classify_grid(const SystemConfig& cfg, double p_lo, double p_hi, std::size_t np,
                                     std::size_t ntau, int n_max, std::size_t workers, const ReturnOptions& opt) {
  require_periodic(cfg);
  if (np < 1 || ntau < 1) throw ValidationError("grid needs >= 1 point per axis");
  if (!(p_lo >= 0.0 && p_hi >= p_lo)) throw ValidationError("grid needs 0 <= p_lo <= p_hi");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<GammaCell> cells(np * ntau);
  parallel_for(
      cells.size(),
      [&](std::size_t i) {
        const std::size_t it = i / np, ip = i % np;
        GammaCell& c = cells[i];
        c.pt.p = np > 1 ? p_lo + (p_hi - p_lo) * static_cast<double>(ip) / static_cast<double>(np - 1) : p_lo;
        c.pt.tau = kTwoPi * static_cast<double>(it) / static_cast<double>(ntau);
        const ReturnOutcome f = return_map(cfg, c.pt, Direction::Forward, opt);
        const ReturnOutcome b = return_map(cfg, c.pt, Direction::Backward, opt);
        c.cls = {forward_class(f.kind), backward_class(b.kind)};
        c.h_plus = f.kind == ReturnKind::Returns ? h_of(cfg, f.turning_x) : nan;
        c.h_minus = b.kind == ReturnKind::Returns ? h_of(cfg, b.turning_x) : nan;
        if (f.kind == ReturnKind::Escapes) {
          c.q_n = 1;
        } else if (f.kind == ReturnKind::Undecided) {
          c.q_n = -1;
        } else if (n_max > 1) {
          const int k = escape_iterate(cfg, f.next, n_max - 1, opt);
          c.q_n = k > 0 ? k + 1 : k;
        }
      },
      workers);
  return cells;
}

}  // namespace dscat

#include "dscat/dynamics.hpp"

#include <cmath>
#include <string>

namespace dscat {

void SystemConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("invalid config: " + what); };
  if (!(omega > 0.0) || !std::isfinite(omega)) fail("omega > 0");
  if (!(nu > 0.0) || !std::isfinite(nu)) fail("nu > 0");
  if (envelope_n < 1) fail("envelope_n >= 1");
  if (dt < 0.0 || !std::isfinite(dt)) fail("dt > 0");
  if (!(escape_x > 2.0)) fail("escape_x > 2");
  if (t_noreturn < 0.0) fail("t_noreturn > 0");
  if (!std::isfinite(e0)) fail("e0 finite");
  if (!std::isfinite(launch_phase)) fail("launch_phase finite");
  if (!(escape_margin >= 0.0)) fail("escape_margin >= 0");
  if (!(parabolic_tol >= 0.0)) fail("parabolic_tol >= 0");
  if (max_steps == 0) fail("max_steps >= 1");
}

double driver_value(DriverKind kind, const SystemConfig& cfg, double t) {
  switch (kind) {
    case DriverKind::F1Finite: {
      if (t < 0.0 || t > cfg.switch_off_time()) return 0.0;
      const double env = std::sin(cfg.nu * t / cfg.envelope_n);
      return cfg.e0 * env * env * std::cos(cfg.nu * t);
    }
    case DriverKind::F2Periodic:
      return cfg.e0 * std::sin(cfg.nu * t);
    case DriverKind::None:
      return 0.0;
  }
  return 0.0;
}

double free_energy(const SystemConfig& cfg, const State& s) {
  return 0.5 * s.p * s.p + cfg.omega * cfg.omega * potential_value(cfg.potential, s.x);
}

double hamiltonian(const SystemConfig& cfg, const State& s) {
  return free_energy(cfg, s) - driver_value(cfg.driver, cfg, s.t) * s.x;
}

double quiver_velocity(const SystemConfig& cfg, double t) {
  if (cfg.driver != DriverKind::F2Periodic) return 0.0;
  return -cfg.e0 / cfg.nu * std::cos(cfg.nu * t);
}

double comoving_energy(const SystemConfig& cfg, const State& s) {
  if (cfg.driver != DriverKind::F2Periodic) return free_energy(cfg, s);
  const double shift = -cfg.e0 / (cfg.nu * cfg.nu) * std::sin(cfg.nu * s.t);
  const double u = s.p - quiver_velocity(cfg, s.t);
  return 0.5 * u * u + cfg.omega * cfg.omega * potential_value(cfg.potential, s.x - shift);
}

namespace {

struct Params {
  double w2, e0, nu, inv_n, t_off;
};

template <PotentialKind P>
inline double force(double x) {
  return potential_force<double>(P, x);
}

template <DriverKind D>
inline double drive(const Params& q, double t) {
  if constexpr (D == DriverKind::F2Periodic) {
    return q.e0 * std::sin(q.nu * t);
  } else if constexpr (D == DriverKind::F1Finite) {
    if (t < 0.0 || t > q.t_off) return 0.0;
    const double env = std::sin(q.nu * t * q.inv_n);
    return q.e0 * env * env * std::cos(q.nu * t);
  } else {
    return 0.0;
  }
}

template <PotentialKind P>
inline State step_with(const Params& q, const State& s, double h, double f0, double fm, double f1) {
  const double hh = 0.5 * h;
  const double k1x = s.p;
  const double k1p = q.w2 * force<P>(s.x) + f0;
  const double k2x = s.p + hh * k1p;
  const double k2p = q.w2 * force<P>(s.x + hh * k1x) + fm;
  const double k3x = s.p + hh * k2p;
  const double k3p = q.w2 * force<P>(s.x + hh * k2x) + fm;
  const double k4x = s.p + h * k3p;
  const double k4p = q.w2 * force<P>(s.x + h * k3x) + f1;
  State out;
  out.x = s.x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
  out.p = s.p + h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
  out.t = s.t + h;
  return out;
}

template <PotentialKind P, DriverKind D>
inline State substep(const Params& q, const State& s, double h) {
  return step_with<P>(q, s, h, drive<D>(q, s.t), drive<D>(q, s.t + 0.5 * h), drive<D>(q, s.t + h));
}

inline int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

constexpr double kEventTol = 1e-10;
constexpr int kMaxBisect = 200;

// Bisection on the sub-step length for a sign change of x (or p) inside
// [cur, cur+h]; `side` is the sign at the start of the step.
template <PotentialKind P, DriverKind D, bool OnX>
State refine(const Params& q, const State& cur, double h, int side) {
  double lo = 0.0, hi = h;
  State mid_state = cur;
  for (int it = 0; it < kMaxBisect; ++it) {
    const double mid = 0.5 * (lo + hi);
    mid_state = substep<P, D>(q, cur, mid);
    const double v = OnX ? mid_state.x : mid_state.p;
    if (std::abs(v) < kEventTol || mid == lo || mid == hi) break;
    if (sign_of(v) == side)
      lo = mid;
    else
      hi = mid;
  }
  return mid_state;
}

template <PotentialKind P, DriverKind D>
Trajectory run(const SystemConfig& cfg, const State& s0, const IntegrateOptions& opt) {
  const Params q{cfg.omega * cfg.omega, cfg.amplitude(), cfg.nu, 1.0 / cfg.envelope_n,
                 cfg.switch_off_time()};
  Trajectory tr;
  EventLog& ev = tr.events;

  const double span = opt.t_end - s0.t;
  const double dir = span >= 0.0 ? 1.0 : -1.0;
  std::size_t n_steps = static_cast<std::size_t>(std::ceil(std::abs(span) / cfg.step() - 1e-9));
  if (n_steps == 0 && span != 0.0) n_steps = 1;
  const double h = n_steps > 0 ? span / static_cast<double>(n_steps) : 0.0;

  const double h_esc = cfg.escape_energy() + (q.e0 != 0.0 ? cfg.escape_margin : 0.0);
  const double t_noret = cfg.noreturn_time();

  State cur = s0;
  if (!std::isfinite(cur.x) || !std::isfinite(cur.p) || !std::isfinite(cur.t))
    throw NonFiniteState("non-finite initial state");
  if (opt.sample_stride > 0) tr.samples.push_back(cur);

  int side = sign_of(cur.x);
  int crossings_after_start = 0;
  if (cur.x == 0.0) ev.zero_crossings.push_back({cur.t, cur.p});
  double last_cross_t = cur.t;
  bool stop = false;
  double stop_time = 0.0;
  bool stop_timer = false;

  const bool strobe = opt.strobe_period > 0.0;
  double strobe_k = 0.0;
  if (strobe) {
    const double rel = (cur.t - opt.strobe_origin) / opt.strobe_period;
    strobe_k = dir > 0 ? std::ceil(rel - 1e-12) : std::floor(rel + 1e-12);
  }

  auto escape_armed = [&](double t) {
    if (!opt.detect_escape) return false;
    if constexpr (D == DriverKind::F1Finite) return dir > 0 ? t >= q.t_off : t <= 0.0;
    return true;
  };

  double f_cur = drive<D>(q, cur.t);
  for (std::size_t k = 0; k < n_steps && !stop; ++k) {
    if (k >= cfg.max_steps)
      throw StepLimitExceeded("integration exceeded " + std::to_string(cfg.max_steps) + " steps");
    const double t_next = k + 1 == n_steps ? opt.t_end : s0.t + static_cast<double>(k + 1) * h;
    const double hk = t_next - cur.t;
    const double f_mid = drive<D>(q, cur.t + 0.5 * hk);
    const double f_next = drive<D>(q, t_next);
    State nxt = step_with<P>(q, cur, hk, f_cur, f_mid, f_next);
    nxt.t = t_next;
    if (!std::isfinite(nxt.x) || !std::isfinite(nxt.p))
      throw NonFiniteState("state overflow at t=" + std::to_string(nxt.t));

    if (strobe) {
      for (;;) {
        const double ts = opt.strobe_origin + strobe_k * opt.strobe_period;
        if (dir * (ts - cur.t) < 0.0 || dir * (ts - t_next) > 0.0) break;
        State ss = ts == t_next ? nxt : substep<P, D>(q, cur, ts - cur.t);
        ss.t = ts;
        tr.strobe.push_back(ss);
        strobe_k += dir;
      }
    }

    // turning points
    if (cur.p != 0.0 && (nxt.p == 0.0 || sign_of(nxt.p) != sign_of(cur.p))) {
      State r = nxt.p == 0.0 ? nxt : refine<P, D, false>(q, cur, hk, sign_of(cur.p));
      ev.turning_points.push_back({r.t, r.x});
    }

    // zero crossings
    const int s_next = sign_of(nxt.x);
    if (s_next == 0) {
      ev.zero_crossings.push_back({nxt.t, nxt.p});
      ++crossings_after_start;
      last_cross_t = nxt.t;
      side = 0;
    } else if (side == 0) {
      side = s_next;
    } else if (s_next != side) {
      State r = refine<P, D, true>(q, cur, hk, side);
      ev.zero_crossings.push_back({r.t, r.p});
      ++crossings_after_start;
      last_cross_t = r.t;
      side = s_next;
    }
    if (opt.stop_after_crossings >= 0 && crossings_after_start >= opt.stop_after_crossings)
      stop = true;

    cur = nxt;
    f_cur = f_next;
    if (opt.sample_stride > 0 && (k + 1) % opt.sample_stride == 0) tr.samples.push_back(cur);

    if (!ev.escaped && escape_armed(cur.t)) {
      bool esc = false;
      if (std::abs(cur.x) > cfg.escape_x) {
        const double u = cur.p - quiver_velocity(cfg, cur.t);
        if (dir * u * cur.x > 0.0 && comoving_energy(cfg, cur) > h_esc) {
          esc = true;
          ev.reason = EscapeReason::Energy;
        }
      }
      if (!esc && dir * (cur.t - last_cross_t) > t_noret) {
        esc = true;
        ev.reason = EscapeReason::NoReturn;
      }
      if (esc) {
        ev.escaped = true;
        ev.escape_time = cur.t;
        if (opt.stop_on_escape) {
          stop_timer = true;
          stop_time = cur.t + dir * opt.run_after_escape;
        }
      }
    }
    if (stop_timer && dir * (cur.t - stop_time) >= 0.0) stop = true;
  }
  tr.final_state = cur;
  if (opt.sample_stride > 0 && (tr.samples.empty() || tr.samples.back().t != cur.t))
    tr.samples.push_back(cur);
  return tr;
}

template <PotentialKind P>
Trajectory dispatch_driver(const SystemConfig& cfg, const State& s0, const IntegrateOptions& opt) {
  switch (cfg.driver) {
    case DriverKind::F1Finite: return run<P, DriverKind::F1Finite>(cfg, s0, opt);
    case DriverKind::F2Periodic: return run<P, DriverKind::F2Periodic>(cfg, s0, opt);
    case DriverKind::None: return run<P, DriverKind::None>(cfg, s0, opt);
  }
  return {};
}

}  // namespace

State rk4_step(const SystemConfig& cfg, const State& s, double dt) {
  const Params q{cfg.omega * cfg.omega, cfg.amplitude(), cfg.nu, 1.0 / cfg.envelope_n,
                 cfg.switch_off_time()};
  auto go = [&]<PotentialKind P>() {
    switch (cfg.driver) {
      case DriverKind::F1Finite: return substep<P, DriverKind::F1Finite>(q, s, dt);
      case DriverKind::F2Periodic: return substep<P, DriverKind::F2Periodic>(q, s, dt);
      case DriverKind::None: break;
    }
    return substep<P, DriverKind::None>(q, s, dt);
  };
  if (cfg.potential == PotentialKind::V1RigidSpheres)
    return go.template operator()<PotentialKind::V1RigidSpheres>();
  return go.template operator()<PotentialKind::V2Lorentz>();
}

Trajectory integrate(const SystemConfig& cfg, const State& s0, const IntegrateOptions& opt) {
  if (cfg.potential == PotentialKind::V1RigidSpheres)
    return dispatch_driver<PotentialKind::V1RigidSpheres>(cfg, s0, opt);
  return dispatch_driver<PotentialKind::V2Lorentz>(cfg, s0, opt);
}

Trajectory integrate(const SystemConfig& cfg, const State& s0, double t_end) {
  IntegrateOptions opt;
  opt.t_end = t_end;
  opt.sample_stride = 1;
  return integrate(cfg, s0, opt);
}

}  // namespace dscat

#include "dscat/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "dscat/parallel.hpp"

namespace dscat {

const char* to_string(OrbitClass c) {
  switch (c) {
    case OrbitClass::Hyperbolic: return "hyperbolic";
    case OrbitClass::Parabolic: return "parabolic";
    case OrbitClass::TrappedAtCutoff: return "trapped_at_cutoff";
  }
  return "?";
}

namespace {

void fill_crossings(ScatterRecord& r, const EventLog& ev) {
  r.n_c = static_cast<int>(ev.zero_crossings.size());
  if (r.n_c > 0) {
    r.t_first = ev.zero_crossings.front().t;
    r.t_last = ev.zero_crossings.back().t;
    r.delay_time = r.t_last - r.t_first;
  }
}

OrbitClass classify(const SystemConfig& cfg, double energy) {
  const double d = energy - cfg.escape_energy();
  if (d > cfg.parabolic_tol) return OrbitClass::Hyperbolic;
  if (d >= -cfg.parabolic_tol) return OrbitClass::Parabolic;
  return OrbitClass::TrappedAtCutoff;
}

}  // namespace

ScatterRecord scatter_s1(const SystemConfig& cfg, double x0, double v0) {
  ScatterRecord r;
  const double t_star = cfg.switch_off_time() + cfg.step();
  IntegrateOptions pulse;
  pulse.t_end = t_star;
  pulse.detect_escape = false;
  const Trajectory a = integrate(cfg, {x0, v0, 0.0}, pulse);
  r.t_launch = 0.0;
  EventLog ev = a.events;
  const double h0 = free_energy(cfg, a.final_state);
  r.h0_out = {h0};
  r.h0_out_final = h0;
  r.h0_comoving = h0;
  r.classification = classify(cfg, h0);
  if (h0 >= cfg.escape_energy() - cfg.parabolic_tol) {
    // conserved energy above (or at) the barrier: follow the orbit out
    IntegrateOptions tail;
    tail.t_end = t_star + cfg.noreturn_time() + cfg.period();
    const Trajectory b = integrate(cfg, a.final_state, tail);
    auto zc = b.events.zero_crossings;
    if (a.final_state.x == 0.0 && !zc.empty()) zc.erase(zc.begin());
    ev.zero_crossings.insert(ev.zero_crossings.end(), zc.begin(), zc.end());
    ev.turning_points.insert(ev.turning_points.end(), b.events.turning_points.begin(),
                             b.events.turning_points.end());
    ev.escaped = b.events.escaped;
    ev.escape_time = b.events.escape_time;
    if (!ev.escaped && r.classification == OrbitClass::Hyperbolic)
      r.classification = OrbitClass::TrappedAtCutoff;
  }
  fill_crossings(r, ev);
  return r;
}

ScatterRecord scatter_s2(const SystemConfig& cfg, double x0, double v0, const ScatterOptions& opt) {
  ScatterRecord r;
  const double period = cfg.period();
  const double t0 = cfg.launch_time();
  IntegrateOptions o;
  o.t_end = t0 + opt.k_max * period;
  o.strobe_period = period;
  o.strobe_origin = opt.sample_phase / cfg.nu;
  o.run_after_escape = opt.post_escape_periods * period;
  const Trajectory tr = integrate(cfg, {x0, v0, t0}, o);
  r.t_launch = t0;
  r.h0_out.reserve(tr.strobe.size());
  for (const State& s : tr.strobe) r.h0_out.push_back(free_energy(cfg, s));
  fill_crossings(r, tr.events);

  const State& fin = tr.final_state;
  r.h0_comoving = comoving_energy(cfg, fin);
  if (tr.events.escaped) {
    r.classification = classify(cfg, r.h0_comoving);
    const double u = fin.p - quiver_velocity(cfg, fin.t);
    const double u_inf = std::copysign(std::sqrt(std::max(0.0, 2.0 * (r.h0_comoving - cfg.escape_energy()))), u);
    const double p_inf = u_inf + quiver_velocity(cfg, opt.sample_phase / cfg.nu);
    r.h0_out_final = cfg.escape_energy() + 0.5 * p_inf * p_inf;
  } else {
    r.classification = OrbitClass::TrappedAtCutoff;
    r.h0_out_final = r.h0_out.empty() ? free_energy(cfg, fin) : r.h0_out.back();
  }
  return r;
}

ScatterRecord scatter_s2(const SystemConfig& cfg, double x0, double v0, int k_max) {
  ScatterOptions opt;
  opt.k_max = k_max;
  return scatter_s2(cfg, x0, v0, opt);
}

ScatterRecord scatter(const SystemConfig& cfg, double x0, double v0, const ScatterOptions& opt) {
  if (cfg.driver == DriverKind::F1Finite) return scatter_s1(cfg, x0, v0);
  return scatter_s2(cfg, x0, v0, opt);
}

double default_sample_phase(ScanAxis axis) {
  return axis == ScanAxis::E0 ? std::numbers::pi / 2.0 : 0.0;
}

std::vector<ScatterRecord> sweep(const SystemConfig& cfg, const SweepSpec& spec) {
  if (spec.samples < 2) throw ValidationError("sweep needs samples >= 2");
  if (!(spec.hi > spec.lo)) throw ValidationError("sweep needs max > min");
  cfg.validate();
  std::vector<ScatterRecord> out(spec.samples);
  const double step = (spec.hi - spec.lo) / static_cast<double>(spec.samples - 1);
  parallel_for(
      spec.samples,
      [&](std::size_t i) {
        const double v = i + 1 == spec.samples ? spec.hi : spec.lo + step * static_cast<double>(i);
        SystemConfig c = cfg;
        double x0 = spec.x0, v0 = spec.v0;
        switch (spec.axis) {
          case ScanAxis::V0: v0 = v; break;
          case ScanAxis::X0: x0 = v; break;
          case ScanAxis::E0: c.e0 = v; break;
        }
        ScatterRecord rec;
        try {
          rec = scatter(c, x0, v0, spec.scatter);
        } catch (const std::exception& e) {
          rec = ScatterRecord{};
          rec.error = e.what();
          rec.n_c = -1;
        }
        rec.input = v;
        out[i] = std::move(rec);
      },
      spec.workers);
  return out;
}

IntervalSegmentation segment_intervals(const std::vector<ScatterRecord>& records) {
  if (records.size() < 3) throw DegenerateScan("segmentation needs at least 3 samples");
  IntervalSegmentation seg;
  const std::size_t n = records.size();
  seg.resolution = (records.back().input - records.front().input) / static_cast<double>(n - 1);
  seg.inputs.resize(n);
  seg.sample_nc.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    seg.inputs[i] = records[i].input;
    if (records[i].ok() && !records[i].trapped()) seg.sample_nc[i] = records[i].n_c;
  }
  std::size_t i = 0;
  while (i < n) {
    if (seg.sample_nc[i] < 0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && seg.sample_nc[j + 1] == seg.sample_nc[i]) ++j;
    seg.regular_intervals.push_back({seg.inputs[i], seg.inputs[j], seg.sample_nc[i], i, j});
    i = j + 1;
  }
  const auto& iv = seg.regular_intervals;
  if (iv.empty()) {
    seg.singular_gaps.push_back({seg.inputs.front(), seg.inputs.back()});
    return seg;
  }
  if (iv.front().first > 0) seg.singular_gaps.push_back({seg.inputs.front(), iv.front().lo});
  for (std::size_t k = 0; k + 1 < iv.size(); ++k) seg.singular_gaps.push_back({iv[k].hi, iv[k + 1].lo});
  if (iv.back().last + 1 < n) seg.singular_gaps.push_back({iv.back().hi, seg.inputs.back()});
  return seg;
}

namespace {

void witness(RuleResult& r, const HierarchyOptions& opt, const std::string& s) {
  r.pass = false;
  ++r.violations;
  if (r.witnesses.size() < opt.max_witnesses) r.witnesses.push_back(s);
}

std::string describe(const RegularInterval& a) {
  std::ostringstream os;
  os.precision(10);
  os << "[" << a.lo << ", " << a.hi << "] N_c=" << a.n_c;
  return os.str();
}

}  // namespace

HierarchyReport validate_hierarchy(const IntervalSegmentation& seg, const HierarchyOptions& opt) {
  HierarchyReport rep;
  const auto& iv = seg.regular_intervals;

  for (const auto& a : iv) {
    ++rep.constant_nc.checked;
    for (std::size_t s = a.first; s <= a.last && s < seg.sample_nc.size(); ++s) {
      if (seg.sample_nc[s] != a.n_c) {
        witness(rep.constant_nc, opt, describe(a) + " contains N_c=" + std::to_string(seg.sample_nc[s]));
        break;
      }
    }
  }

  // (ii): consecutive intervals sharing N_c enclose only larger N_c
  std::map<int, std::size_t> last_seen;
  for (std::size_t j = 0; j < iv.size(); ++j) {
    auto it = last_seen.find(iv[j].n_c);
    if (it != last_seen.end()) {
      ++rep.higher_between.checked;
      for (std::size_t m = it->second + 1; m < j; ++m) {
        if (iv[m].n_c <= iv[j].n_c) {
          witness(rep.higher_between, opt,
                  describe(iv[m]) + " between " + describe(iv[it->second]) + " and " + describe(iv[j]));
          break;
        }
      }
    }
    last_seen[iv[j].n_c] = j;
  }

  // (iii): N_c+1 intervals shrink toward each boundary of an N_c interval
  for (std::size_t j = 0; j < iv.size(); ++j) {
    const int k = iv[j].n_c;
    for (int dir : {-1, +1}) {
      std::vector<std::size_t> members;  // nearest first
      bool bounded = false;
      for (long m = static_cast<long>(j) + dir; m >= 0 && m < static_cast<long>(iv.size()); m += dir) {
        const auto& b = iv[static_cast<std::size_t>(m)];
        if (b.n_c <= k) {
          bounded = true;
          break;
        }
        if (b.n_c == k + 1) members.push_back(static_cast<std::size_t>(m));
      }
      (void)bounded;
      if (members.size() < opt.family_members) continue;
      std::size_t top = 0;
      for (std::size_t q = 0; q < members.size(); ++q)
        if (iv[members[q]].count() >= iv[members[top]].count()) top = q;
      if (top + 1 < opt.family_members) continue;
      ++rep.families_tested;
      ++rep.accumulation.checked;
      bool ok = true;
      for (std::size_t q = 0; q + 1 < opt.family_members; ++q) {
        const auto& outer = iv[members[top - q]];
        const auto& inner = iv[members[top - q - 1]];
        if (inner.count() > outer.count()) ok = false;
      }
      if (iv[members[top]].count() <= iv[members[top + 1 - opt.family_members]].count()) ok = false;
      if (ok) {
        ++rep.families_passed;
      } else {
        std::ostringstream os;
        os << "family N_c=" << k + 1 << (dir < 0 ? " left of " : " right of ") << describe(iv[j])
           << " sizes";
        for (std::size_t q = 0; q < opt.family_members; ++q) os << " " << iv[members[top - q]].count();
        witness(rep.accumulation, opt, os.str());
      }
    }
  }
  return rep;
}

GridField grid_nc(const SystemConfig& cfg, double x0_lo, double x0_hi, double v0_lo, double v0_hi,
                  std::size_t nx, std::size_t nv, const ScatterOptions& opt, std::size_t workers) {
  if (nx < 2 || nv < 2) throw ValidationError("grid needs nx, nv >= 2");
  cfg.validate();
  GridField g;
  g.x0_axis.resize(nx);
  g.v0_axis.resize(nv);
  for (std::size_t i = 0; i < nx; ++i) g.x0_axis[i] = x0_lo + (x0_hi - x0_lo) * i / double(nx - 1);
  for (std::size_t i = 0; i < nv; ++i) g.v0_axis[i] = v0_lo + (v0_hi - v0_lo) * i / double(nv - 1);
  g.n_c.assign(nx * nv, -1);
  parallel_for(
      nx * nv,
      [&](std::size_t c) {
        const std::size_t ix = c % nx, iv = c / nx;
        try {
          g.n_c[c] = scatter(cfg, g.x0_axis[ix], g.v0_axis[iv], opt).n_c;
        } catch (const std::exception&) {
          g.n_c[c] = -1;
        }
      },
      workers);
  g.same_as_neighbors.assign(nx * nv, 0);
  for (std::size_t iv = 0; iv < nv; ++iv) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const int v = g.at(ix, iv);
      bool same = v >= 0;
      if (ix > 0) same = same && g.at(ix - 1, iv) == v;
      if (ix + 1 < nx) same = same && g.at(ix + 1, iv) == v;
      if (iv > 0) same = same && g.at(ix, iv - 1) == v;
      if (iv + 1 < nv) same = same && g.at(ix, iv + 1) == v;
      g.same_as_neighbors[iv * nx + ix] = same;
    }
  }
  return g;
}

std::vector<NcJump> find_nc_jumps(const SystemConfig& cfg, const SweepSpec& spec,
                                  const std::vector<ScatterRecord>& records, const JumpOptions& opt) {
  if (opt.refine_samples < 3 || opt.levels < 1) throw ValidationError("jump refinement needs >= 3 samples and >= 1 level");
  const IntervalSegmentation seg = segment_intervals(records);
  std::vector<NcJump> out;
  const auto& iv = seg.regular_intervals;
  for (std::size_t k = 0; k + 1 < iv.size(); ++k) {
    if (iv[k].last + 1 != iv[k + 1].first) continue;
    if (iv[k].count() < opt.min_run || iv[k + 1].count() < opt.min_run) continue;
    NcJump jump;
    jump.nc_left = iv[k].n_c;
    jump.nc_right = iv[k + 1].n_c;
    jump.lo = iv[k].hi;
    jump.hi = iv[k + 1].lo;
    jump.initial_jump = std::abs(records[iv[k + 1].first].h0_out_final - records[iv[k].last].h0_out_final);
    jump.final_jump = jump.initial_jump;
    bool single_switch = true;
    for (int level = 0; level < opt.levels && single_switch; ++level) {
      SweepSpec fine = spec;
      fine.lo = jump.lo;
      fine.hi = jump.hi;
      fine.samples = opt.refine_samples;
      const auto rec = sweep(cfg, fine);
      std::size_t switch_at = rec.size();
      for (std::size_t i = 0; i < rec.size() && single_switch; ++i) {
        const auto& r = rec[i];
        const bool left = r.n_c == jump.nc_left, right = r.n_c == jump.nc_right;
        if (!r.ok() || r.trapped() || !(left || right)) single_switch = false;
        else if (right && switch_at == rec.size()) switch_at = i;
        else if (left && switch_at != rec.size()) single_switch = false;
      }
      if (!single_switch || switch_at == 0 || switch_at == rec.size()) {
        single_switch = false;
        break;
      }
      jump.lo = rec[switch_at - 1].input;
      jump.hi = rec[switch_at].input;
      jump.final_jump = std::abs(rec[switch_at].h0_out_final - rec[switch_at - 1].h0_out_final);
      jump.levels_done = level + 1;
    }
    jump.continuous =
        single_switch && jump.final_jump <= jump.initial_jump * std::pow(opt.shrink, static_cast<double>(opt.levels));
    out.push_back(jump);
  }
  return out;
}

}  // namespace dscat

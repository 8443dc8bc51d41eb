#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "dscat/dynamics.hpp"
#include "dscat/escape_stats.hpp"
#include "dscat/io.hpp"
#include "dscat/parallel.hpp"
#include "dscat/return_map.hpp"
#include "dscat/saddle.hpp"
#include "dscat/scattering.hpp"
#include "reference.hpp"

using namespace dscat;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;
  std::vector<std::pair<std::string, std::string>> tables;

  void check(bool ok, const std::string& note) {
    pass = pass && ok;
    notes.push_back(ok ? note : note + " [violated]");
  }
  void note(const std::string& s) { notes.push_back(s); }
  void table(const std::string& name, const CsvTable& t) { tables.emplace_back(name, t.str()); }
};

std::string num(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

// Branch formulas of the rigid-spheres potential written out independently.
long double inner_v(long double a) { return a * a / 2 - 3.0L / 16 * a * a * a + a * a * a * a * a / 160; }
long double inner_dv(long double a) { return a - 9.0L / 16 * a * a + a * a * a * a / 32; }
long double inner_ddv(long double a) { return 1 - 9.0L / 8 * a + a * a * a / 8; }
long double outer_v(long double a) { return 1.2L - 1 / a; }
long double outer_dv(long double a) { return 1 / (a * a); }
long double outer_ddv(long double a) { return -2 / (a * a * a); }

void smoothness(Outcome& o, std::size_t) {
  constexpr long double tol = 1e-12L;
  const auto v1 = PotentialKind::V1RigidSpheres;
  auto worst = [](std::initializer_list<long double> d) {
    long double w = 0;
    for (long double x : d) w = std::max(w, std::abs(x));
    return static_cast<double>(w);
  };
  const double dv = worst({inner_v(2) - 0.7L, outer_v(2) - 0.7L, potential_value(v1, 2.0) - 0.7L});
  const double ds = worst({inner_dv(2) - 0.25L, outer_dv(2) - 0.25L, -potential_force(v1, 2.0) - 0.25L});
  const double dc =
      worst({inner_ddv(2) + 0.25L, outer_ddv(2) + 0.25L, potential_curvature(v1, 2.0) + 0.25L});
  o.check(dv < tol, "value at 2 off by " + num(dv, 3));
  o.check(ds < tol, "slope off by " + num(ds, 3));
  o.check(dc < tol, "curvature off by " + num(dc, 3));

  CsvTable t({"x", "value", "force", "curvature", "oracle_value", "oracle_force", "oracle_curvature"});
  double branch = 0.0;
  for (double x : {1.5, 1.9, 1.99, 1.999999, 2.0, 2.000001, 2.01, 2.1, 2.5}) {
    const long double a = x;
    const bool in = x < 2.0;
    const long double ov = in ? inner_v(a) : outer_v(a);
    const long double of = -(in ? inner_dv(a) : outer_dv(a));
    const long double oc = in ? inner_ddv(a) : outer_ddv(a);
    const double v = potential_value(v1, x), f = potential_force(v1, x), c = potential_curvature(v1, x);
    branch = std::max(branch, worst({v - ov, f - of, c - oc}));
    t.row().add(x).add(v).add(f).add(c);
    t.add(static_cast<double>(ov)).add(static_cast<double>(of)).add(static_cast<double>(oc));
  }
  o.check(branch < tol, "branches match the oracle to " + num(branch, 3));
  o.table("c01_potential", t);

  const SystemConfig cfg;
  const double h = cfg.escape_energy();
  const double ulp = std::nextafter(0.588, 1.0) - 0.588;
  o.check(std::abs(h - 0.588) <= ulp, "escape energy " + num(h, 17));
}

void integrator(Outcome& o, std::size_t) {
  SystemConfig free;
  free.driver = DriverKind::None;
  free.e0 = 0.0;
  const State s0{0.0, 1.0, 0.0};
  IntegrateOptions io;
  io.t_end = 1000.0;
  io.sample_stride = 50;
  const Trajectory tr = integrate(free, s0, io);
  const double e_init = free_energy(free, s0);
  double worst = 0.0;
  CsvTable drift({"t", "energy"});
  for (const State& s : tr.samples) {
    const double e = free_energy(free, s);
    worst = std::max(worst, std::abs(e - e_init));
    drift.row().add(s.t).add(e);
  }
  o.check(worst / e_init < 1e-8 && !tr.events.escaped, "relative drift " + num(worst / e_init, 3));
  o.table("c02_drift", drift);

  SystemConfig g;
  g.potential = PotentialKind::V2Lorentz;
  g.e0 = 0.3;
  const State g0{0.0, 0.5, 0.0};
  auto end_state = [&](double dt) {
    SystemConfig c = g;
    c.dt = dt;
    IntegrateOptions opt;
    opt.t_end = 20.0;
    opt.detect_escape = false;
    return integrate(c, g0, opt).final_state;
  };
  const State ref = end_state(2e-4);
  CsvTable conv({"dt", "error"});
  std::vector<double> errors;
  for (double dt : {0.1, 0.05, 0.025}) {
    const State a = end_state(dt);
    errors.push_back(std::hypot(a.x - ref.x, a.p - ref.p));
    conv.row().add(dt).add(errors.back());
  }
  const double order = std::log2(errors[1] / errors[2]);
  o.check(order >= 3.8 && order <= 4.2, "convergence order " + num(order, 4));
  o.table("c02_convergence", conv);
}

struct Structure {
  std::size_t regular = 0;
  std::size_t irregular = 0;
};

// Regular intervals spanning at least three samples, and stretches of
// irregular samples between consecutive intervals.
Structure structure(const IntervalSegmentation& seg) {
  Structure s;
  const auto& iv = seg.regular_intervals;
  for (const auto& a : iv) s.regular += a.count() >= 3;
  if (iv.empty()) return s;
  s.irregular += iv.front().first > 0;
  for (std::size_t k = 0; k + 1 < iv.size(); ++k) s.irregular += iv[k].last + 1 < iv[k + 1].first;
  s.irregular += iv.back().last + 1 < seg.inputs.size();
  return s;
}

CsvTable interval_table(const IntervalSegmentation& seg) {
  CsvTable t({"lo", "hi", "n_c", "samples"});
  for (const auto& a : seg.regular_intervals) t.row().add(a.lo).add(a.hi).add(a.n_c).add(a.count());
  return t;
}

void check_alternation(Outcome& o, const std::string& label, const IntervalSegmentation& seg) {
  const Structure s = structure(seg);
  o.check(s.regular >= 10 && s.irregular >= 10, label + std::to_string(s.regular) + " regular intervals / " +
                                                    std::to_string(s.irregular) + " irregular stretches");
}

void scattering_structure(Outcome& o, std::size_t workers) {
  const SystemConfig cfg = reference_f2();
  SweepSpec spec;
  spec.axis = ScanAxis::V0;
  spec.lo = 1.46;
  spec.hi = 1.64;
  spec.samples = 20000;
  spec.workers = workers;
  spec.scatter.sample_phase = default_sample_phase(ScanAxis::V0);
  std::vector<ScatterRecord> rec = sweep(cfg, spec);
  o.table("c03_sweep", records_table(rec));
  for (auto& r : rec) r.h0_out = {};
  const IntervalSegmentation seg = segment_intervals(rec);
  o.table("c03_intervals", interval_table(seg));
  check_alternation(o, "", seg);

  const double floor = cfg.escape_energy() - 1e-3;
  std::size_t below = 0;
  double lowest = INFINITY;
  for (const auto& a : seg.regular_intervals)
    for (std::size_t i = a.first; i <= a.last; ++i) {
      lowest = std::min(lowest, rec[i].h0_out_final);
      below += rec[i].h0_out_final < floor;
    }
  o.check(below == 0, "lowest regular H0 " + num(lowest, 6) + " (" + std::to_string(below) + " below)");

  const HierarchyReport h = validate_hierarchy(seg);
  auto rule = [&](const char* name, const RuleResult& r) {
    std::string s = std::string("rule ") + name + ": " + std::to_string(r.violations) + " violations of " +
                    std::to_string(r.checked);
    if (!r.witnesses.empty()) s += " (e.g. " + r.witnesses.front() + ")";
    o.check(r.pass, s);
  };
  rule("(i)", h.constant_nc);
  rule("(ii)", h.higher_between);
  o.check(h.families_passed >= 5, "rule (iii) verified on " + std::to_string(h.families_passed) + " of " +
                                      std::to_string(h.families_tested) + " families");
}

struct EnsembleResult {
  EnsembleRun run;
  double period = 0.0;
};

const EnsembleResult& ensemble(std::size_t workers) {
  static std::map<std::size_t, EnsembleResult> cache;
  auto it = cache.find(workers);
  if (it != cache.end()) return it->second;
  const SystemConfig cfg = reference_f2();
  EnsembleSpec spec;
  EnsembleResult r;
  r.run = run_ensemble(cfg, spec, {}, workers);
  for (auto& rec : r.run.records) rec.h0_out = {};
  r.period = cfg.period();
  return cache.emplace(workers, std::move(r)).first->second;
}

CsvTable curve_table(const DecayCurve& c, const char* x) {
  CsvTable t({x, "N"});
  for (std::size_t i = 0; i < c.abscissa.size(); ++i) t.row().add(c.abscissa[i]).add(c.counts[i]);
  return t;
}

void survival(Outcome& o, std::size_t workers) {
  const EnsembleResult& e = ensemble(workers);
  o.table("c04_ensemble", records_table(e.run.records));
  const DecayCurve c = survival_from_records(e.run.records, e.run.cutoff);
  o.table("c04_survival", curve_table(c, "t"));
  const PowerLawFit f = survival_fit(c, e.period);
  o.note("fit over t in [" + num(f.range_lo, 4) + ", " + num(f.range_hi, 4) + "], " + std::to_string(f.points) +
         " points, " + std::to_string(e.run.failures) + " failed orbits");
  o.check(f.z >= 1.45 && f.z <= 1.75, "z = " + num(f.z, 4) + " +- " + num(f.stderr_z, 2));
}

void zero_counts(Outcome& o, std::size_t workers) {
  const EnsembleResult& e = ensemble(workers);
  const DecayCurve c = zeros_from_records(e.run.records);
  o.table("c05_zeros", curve_table(c, "n"));
  const PowerLawFit f = powerlaw_fit(c, 5.0, 60.0);
  o.check(f.z >= 2.1 && f.z <= 2.6, "z = " + num(f.z, 4) + " +- " + num(f.stderr_z, 2) + " over " +
                                        std::to_string(f.points) + " points");
  const auto steps = staircase_detect(c, 60.0);
  o.check(steps.size() >= 3, std::to_string(steps.size()) + " staircase jumps beyond n=60");
}

void return_map_checks(Outcome& o, std::size_t workers) {
  SystemConfig free;
  free.e0 = 0.0;
  CsvTable inv({"p", "tau", "h_plus", "h_minus", "h_plus_image", "h_minus_image", "p_image"});
  double worst = 0.0;
  bool all_return = true;
  for (double p : {0.3, 0.6, 0.9, 1.05})
    for (double tau : {0.0, 1.0, 2.0, 3.0, 4.0, 5.0}) {
      const SectionPoint pt{p, tau};
      const ReturnOutcome r = return_map(free, pt, Direction::Forward);
      if (r.kind != ReturnKind::Returns) {
        all_return = false;
        continue;
      }
      const double hp = h_plus(free, pt), hm = h_minus(free, pt);
      const double hpi = h_plus(free, r.next), hmi = h_minus(free, r.next);
      const double e = p * p / 2;
      worst = std::max({worst, std::abs(hp - e), std::abs(hm - e), std::abs(hpi - hp), std::abs(hmi - hm),
                        std::abs(r.next.p * r.next.p / 2 - e)});
      inv.row().add(p).add(tau).add(hp).add(hm).add(hpi).add(hmi).add(r.next.p);
    }
  o.check(all_return && worst < 1e-8, "e0=0 h+- deviation " + num(worst, 3));
  o.table("c06_invariance", inv);

  const BoundaryEstimate b0 = boundary_bisect(free, 0.0, 0.5, 2.0, Direction::Forward, 1e-7);
  o.check(std::abs(b0.p_boundary - 1.0844) <= 1e-4, "e0=0 boundary p = " + num(b0.p_boundary, 8));

  const SystemConfig cfg;
  const AreaReport a = area_check(cfg, {1.0, 3.5, 0.05}, 100000, 1, workers);
  o.check(std::abs(a.ratio - 1.0) <= 0.01, "area ratio " + num(a.ratio, 6));
  CsvTable area({"p_center", "tau_center", "radius", "samples", "source_area", "image_area", "ratio"});
  area.row().add(1.0).add(3.5).add(0.05).add(a.samples).add(a.source_area).add(a.image_area).add(a.ratio);
  o.table("c06_area", area);

  const BoundaryEstimate b = boundary_bisect(cfg, kPi, 1.0, 3.0, Direction::Forward, 1e-8);
  CsvTable seq({"step", "p", "kind", "return_time"});
  bool monotone = true;
  double prev = 0.0, deepest = 0.0;
  for (std::size_t i = 0; i < b.inside_sequence.size(); ++i) {
    const auto& s = b.inside_sequence[i];
    monotone = monotone && s.return_time >= prev;
    prev = s.return_time;
    if (s.kind == ReturnKind::Returns) deepest = std::max(deepest, s.return_time);
    seq.row().add(i).add(s.p).add(static_cast<int>(s.kind)).add(s.return_time);
  }
  o.table("c06_bisection", seq);

  constexpr std::size_t interior = 100;
  std::vector<double> times(interior, NAN);
  parallel_for(
      interior,
      [&](std::size_t k) {
        const double p = b.p_inside * static_cast<double>(k + 1) / static_cast<double>(interior + 1);
        const ReturnOutcome r = return_map(cfg, {p, kPi}, Direction::Forward);
        if (r.kind == ReturnKind::Returns) times[k] = r.return_time;
      },
      workers);
  std::vector<double> decided;
  for (double t : times)
    if (std::isfinite(t)) decided.push_back(t);
  std::sort(decided.begin(), decided.end());
  const double median = decided.empty() ? NAN : decided[decided.size() / 2];
  o.check(monotone && deepest > 10.0 * median, "return times monotone up to " + num(deepest, 5) +
                                                   " against interior median " + num(median, 4));
}

void qn_disjoint(Outcome& o, std::size_t workers) {
  const SystemConfig cfg;
  constexpr std::size_t np = 100, ntau = 100;
  constexpr int n_max = 6;
  std::vector<std::array<Membership, n_max>> m(np * ntau);
  parallel_for(
      m.size(),
      [&](std::size_t i) {
        const SectionPoint pt{2.5 * (static_cast<double>(i % np) + 0.5) / np,
                              2.0 * kPi * (static_cast<double>(i / np) + 0.5) / ntau};
        for (int n = 1; n <= n_max; ++n) m[i][n - 1] = qn_membership(cfg, pt, n);
      },
      workers);
  CsvTable t({"p", "tau", "q1", "q2", "q3", "q4", "q5", "q6"});
  std::size_t violations = 0, undecided = 0;
  std::array<std::size_t, n_max> sizes{};
  for (std::size_t i = 0; i < m.size(); ++i) {
    t.row().add(2.5 * (static_cast<double>(i % np) + 0.5) / np).add(2.0 * kPi * (static_cast<double>(i / np) + 0.5) / ntau);
    int hits = 0;
    for (int n = 0; n < n_max; ++n) {
      const Membership v = m[i][n];
      t.add(v == Membership::True ? 1 : v == Membership::False ? 0 : -1);
      hits += v == Membership::True;
      sizes[n] += v == Membership::True;
      undecided += v == Membership::Undecided;
    }
    violations += hits > 1;
  }
  o.table("c07_qn", t);
  std::string counts;
  for (int n = 0; n < n_max; ++n) counts += (n ? "/" : "") + std::to_string(sizes[n]);
  o.note("|Q_1..Q_6| = " + counts + ", " + std::to_string(undecided) + " undecided memberships");
  o.check(violations == 0, std::to_string(violations) + " points in more than one Q_n");
}

void gap_combinatorics(Outcome& o, std::size_t) {
  const GapTree tree = gap_tree(1, 8);
  CsvTable t({"depth", "gaps", "cumulative"});
  bool exact = true;
  for (int n1 = 1; n1 <= 8; ++n1) {
    exact = exact && tree.gaps_at(n1) == static_cast<std::size_t>(2 * pow3(n1 - 1)) &&
            tree.cumulative(n1) == static_cast<std::size_t>(pow3(n1) - 1);
    t.row().add(n1).add(tree.gaps_at(n1)).add(tree.cumulative(n1));
  }
  o.table("c08_gaps", t);
  o.check(exact, "gap counts 2*3^(n1-1) and 3^n1 - 1 for n1 <= 8");
  const Rational full = development_gamma(9, 2), third = development_gamma(3, 2);
  o.check(full == Rational{1, 1}, "gamma(r=9, n=2) = " + to_string(full));
  o.check(third == Rational{1, 3}, "gamma(r=3, n=2) = " + to_string(third));
}

void horseshoe(Outcome& o, std::size_t workers) {
  const SystemConfig cfg;
  const PlanarMap map = stroboscopic_map(cfg);
  const FixedPointSearch fps = find_fixed_points(map, {}, {}, workers);
  CsvTable t({"x", "p", "stability", "label", "eigenvalue_1", "eigenvalue_2", "trace", "determinant", "residual"});
  for (const auto& f : fps.points) {
    t.row().add(f.location.x()).add(f.location.y()).add(to_string(f.stability)).add(to_string(f.label));
    t.add(f.eigenvalues(0)).add(f.eigenvalues(1)).add(f.trace).add(f.determinant).add(f.residual);
  }
  o.table("c09_fixed_points", t);
  o.note(std::to_string(fps.points.size()) + " fixed points");
  const SaddlePair pair = outermost_saddles(fps);
  for (const auto* s : {&pair.a, &pair.b}) {
    const double product = s->eigenvalues(0) * s->eigenvalues(1);
    o.check(s->residual < 1e-10 && std::abs(product - 1.0) <= 1e-6,
            std::string(to_string(s->label)) + " residual " + num(s->residual, 3) + ", eigenvalue product " +
                num(product, 10));
  }
  ContinuationOptions opt;
  opt.truncate_on_blowup = true;
  const RegionCurves rc = region_curves(map, pair, 8.0, opt, workers);
  const FundamentalRegion region = fundamental_region(pair.a, pair.b, rc);
  const HorseshoeReport rep = development_parameter(map, region, gap_tree(2, 2), 2, {}, workers);
  o.check(rep.gamma_b == Rational{1, 1}, "gamma_B = " + to_string(rep.gamma_b));
  o.check(rep.gamma_a == Rational{1, 3}, "gamma_A = " + to_string(rep.gamma_a));
}

void amplitude_sweep(Outcome& o, std::size_t workers) {
  SystemConfig cfg;
  cfg.driver = DriverKind::F1Finite;
  SweepSpec spec;
  spec.axis = ScanAxis::E0;
  spec.x0 = 0.0;
  spec.v0 = 1.049;
  spec.workers = workers;
  spec.scatter.sample_phase = default_sample_phase(ScanAxis::E0);

  SweepSpec coarse = spec;
  coarse.lo = 0.0;
  coarse.hi = 4.0;
  coarse.samples = 2000;
  const auto rc = sweep(cfg, coarse);
  o.table("c10_coarse", records_table(rc));
  const IntervalSegmentation sc = segment_intervals(rc);
  check_alternation(o, "e0 in [0, 4]: ", sc);

  SweepSpec fine = spec;
  fine.lo = 1.4;
  fine.hi = 2.4;
  fine.samples = 1000;
  const auto rf = sweep(cfg, fine);
  o.table("c10_window", records_table(rf));
  const IntervalSegmentation sf = segment_intervals(rf);
  check_alternation(o, "e0 in [1.4, 2.4]: ", sf);

  std::size_t coarse_in_window = 0;
  for (const auto& a : sc.regular_intervals) coarse_in_window += a.count() >= 3 && a.lo >= fine.lo && a.hi <= fine.hi;
  const std::size_t fine_in_window = structure(sf).regular;
  o.check(fine_in_window > coarse_in_window, "magnification resolves " + std::to_string(fine_in_window) +
                                                 " regular intervals where the full scan shows " +
                                                 std::to_string(coarse_in_window));

  JumpOptions jo;
  jo.min_run = 2;
  const auto jumps = find_nc_jumps(cfg, fine, rf, jo);
  CsvTable jt({"lo", "hi", "nc_left", "nc_right", "initial_jump", "final_jump", "levels", "continuous"});
  std::size_t continuous = 0;
  std::string first;
  for (const auto& j : jumps) {
    jt.row().add(j.lo).add(j.hi).add(j.nc_left).add(j.nc_right).add(j.initial_jump).add(j.final_jump);
    jt.add(j.levels_done).add(j.continuous ? 1 : 0);
    if (j.continuous && continuous++ == 0)
      first = std::to_string(j.nc_left) + "->" + std::to_string(j.nc_right) + " at e0 = " + num(j.lo, 8);
  }
  o.table("c10_jumps", jt);
  o.check(continuous >= 1, std::to_string(continuous) + " N_c jumps inside a regular interval" +
                               (first.empty() ? "" : " (" + first + ")"));
}

struct Criterion {
  int id;
  const char* name;
  void (*run)(Outcome&, std::size_t);
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {1, "potential smoothness", smoothness},
      {2, "integrator", integrator},
      {3, "scattering structure", scattering_structure},
      {4, "survival exponent", survival},
      {5, "zero-count exponent", zero_counts},
      {6, "return map", return_map_checks},
      {7, "Q_n disjointness", qn_disjoint},
      {8, "gap-tree combinatorics", gap_combinatorics},
      {9, "horseshoe extraction", horseshoe},
      {10, "amplitude sweep", amplitude_sweep},
  };
  return list;
}

Outcome evaluate(const Criterion& c, std::size_t workers) {
  Outcome o;
  try {
    c.run(o, workers);
  } catch (const std::exception& e) {
    o.pass = false;
    o.notes.push_back(std::string("error: ") + e.what());
  }
  return o;
}

std::string join(const std::vector<std::string>& notes) {
  std::string s;
  for (const auto& n : notes) s += (s.empty() ? "" : "; ") + n;
  return s;
}

void report(int id, const char* name, bool pass, const std::string& detail, double seconds) {
  std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << " (" << name << "): " << detail << " ["
            << num(seconds, 4) << " s]" << std::endl;
}

void save(const fs::path& dir, const std::vector<std::pair<std::string, std::string>>& tables) {
  fs::create_directories(dir);
  for (const auto& [name, text] : tables) std::ofstream(dir / (name + ".csv"), std::ios::binary) << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria 1-11"};
  std::size_t workers = std::max<std::size_t>(4, default_workers());
  std::string out_dir = "acceptance_out";
  std::vector<int> only;
  app.add_option("--workers", workers, "parallel workers for the main pass")->check(CLI::Range(2, 1024))->capture_default_str();
  app.add_option("--out-dir", out_dir, "directory for the CSV outputs")->capture_default_str();
  app.add_option("--only", only, "criteria to run (default all)")->check(CLI::Range(1, 11))->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::set<int> selected(only.begin(), only.end());
  auto wanted = [&](int id) { return selected.empty() || selected.count(id) > 0; };

  using Clock = std::chrono::steady_clock;
  std::map<int, std::vector<std::pair<std::string, std::string>>> parallel_tables;
  bool all = true;
  for (const auto& c : criteria()) {
    if (!wanted(c.id)) continue;
    const auto t0 = Clock::now();
    const Outcome o = evaluate(c, workers);
    const double s = std::chrono::duration<double>(Clock::now() - t0).count();
    report(c.id, c.name, o.pass, join(o.notes), s);
    save(fs::path(out_dir) / ("workers_" + std::to_string(workers)), o.tables);
    parallel_tables[c.id] = o.tables;
    all = all && o.pass;
  }

  if (wanted(11)) {
    const auto t0 = Clock::now();
    std::size_t compared = 0;
    std::vector<std::string> mismatches;
    for (const auto& c : criteria()) {
      if (!wanted(c.id)) continue;
      if (!parallel_tables.count(c.id)) parallel_tables[c.id] = evaluate(c, workers).tables;
      const Outcome serial = evaluate(c, 1);
      save(fs::path(out_dir) / "workers_1", serial.tables);
      std::map<std::string, std::string> by_name(serial.tables.begin(), serial.tables.end());
      for (const auto& [name, text] : parallel_tables[c.id]) {
        ++compared;
        const auto it = by_name.find(name);
        if (it == by_name.end() || it->second != text) mismatches.push_back(name);
        if (it != by_name.end()) by_name.erase(it);
      }
      for (const auto& [name, text] : by_name) mismatches.push_back(name + " (serial only)");
    }
    const bool pass = compared > 0 && mismatches.empty();
    std::string detail = std::to_string(compared) + " CSV outputs compared between 1 and " + std::to_string(workers) +
                         " workers";
    if (!mismatches.empty()) {
      detail += "; differing: ";
      for (std::size_t i = 0; i < mismatches.size(); ++i) detail += (i ? ", " : "") + mismatches[i];
    }
    report(11, "determinism", pass, detail, std::chrono::duration<double>(Clock::now() - t0).count());
    all = all && pass;
  }
  return all ? 0 : 1;
}

#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "dscat/escape_stats.hpp"
#include "dscat/io.hpp"
#include "dscat/parallel.hpp"
#include "dscat/return_map.hpp"
#include "dscat/saddle.hpp"
#include "dscat/scattering.hpp"
#include "json.hpp"

namespace dscat::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> settings;
  std::optional<std::size_t> workers;
  std::string out;
};

/// Outputs of one invocation plus its manifest.
class Run {
 public:
  Run(std::string command, const std::vector<std::string>& args, RunConfig cfg, const fs::path& out)
      : out_(out), start_(std::chrono::steady_clock::now()) {
    manifest_.command = std::move(command);
    manifest_.arguments = args;
    manifest_.config = std::move(cfg);
    manifest_.code_version = code_version();
    manifest_.workers = workers();
  }

  const RunConfig& config() const { return manifest_.config; }
  const SystemConfig& system() const { return manifest_.config.system; }
  std::size_t workers() const {
    return manifest_.config.run.workers ? manifest_.config.run.workers : default_workers();
  }

  /// Sibling of the main output: sweep.csv -> sweep.<suffix>.
  fs::path sibling(const std::string& suffix) const {
    fs::path p = out_;
    p.replace_extension(suffix);
    return p;
  }
  const fs::path& out() const { return out_; }

  void csv(const CsvTable& table, const fs::path& path) {
    table.write(path);
    manifest_.add_output(path);
  }

  void json(const Json& j, const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << j.dump(2) << '\n';
    f.close();
    manifest_.add_output(path);
  }

  void text(const std::string& body, const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << body;
    f.close();
    manifest_.add_output(path);
  }

  void finish(bool complete, const std::string& error = {}) {
    manifest_.complete = complete;
    manifest_.error = error;
    manifest_.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    manifest_.write(sibling("manifest.json"));
  }

 private:
  RunManifest manifest_;
  fs::path out_;
  std::chrono::steady_clock::time_point start_;
};

void add_common(CLI::App* app, CommonOptions& c, bool out_required = true) {
  app->add_option("--config", c.config_path, "key=value configuration file")->check(CLI::ExistingFile);
  app->add_option("--set", c.settings, "extra key=value setting applied after the file (repeatable)");
  app->add_option("--workers", c.workers, "worker threads (overrides the config; 0 = automatic)");
  auto* o = app->add_option("--out", c.out, "main output file; siblings and the manifest share its stem");
  if (out_required) o->required();
}

RunConfig build_config(const CommonOptions& c, RunConfig base) {
  RunConfig cfg = c.config_path.empty() ? base : parse_config_file(c.config_path, base);
  int line = 0;
  for (const auto& s : c.settings) apply_setting(cfg, s, --line);
  if (c.workers) cfg.run.workers = *c.workers;
  cfg.system.validate();
  if (cfg.run.k_max < 1) throw ValidationError("k_max must be >= 1");
  return cfg;
}

Json rule_json(const RuleResult& r) {
  return Json{{"pass", r.pass}, {"checked", r.checked}, {"violations", r.violations}, {"witnesses", r.witnesses}};
}

Json segmentation_json(const IntervalSegmentation& seg) {
  Json j;
  j["resolution"] = seg.resolution;
  j["regular_intervals"] = Json::array();
  for (const auto& iv : seg.regular_intervals)
    j["regular_intervals"].push_back({{"lo", iv.lo}, {"hi", iv.hi}, {"n_c", iv.n_c}, {"samples", iv.count()}});
  j["singular_gaps"] = Json::array();
  for (const auto& g : seg.singular_gaps) j["singular_gaps"].push_back({{"lo", g.lo}, {"hi", g.hi}});
  const HierarchyReport h = validate_hierarchy(seg);
  j["hierarchy"] = {{"constant_nc", rule_json(h.constant_nc)},
                    {"higher_between", rule_json(h.higher_between)},
                    {"accumulation", rule_json(h.accumulation)},
                    {"families_tested", h.families_tested},
                    {"families_passed", h.families_passed}};
  return j;
}

ScanAxis parse_axis(const std::string& s) {
  if (s == "v0") return ScanAxis::V0;
  if (s == "x0") return ScanAxis::X0;
  return ScanAxis::E0;
}

ScatterOptions scatter_options(const RunConfig& cfg, ScanAxis axis) {
  ScatterOptions o;
  o.k_max = cfg.run.k_max;
  o.sample_phase = cfg.run.sample_phase.value_or(default_sample_phase(axis));
  return o;
}

struct SweepArgs {
  std::string axis = "v0";
  double lo = 1.46;
  double hi = 1.64;
  std::size_t samples = 2000;
  double x0 = 0.0;
  double v0 = 1.5;
  bool strobe = false;
  bool jumps = true;
};

void add_sweep_options(CLI::App* app, SweepArgs& a, bool with_axis) {
  if (with_axis)
    app->add_option("--axis", a.axis, "scan axis")->check(CLI::IsMember({"v0", "x0", "e0"}))->capture_default_str();
  app->add_option("--min", a.lo, "scan start")->capture_default_str();
  app->add_option("--max", a.hi, "scan end")->capture_default_str();
  app->add_option("--samples", a.samples, "uniform samples (>= 2)")
      ->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()))
      ->capture_default_str();
  app->add_option("--x0", a.x0, "initial position (fixed unless scanned)")->capture_default_str();
  app->add_option("--v0", a.v0, "initial velocity (fixed unless scanned)")->capture_default_str();
  app->add_flag("--strobe", a.strobe, "also write every stroboscopic sample");
}

Json jumps_json(const std::vector<NcJump>& jumps) {
  Json j = Json::array();
  for (const auto& x : jumps)
    j.push_back({{"lo", x.lo},
                 {"hi", x.hi},
                 {"nc_left", x.nc_left},
                 {"nc_right", x.nc_right},
                 {"initial_jump", x.initial_jump},
                 {"final_jump", x.final_jump},
                 {"levels_done", x.levels_done},
                 {"continuous", x.continuous}});
  return j;
}

void run_sweep(Run& run, const SweepArgs& a, ScanAxis axis, bool jumps) {
  SweepSpec s;
  s.axis = axis;
  s.lo = a.lo;
  s.hi = a.hi;
  s.samples = a.samples;
  s.x0 = a.x0;
  s.v0 = a.v0;
  s.scatter = scatter_options(run.config(), axis);
  s.workers = run.workers();
  const auto records = sweep(run.system(), s);
  run.csv(records_table(records), run.out());
  if (a.strobe) run.csv(strobe_table(records), run.sibling("strobe.csv"));
  Json seg = segmentation_json(segment_intervals(records));
  if (jumps) seg["nc_jumps"] = jumps_json(find_nc_jumps(run.system(), s, records));
  run.json(seg, run.sibling("segments.json"));
}

struct EnsembleArgs {
  double x0 = 0.0;
  double v0_lo = 1.55;
  double v0_hi = 1.57;
  std::size_t count = 20000;
  std::string sampling = "grid";
};

void add_ensemble_options(CLI::App* app, EnsembleArgs& a) {
  app->add_option("--x0", a.x0, "initial position")->capture_default_str();
  app->add_option("--v0-min", a.v0_lo, "lower velocity bound")->capture_default_str();
  app->add_option("--v0-max", a.v0_hi, "upper velocity bound")->capture_default_str();
  app->add_option("--count", a.count, "orbits")->check(CLI::PositiveNumber)->capture_default_str();
  app->add_option("--sampling", a.sampling, "velocity sampling")
      ->check(CLI::IsMember({"grid", "random"}))
      ->capture_default_str();
}

EnsembleRun ensemble(const Run& run, const EnsembleArgs& a) {
  EnsembleSpec e;
  e.x0 = a.x0;
  e.v0_lo = a.v0_lo;
  e.v0_hi = a.v0_hi;
  e.count = a.count;
  e.sampling = a.sampling == "random" ? Sampling::UniformRandom : Sampling::UniformGrid;
  e.seed = run.config().run.seed;
  return run_ensemble(run.system(), e, scatter_options(run.config(), ScanAxis::V0), run.workers());
}

CsvTable curve_table(const DecayCurve& c, const char* abscissa) {
  CsvTable t({abscissa, "N"});
  for (std::size_t i = 0; i < c.abscissa.size(); ++i) t.row().add(c.abscissa[i]).add(c.counts[i]);
  return t;
}

Json fit_json(const PowerLawFit& f, const DecayCurve& c) {
  return Json{{"z", f.z},           {"stderr_z", f.stderr_z}, {"range_lo", f.range_lo}, {"range_hi", f.range_hi},
              {"points", f.points}, {"residual", f.residual}, {"amplitude", f.amplitude}, {"failures", c.failures},
              {"cutoff", c.cutoff}};
}

CsvTable points_table(const std::vector<Point2>& pts, int kind, int group) {
  CsvTable t({"x", "p", "kind", "group"});
  for (const auto& z : pts) t.row().add(z.x()).add(z.y()).add(kind).add(group);
  return t;
}

void append_curve(CsvTable& t, const std::vector<Point2>& pts, int kind, int group) {
  for (const auto& z : pts) t.row().add(z.x()).add(z.y()).add(kind).add(group);
}

CsvTable fixed_point_table(const FixedPointSearch& s) {
  CsvTable t({"x", "p", "stability", "label", "eigenvalue_1", "eigenvalue_2", "trace", "determinant", "residual"});
  for (const auto& fp : s.points) {
    t.row().add(fp.location.x()).add(fp.location.y()).add(to_string(fp.stability)).add(to_string(fp.label));
    t.add(fp.eigenvalues(0)).add(fp.eigenvalues(1)).add(fp.trace).add(fp.determinant).add(fp.residual);
  }
  return t;
}

Json fixed_point_json(const FixedPointInfo& fp) {
  return Json{{"x", fp.location.x()},
              {"p", fp.location.y()},
              {"eigenvalues", {fp.eigenvalues(0), fp.eigenvalues(1)}},
              {"residual", fp.residual},
              {"determinant", fp.determinant}};
}

std::string gamma_text(const Rational& r) { return to_string(r); }

Json horseshoe_json(const HorseshoeReport& r, const SaddlePair& s) {
  return Json{{"saddle_a", fixed_point_json(s.a)},
              {"saddle_b", fixed_point_json(s.b)},
              {"n", r.n_used},
              {"gamma_a", gamma_text(r.gamma_a)},
              {"gamma_b", gamma_text(r.gamma_b)},
              {"r_a", r.r_a},
              {"r_b", r.r_b},
              {"complete", r.complete},
              {"stable_gaps", r.stable_gaps.size()},
              {"unstable_gaps", r.unstable_gaps},
              {"ambiguities", r.ambiguities}};
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : " ") + x;
  return s;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Driven-oscillator scattering toolkit"};
  app.require_subcommand(1);
  app.footer("Configuration keys (key=default):\n" + config_reference() +
             "Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.\n"
             "DSCAT_WORKERS overrides the automatic worker count.");

  CommonOptions common;
  SweepArgs sweep_args;
  sweep_args.jumps = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "scan one input and record the scattering function");
  add_common(sweep_cmd, common);
  add_sweep_options(sweep_cmd, sweep_args, true);
  sweep_cmd->add_flag("--jumps", sweep_args.jumps, "refine N_c changes between touching regular intervals");

  SweepArgs e0_args;
  e0_args.lo = 0.0;
  e0_args.hi = 4.0;
  e0_args.v0 = 1.049;
  auto* e0_cmd = app.add_subcommand("e0-sweep", "scan the driver amplitude (f1 driver unless configured)");
  add_common(e0_cmd, common);
  add_sweep_options(e0_cmd, e0_args, false);
  bool no_jumps = false;
  e0_cmd->add_flag("--no-jumps", no_jumps, "skip refinement of N_c changes");

  struct {
    double x_lo = -0.5, x_hi = 0.5, v_lo = 1.46, v_hi = 1.64;
    std::size_t nx = 200, nv = 200;
  } grid;
  auto* grid_cmd = app.add_subcommand("grid", "N_c over an (x0, v0) grid");
  add_common(grid_cmd, common);
  grid_cmd->add_option("--x0-min", grid.x_lo, "")->capture_default_str();
  grid_cmd->add_option("--x0-max", grid.x_hi, "")->capture_default_str();
  grid_cmd->add_option("--v0-min", grid.v_lo, "")->capture_default_str();
  grid_cmd->add_option("--v0-max", grid.v_hi, "")->capture_default_str();
  grid_cmd->add_option("--nx", grid.nx, "x0 samples (>= 2)")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  grid_cmd->add_option("--nv", grid.nv, "v0 samples (>= 2)")->check(CLI::Range(2, 1 << 20))->capture_default_str();

  EnsembleArgs ens;
  std::size_t bins = 200;
  auto* survive_cmd = app.add_subcommand("survive", "survival function N(t) of an ensemble with a power-law fit");
  add_common(survive_cmd, common);
  add_ensemble_options(survive_cmd, ens);
  survive_cmd->add_option("--bins", bins, "logarithmic time bins")->check(CLI::PositiveNumber)->capture_default_str();

  double fit_lo = 5, fit_hi = 60, stairs_from = 60;
  auto* zeros_cmd = app.add_subcommand("zeros-dist", "zero-count distribution N(n) of an ensemble");
  add_common(zeros_cmd, common);
  add_ensemble_options(zeros_cmd, ens);
  zeros_cmd->add_option("--fit-min", fit_lo, "")->capture_default_str();
  zeros_cmd->add_option("--fit-max", fit_hi, "")->capture_default_str();
  zeros_cmd->add_option("--staircase-from", stairs_from, "")->capture_default_str();

  struct {
    std::string mode = "grid";
    double p_lo = 0.05, p_hi = 2.5;
    std::size_t np = 100, ntau = 100;
    int n_max = 6;
    double tau = std::numbers::pi, p_in = 1.0, p_out = 3.0, tol = 1e-6;
    std::string direction = "forward";
    double p = 1.0, disk_tau = 3.5, radius = 0.05;
    std::size_t samples = 100000;
  } rm;
  auto* rm_cmd = app.add_subcommand("return-map", "return map on the x=0 section");
  add_common(rm_cmd, common);
  rm_cmd->add_option("--mode", rm.mode, "grid, bisect or area")
      ->check(CLI::IsMember({"grid", "bisect", "area"}))
      ->capture_default_str();
  rm_cmd->add_option("--p-min", rm.p_lo, "grid: momentum range")->capture_default_str();
  rm_cmd->add_option("--p-max", rm.p_hi, "")->capture_default_str();
  rm_cmd->add_option("--np", rm.np, "grid: momentum samples")->check(CLI::PositiveNumber)->capture_default_str();
  rm_cmd->add_option("--ntau", rm.ntau, "grid: phase samples")->check(CLI::PositiveNumber)->capture_default_str();
  rm_cmd->add_option("--n-max", rm.n_max, "grid: deepest Q_n tested")->check(CLI::PositiveNumber)->capture_default_str();
  rm_cmd->add_option("--tau", rm.tau, "bisect: phase of the ray")->capture_default_str();
  rm_cmd->add_option("--p-in", rm.p_in, "bisect: returning end")->capture_default_str();
  rm_cmd->add_option("--p-out", rm.p_out, "bisect: escaping end")->capture_default_str();
  rm_cmd->add_option("--tol", rm.tol, "bisect: bracket width")->check(CLI::PositiveNumber)->capture_default_str();
  rm_cmd->add_option("--direction", rm.direction, "bisect: forward or backward")
      ->check(CLI::IsMember({"forward", "backward"}))
      ->capture_default_str();
  rm_cmd->add_option("--p", rm.p, "area: disk centre momentum")->capture_default_str();
  rm_cmd->add_option("--disk-tau", rm.disk_tau, "area: disk centre phase")->capture_default_str();
  rm_cmd->add_option("--radius", rm.radius, "area: disk radius in (p^2/2, tau)")->capture_default_str();
  rm_cmd->add_option("--samples", rm.samples, "area: samples")->check(CLI::Range(3, 1 << 30))->capture_default_str();

  struct {
    std::string method = "continuation";
    double section_phase = 0.0, arclength = 1.0;
    bool truncate = false;
    double x_lo = -8, x_hi = 8, p_lo = -4, p_hi = 4;
    std::size_t nx = 400, np = 400;
    int t_stay = 3;
  } mf;
  auto* mf_cmd = app.add_subcommand("manifolds", "fixed points and invariant manifolds of the stroboscopic map");
  add_common(mf_cmd, common);
  mf_cmd->add_option("--method", mf.method, "continuation or sprinkler")
      ->check(CLI::IsMember({"continuation", "sprinkler"}))
      ->capture_default_str();
  mf_cmd->add_option("--section-phase", mf.section_phase, "driver phase of the section")->capture_default_str();
  mf_cmd->add_option("--arclength", mf.arclength, "continuation: branch length")->capture_default_str();
  mf_cmd->add_flag("--truncate", mf.truncate, "continuation: stop at unresolvable folds instead of failing");
  mf_cmd->add_option("--x-min", mf.x_lo, "sprinkler: region")->capture_default_str();
  mf_cmd->add_option("--x-max", mf.x_hi, "")->capture_default_str();
  mf_cmd->add_option("--p-min", mf.p_lo, "")->capture_default_str();
  mf_cmd->add_option("--p-max", mf.p_hi, "")->capture_default_str();
  mf_cmd->add_option("--nx", mf.nx, "sprinkler: grid columns")->check(CLI::PositiveNumber)->capture_default_str();
  mf_cmd->add_option("--np", mf.np, "sprinkler: grid rows")->check(CLI::PositiveNumber)->capture_default_str();
  mf_cmd->add_option("--t-stay", mf.t_stay, "sprinkler: periods inside the region")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  struct {
    int n = 2, depth = 8;
    double arclength = 8.0;
    std::size_t raster = 300;
  } gm;
  auto* gamma_cmd = app.add_subcommand("gamma", "gap tree and development parameter of the horseshoe");
  add_common(gamma_cmd, common);
  gamma_cmd->add_option("--n", gm.n, "tendril order")->check(CLI::Range(1, 12))->capture_default_str();
  gamma_cmd->add_option("--tree-depth", gm.depth, "levels in the gap table")->check(CLI::Range(1, 12))->capture_default_str();
  gamma_cmd->add_option("--arclength", gm.arclength, "boundary branch length")->capture_default_str();
  gamma_cmd->add_option("--raster", gm.raster, "raster cells per side")->check(CLI::Range(16, 4096))->capture_default_str();

  struct {
    std::string csv, kind = "scatter_xy", x, y, value, group, title, x_label, y_label, fit_json;
    std::vector<double> ref_y;
    bool gnuplot = false;
  } pl;
  auto* plot_cmd = app.add_subcommand("plot", "render a CSV as SVG");
  add_common(plot_cmd, common);
  plot_cmd->add_option("--csv", pl.csv, "input CSV")->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--kind", pl.kind, "scatter_xy, loglog, grid_heatmap or manifold_overlay")
      ->check(CLI::IsMember({"scatter_xy", "loglog", "grid_heatmap", "manifold_overlay"}))
      ->capture_default_str();
  plot_cmd->add_option("--x", pl.x, "x column")->required();
  plot_cmd->add_option("--y", pl.y, "y column")->required();
  plot_cmd->add_option("--value", pl.value, "colour column (heatmap value, overlay curve kind)");
  plot_cmd->add_option("--group", pl.group, "overlay polyline column");
  plot_cmd->add_option("--title", pl.title, "");
  plot_cmd->add_option("--xlabel", pl.x_label, "");
  plot_cmd->add_option("--ylabel", pl.y_label, "");
  plot_cmd->add_option("--ref-y", pl.ref_y, "horizontal reference line (repeatable)");
  plot_cmd->add_option("--fit-json", pl.fit_json, "fit JSON from survive or zeros-dist")->check(CLI::ExistingFile);
  plot_cmd->add_flag("--gnuplot", pl.gnuplot, "also write an equivalent gnuplot script");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  CLI::App* cmd = app.get_subcommands().front();
  RunConfig base;
  if (cmd == e0_cmd) base.system.driver = DriverKind::F1Finite;
  RunConfig cfg;
  try {
    cfg = build_config(common, base);
    if (cmd == survive_cmd || cmd == zeros_cmd) {
      if (!(ens.v0_hi > ens.v0_lo)) throw ValidationError("--v0-max must exceed --v0-min");
    }
    const SweepArgs* scan = cmd == sweep_cmd ? &sweep_args : cmd == e0_cmd ? &e0_args : nullptr;
    if (scan && !(scan->hi > scan->lo)) throw ValidationError("--max must exceed --min");
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  Run run(cmd->get_name(), args, cfg, common.out);
  cancel_flag().store(false);
  try {
    if (cmd == sweep_cmd) {
      run_sweep(run, sweep_args, parse_axis(sweep_args.axis), sweep_args.jumps);
    } else if (cmd == e0_cmd) {
      run_sweep(run, e0_args, ScanAxis::E0, !no_jumps);
    } else if (cmd == grid_cmd) {
      const GridField g = grid_nc(run.system(), grid.x_lo, grid.x_hi, grid.v_lo, grid.v_hi, grid.nx, grid.nv,
                                  scatter_options(run.config(), ScanAxis::V0), run.workers());
      CsvTable t({"x0", "v0", "n_c", "same_as_neighbors"});
      for (std::size_t iv = 0; iv < g.nv(); ++iv)
        for (std::size_t ix = 0; ix < g.nx(); ++ix)
          t.row().add(g.x0_axis[ix]).add(g.v0_axis[iv]).add(g.at(ix, iv)).add(int{g.same_as_neighbors[iv * g.nx() + ix]});
      run.csv(t, run.out());
    } else if (cmd == survive_cmd) {
      const EnsembleRun e = ensemble(run, ens);
      const DecayCurve c = survival_from_records(e.records, e.cutoff, bins);
      run.csv(curve_table(c, "t"), run.out());
      run.json(fit_json(survival_fit(c, run.system().period()), c), run.sibling("fit.json"));
    } else if (cmd == zeros_cmd) {
      const EnsembleRun e = ensemble(run, ens);
      const DecayCurve c = zeros_from_records(e.records);
      run.csv(curve_table(c, "n"), run.out());
      Json j = fit_json(powerlaw_fit(c, fit_lo, fit_hi), c);
      j["staircase_from"] = stairs_from;
      j["staircase_jumps"] = staircase_detect(c, stairs_from);
      run.json(j, run.sibling("fit.json"));
    } else if (cmd == rm_cmd) {
      const SystemConfig& sys = run.system();
      if (rm.mode == "grid") {
        const auto cells = classify_grid(sys, rm.p_lo, rm.p_hi, rm.np, rm.ntau, rm.n_max, run.workers());
        CsvTable t({"p", "tau", "forward", "backward", "h_plus", "h_minus", "q_n"});
        for (const auto& c : cells) {
          t.row().add(c.pt.p).add(c.pt.tau).add(to_string(c.cls.forward)).add(to_string(c.cls.backward));
          t.add(c.h_plus).add(c.h_minus).add(c.q_n);
        }
        run.csv(t, run.out());
      } else if (rm.mode == "bisect") {
        const Direction dir = rm.direction == "backward" ? Direction::Backward : Direction::Forward;
        const BoundaryEstimate b = boundary_bisect(sys, rm.tau, rm.p_in, rm.p_out, dir, rm.tol);
        CsvTable t({"step", "p", "kind", "return_time"});
        for (std::size_t i = 0; i < b.inside_sequence.size(); ++i) {
          const auto& s = b.inside_sequence[i];
          t.row().add(i).add(s.p).add(s.kind == ReturnKind::Returns ? "returns" : "undecided").add(s.return_time);
        }
        run.csv(t, run.out());
        run.json({{"tau", rm.tau},
                  {"p_boundary", b.p_boundary},
                  {"p_inside", b.p_inside},
                  {"p_outside", b.p_outside},
                  {"evaluations", b.evaluations}},
                 run.sibling("boundary.json"));
      } else {
        const AreaReport a = area_check(sys, {rm.p, rm.disk_tau, rm.radius}, rm.samples, run.config().run.seed,
                                        run.workers());
        run.json({{"p_center", rm.p},
                  {"tau_center", rm.disk_tau},
                  {"radius", rm.radius},
                  {"samples", a.samples},
                  {"source_area", a.source_area},
                  {"image_area", a.image_area},
                  {"ratio", a.ratio}},
                 run.out());
      }
    } else if (cmd == mf_cmd) {
      const PlanarMap map = stroboscopic_map(run.system(), mf.section_phase);
      if (mf.method == "sprinkler") {
        const SprinklerClouds c =
            sprinkler(map, {mf.x_lo, mf.x_hi, mf.p_lo, mf.p_hi}, mf.nx, mf.np, mf.t_stay, run.workers());
        CsvTable t = points_table(c.stable, 0, 0);
        append_curve(t, c.unstable, 1, 1);
        run.csv(t, run.out());
      } else {
        const FixedPointSearch fps = find_fixed_points(map, {}, {}, run.workers());
        run.csv(fixed_point_table(fps), run.sibling("fixed.csv"));
        const SaddlePair pair = outermost_saddles(fps);
        ContinuationOptions opt;
        opt.truncate_on_blowup = mf.truncate;
        const RegionCurves rc = region_curves(map, pair, mf.arclength, opt, run.workers());
        CsvTable t({"x", "p", "kind", "group"});
        append_curve(t, rc.stable_a.points, 0, 0);
        append_curve(t, rc.unstable_a.points, 1, 1);
        append_curve(t, rc.stable_b.points, 0, 2);
        append_curve(t, rc.unstable_b.points, 1, 3);
        std::optional<FundamentalRegion> region;
        std::string region_error;
        try {
          region = fundamental_region(pair.a, pair.b, rc);
        } catch (const NoIntersection& e) {
          region_error = e.what();
        }
        if (region) append_curve(t, region->boundary, 2, 4);
        run.csv(t, run.out());
        if (!region) throw NoIntersection(region_error);
      }
    } else if (cmd == gamma_cmd) {
      const GapTree tree = gap_tree(gm.n, gm.depth);
      CsvTable t({"depth", "gaps", "cumulative"});
      for (int d = 1; d <= gm.depth; ++d) t.row().add(d).add(tree.gaps_at(d)).add(tree.cumulative(d));
      run.csv(t, run.out());
      const PlanarMap map = stroboscopic_map(run.system());
      const SaddlePair pair = outermost_saddles(find_fixed_points(map, {}, {}, run.workers()));
      ContinuationOptions opt;
      opt.truncate_on_blowup = true;
      const RegionCurves rc = region_curves(map, pair, gm.arclength, opt, run.workers());
      const FundamentalRegion region = fundamental_region(pair.a, pair.b, rc);
      HorseshoeOptions ho;
      ho.raster = gm.raster;
      const HorseshoeReport rep = development_parameter(map, region, gap_tree(gm.n, gm.n), gm.n, ho, run.workers());
      run.json(horseshoe_json(rep, pair), run.sibling("gamma.json"));
    } else if (cmd == plot_cmd) {
      PlotSpec spec;
      spec.kind = plot_kind_from_string(pl.kind);
      spec.x_column = pl.x;
      spec.y_column = pl.y;
      spec.value_column = pl.value;
      spec.group_column = pl.group;
      spec.title = pl.title;
      spec.x_label = pl.x_label.empty() ? pl.x : pl.x_label;
      spec.y_label = pl.y_label.empty() ? pl.y : pl.y_label;
      spec.reference_y = pl.ref_y;
      if ((spec.kind == PlotKind::GridHeatmap || spec.kind == PlotKind::ManifoldOverlay) && spec.value_column.empty())
        throw ValidationError("--value is required for " + pl.kind);
      if (!pl.fit_json.empty()) {
        std::ifstream f(pl.fit_json);
        const Json j = Json::parse(f);
        spec.fit = PowerLawLine{j.at("z").get<double>(), j.at("amplitude").get<double>(),
                                j.at("range_lo").get<double>(), j.at("range_hi").get<double>()};
      }
      const CsvData data = read_csv(fs::path(pl.csv));
      run.text(render_svg(spec, data), run.out());
      if (pl.gnuplot) run.text(gnuplot_script(spec, pl.csv, run.out()), run.sibling("gp"));
    }
  } catch (const Cancelled& e) {
    run.finish(false, e.what());
    err << "cancelled: partial manifest written\n";
    return kRuntimeError;
  } catch (const std::exception& e) {
    run.finish(false, e.what());
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  run.finish(true);
  out << "wrote " << common.out << " (" << join(args) << ")\n";
  return kSuccess;
}

}  // namespace dscat::cli

#include "dscat/escape_stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "dscat/parallel.hpp"

namespace dscat {

void EnsembleSpec::validate() const {
  if (count < 1) throw ValidationError("ensemble count >= 1");
  if (!(v0_lo < v0_hi)) throw ValidationError("ensemble needs v0_lo < v0_hi");
}

std::vector<double> ensemble_velocities(const EnsembleSpec& spec) {
  spec.validate();
  std::vector<double> v(spec.count);
  const double w = spec.v0_hi - spec.v0_lo;
  if (spec.sampling == Sampling::UniformGrid) {
    for (std::size_t i = 0; i < spec.count; ++i)
      v[i] = spec.v0_lo + w * (static_cast<double>(i) + 0.5) / static_cast<double>(spec.count);
  } else {
    std::mt19937_64 rng(spec.seed);
    for (auto& x : v) {
      // 53-bit uniform in (0, 1)
      const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
      x = spec.v0_lo + w * u;
    }
  }
  return v;
}

EnsembleRun run_ensemble(const SystemConfig& cfg, const EnsembleSpec& spec, const ScatterOptions& opt,
                         std::size_t workers) {
  cfg.validate();
  const std::vector<double> v0 = ensemble_velocities(spec);
  EnsembleRun run;
  run.records.resize(v0.size());
  parallel_for(
      v0.size(),
      [&](std::size_t i) {
        ScatterRecord r;
        try {
          r = scatter(cfg, spec.x0, v0[i], opt);
        } catch (const std::exception& e) {
          r = ScatterRecord{};
          r.error = e.what();
        }
        r.input = v0[i];
        run.records[i] = std::move(r);
      },
      workers);
  for (const auto& r : run.records) run.failures += !r.ok();
  run.cutoff = cfg.driver == DriverKind::F1Finite ? cfg.switch_off_time() + cfg.noreturn_time()
                                                   : opt.k_max * cfg.period();
  return run;
}

double survival_time(const ScatterRecord& r, double cutoff) {
  if (r.trapped()) return cutoff;
  return r.n_c > 0 ? r.t_last - r.t_launch : 0.0;
}

DecayCurve survival_from_records(const std::vector<ScatterRecord>& records, double cutoff, std::size_t bins) {
  DecayCurve c;
  c.cutoff = cutoff;
  std::vector<double> times;
  times.reserve(records.size());
  for (const auto& r : records) {
    if (!r.ok()) {
      ++c.failures;
      continue;
    }
    times.push_back(survival_time(r, cutoff));
  }
  std::sort(times.begin(), times.end());
  const auto count_at_least = [&](double t) {
    return static_cast<double>(times.end() - std::lower_bound(times.begin(), times.end(), t));
  };
  c.abscissa.push_back(0.0);
  c.counts.push_back(static_cast<double>(times.size()));
  double t_min = cutoff;
  for (double t : times)
    if (t > 0.0) {
      t_min = t;
      break;
    }
  if (bins < 2 || !(t_min < cutoff)) return c;
  const double a = std::log(t_min), b = std::log(cutoff);
  for (std::size_t i = 0; i < bins; ++i) {
    const double t = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(bins - 1));
    c.abscissa.push_back(t);
    c.counts.push_back(count_at_least(t));
  }
  return c;
}

DecayCurve zeros_from_records(const std::vector<ScatterRecord>& records) {
  DecayCurve c;
  int n_max = 1;
  for (const auto& r : records) {
    if (!r.ok()) {
      ++c.failures;
      continue;
    }
    n_max = std::max(n_max, r.n_c);
  }
  std::vector<double> hist(static_cast<std::size_t>(n_max) + 2, 0.0);
  for (const auto& r : records)
    if (r.ok()) hist[static_cast<std::size_t>(std::max(r.n_c, 0))] += 1.0;
  double tail = 0.0;
  std::vector<double> at_least(hist.size(), 0.0);
  for (std::size_t n = hist.size(); n-- > 0;) {
    tail += hist[n];
    at_least[n] = tail;
  }
  for (int n = 1; n <= n_max; ++n) {
    c.abscissa.push_back(n);
    c.counts.push_back(at_least[static_cast<std::size_t>(n)]);
  }
  return c;
}

DecayCurve survival_function(const SystemConfig& cfg, const EnsembleSpec& spec, const ScatterOptions& opt,
                             std::size_t workers) {
  const EnsembleRun run = run_ensemble(cfg, spec, opt, workers);
  return survival_from_records(run.records, run.cutoff);
}

DecayCurve zeros_distribution(const SystemConfig& cfg, const EnsembleSpec& spec, const ScatterOptions& opt,
                              std::size_t workers) {
  const EnsembleRun run = run_ensemble(cfg, spec, opt, workers);
  DecayCurve c = zeros_from_records(run.records);
  c.cutoff = run.cutoff;
  return c;
}

PowerLawFit powerlaw_fit(const DecayCurve& curve, double lo, double hi, double min_count) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < curve.abscissa.size(); ++i) {
    const double x = curve.abscissa[i], n = curve.counts[i];
    if (x >= lo && x <= hi && x > 0.0 && n >= min_count) {
      lx.push_back(std::log(x));
      ly.push_back(std::log(n));
    }
  }
  if (lx.size() < 3) throw InsufficientData("power-law fit needs >= 3 points with enough counts");
  const Eigen::Index m = static_cast<Eigen::Index>(lx.size());
  Eigen::MatrixXd a(m, 2);
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = lx[static_cast<std::size_t>(i)];
    y(i) = ly[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector2d beta = a.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd res = y - a * beta;
  const double ssr = res.squaredNorm();
  const Eigen::Matrix2d cov = (a.transpose() * a).inverse() * (m > 2 ? ssr / double(m - 2) : 0.0);
  PowerLawFit f;
  f.z = -beta(1);
  f.amplitude = std::exp(beta(0));
  f.stderr_z = std::sqrt(std::max(0.0, cov(1, 1)));
  f.residual = std::sqrt(ssr / double(m));
  f.points = lx.size();
  f.range_lo = std::exp(lx.front());
  f.range_hi = std::exp(lx.back());
  return f;
}

PowerLawFit survival_fit(const DecayCurve& curve, double period) {
  const double at_cutoff = curve.counts.empty() ? 0.0 : curve.counts.back();
  double hi = period;
  for (std::size_t i = 0; i < curve.abscissa.size(); ++i)
    if (curve.counts[i] >= 10.0 && curve.counts[i] - at_cutoff >= 10.0) hi = std::max(hi, curve.abscissa[i]);
  return powerlaw_fit(curve, period, hi);
}

std::vector<double> staircase_detect(const DecayCurve& curve, double from) {
  std::vector<double> jumps;
  for (std::size_t i = 1; i < curve.abscissa.size(); ++i)
    if (curve.abscissa[i] > from && curve.counts[i] < curve.counts[i - 1]) jumps.push_back(curve.abscissa[i]);
  return jumps;
}

}  // namespace dscat

#pragma once

// Drivers behind the cflab command line. Each run_* function performs one
// subcommand and returns a process exit status; run_guarded maps library
// exceptions onto the same documented codes so the contract is total.

#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "cflab/bernstein.hpp"
#include "cflab/characteristics.hpp"
#include "cflab/config.hpp"
#include "cflab/io.hpp"
#include "cflab/kinetic.hpp"
#include "cflab/parallel.hpp"
#include "cflab/stochastic.hpp"
#include "cflab/verification.hpp"

namespace cflab::experiment {

enum ExitCode : int {
  kOk = 0,
  kSolverAbort = 1,
  kBoundViolation = 2,
  kCoverageGap = 3,
  kUsage = 64,
  kParseFailure = 65,
  kMissingArtifacts = 66,
};

struct RunContext {
  ExperimentConfig config;
  bool quiet = false;
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;

  std::filesystem::path dir() const { return config.outputs.dir; }

  template <class... Args>
  void say(fmt::format_string<Args...> f, Args&&... args) const {
    if (!quiet) *out << fmt::format(f, std::forward<Args>(args)...) << '\n';
  }
  template <class... Args>
  void complain(fmt::format_string<Args...> f, Args&&... args) const {
    *err << fmt::format(f, std::forward<Args>(args)...) << '\n';
  }
};

inline constexpr double kEnvelopeHorizon = 0.8;  // fraction of T*
inline constexpr double kHjTolerance = 1e-2;
inline constexpr double kWeakFormTolerance = 1e-2;
inline constexpr double kMomentOdeTolerance = 1e-2;
inline const std::vector<double> kWeakFormProbes = {0.5, 1.0, 2.0};

namespace detail {

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir))
    throw ConfigError("output directory " + dir.string() + " is not writable");
}

inline std::vector<double> x_grid(const OutputConfig& o) {
  return bernstein::default_x_grid(o.x_points, o.x_min, o.x_max);
}

/// Field rows with time <= T.
inline bernstein::BernsteinField restrict_times(const bernstein::BernsteinField& f, double T) {
  bernstein::BernsteinField r;
  r.x_grid = f.x_grid;
  r.mass = f.mass;
  for (std::size_t ti = 0; ti < f.nt(); ++ti) {
    if (f.times[ti] > T) break;
    r.times.push_back(f.times[ti]);
    const auto a = f.index(ti, 0), b = a + f.nx();
    r.F.insert(r.F.end(), f.F.begin() + a, f.F.begin() + b);
    r.Fx.insert(r.Fx.end(), f.Fx.begin() + a, f.Fx.begin() + b);
    r.Fxx.insert(r.Fxx.end(), f.Fxx.begin() + a, f.Fxx.begin() + b);
    if (f.has_g()) r.G_eps.insert(r.G_eps.end(), f.G_eps.begin() + a, f.G_eps.begin() + b);
    if (!f.m2_of_t.empty()) r.m2_of_t.push_back(f.m2_of_t[ti]);
  }
  return r;
}

/// Exact transform of the initial profile, used to seed characteristics.
inline hj::InitialData initial_transform(const ExperimentConfig& c) {
  if (const auto* p = std::get_if<Monodisperse>(&c.initial)) return hj::point_mass_initial(p->mass, p->size);
  if (const auto* p = std::get_if<Exponential>(&c.initial)) return hj::exponential_initial(p->mass, p->rate);
  throw ConfigError("characteristics need a closed-form initial profile");
}

inline BoundReport from_monotonicity(const std::string& name, const bernstein::MonotonicityReport& m) {
  BoundReport r{name, m.worst_value, m.tolerance, m.worst_t, static_cast<double>(m.worst_k)};
  if (m.violations > 0 && r.passed()) r.worst_margin = -2.0 * m.tolerance - 1.0;
  return r;
}

inline BoundReport upper_limit(const std::string& name, double value, double limit, double t,
                               double x_or_k) {
  return BoundReport{name, limit - value, 0.0, t, x_or_k};
}

/// Starts for the characteristic fan: either configured, or the automatic
/// range reaching from just above (m + ½) t_end to x_hi + (m + ½) t_end + 1.
inline std::vector<double> fan_starts(const ExperimentConfig& c, double t_end, double x_hi) {
  const auto& ch = c.characteristics;
  const double reach = (c.mass + 0.5) * t_end;
  const double lo = ch.x0_min > 0.0 ? ch.x0_min : reach + 1e-3;
  const double hi = ch.x0_max > 0.0 ? ch.x0_max : x_hi + reach + 1.0;
  return hj::geometric_starts(ch.starts, lo, hi);
}

/// Times present (to 1e-9 relative) in both sorted lists.
inline std::vector<double> common_times(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out;
  std::size_t j = 0;
  for (double t : a) {
    while (j < b.size() && b[j] < t - 1e-9 * std::max(1.0, t)) ++j;
    if (j < b.size() && std::abs(b[j] - t) <= 1e-9 * std::max(1.0, t)) out.push_back(t);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline int run_simulate(const RunContext& ctx) {
  const auto& c = ctx.config;
  detail::ensure_dir(ctx.dir());
  const auto init = c.initial_distribution();
  const auto solver = c.solver_config();
  if (solver.dt > kinetic::stability_limit(init.grid(), c.kernel, c.mass))
    ctx.complain("warning: dt = {} exceeds the stability guard {:.3g}", solver.dt,
                 kinetic::stability_limit(init.grid(), c.kernel, c.mass));

  kinetic::Trajectory traj;
  try {
    traj = kinetic::simulate(solver, init);
  } catch (const SolverAbort& e) {
    ctx.complain("solver abort: {}", e.what());
    return kSolverAbort;
  }

  const auto xg = detail::x_grid(c.outputs);
  const auto field = bernstein::transform(traj, xg);
  // The residual column refers to the coagulation-fragmentation equation, so
  // it is left empty for pure coagulation runs.
  const auto residual = traj.snapshots.size() >= 3 && c.kernel.fragmentation
                            ? bernstein::hj_residual_values(field, field.mass, c.kernel.frag_eps)
                            : std::vector<double>{};
  io::write_trajectory(ctx.dir() / "trajectory.csv", traj.moments);
  io::write_snapshots(ctx.dir() / "snapshots.csv", traj.snapshots);
  io::write_field(ctx.dir() / "field.csv", field, residual);

  const auto& sc = solver.scenario;
  const auto envelope = verify::envelope_check(traj.moments, sc.m2_0, kEnvelopeHorizon * sc.t_star);
  const auto holder = verify::holder_bounds_check(traj.moments);
  ctx.say("mass_drift = {:.3e} (limit {:.0e})", traj.max_mass_drift, kinetic::kMassDriftTolerance);
  ctx.say("top_bin_occupancy = {:.3e}{}", traj.max_top_bin_occupancy,
          traj.truncation_flagged ? " (truncation is visible; enlarge the grid)" : "");
  ctx.say("m2(0) = {:.6g}, T* = {:.6g}, m2({}) = {:.6g}", sc.m2_0, sc.t_star,
          traj.moments.times.back(), traj.moments.moments.back()[2]);
  ctx.say("envelope margin = {:.3e}, holder margin = {:.3e}", envelope.worst_margin,
          holder.worst_margin);

  if (traj.mass_drift_flagged || !envelope.passed() || !holder.passed()) {
    ctx.complain("bound violation: drift {:.3e}, envelope {}, holder {}", traj.max_mass_drift,
                 envelope.passed() ? "ok" : "FAIL", holder.passed() ? "ok" : "FAIL");
    return kBoundViolation;
  }
  return kOk;
}

/// Re-checks a finished simulate run from its CSV artifacts.
inline std::vector<BoundReport> verify_rows(const ExperimentConfig& c,
                                            const MomentSeries& series,
                                            const std::vector<kinetic::Snapshot>& snaps) {
  if (series.size() == 0 || snaps.empty()) throw ParseError("verify: artifacts contain no rows");
  const double eps = c.kernel.frag_eps;
  const auto& first = snaps.front().dist;
  const auto sc = ScenarioParams::from_initial(first);
  std::vector<BoundReport> rows;

  // One envelope row per output time inside the horizon.
  const double horizon = kEnvelopeHorizon * sc.t_star;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double t = series.times[i];
    if (t > horizon) continue;
    const double env = verify::second_moment_envelope(sc.m2_0, t);
    rows.push_back(BoundReport{"second_moment_envelope", 1.0 - series.moments[i][2] / env,
                               verify::kEnvelopeTolerance, t, 2.0});
  }
  rows.push_back(verify::holder_bounds_check(series));

  double drift = 0.0, drift_t = 0.0, occ = 0.0, occ_t = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series.mass_drift[i] > drift) drift = series.mass_drift[i], drift_t = series.times[i];
    if (series.top_bin_occupancy[i] > occ) occ = series.top_bin_occupancy[i], occ_t = series.times[i];
  }
  rows.push_back(detail::upper_limit("mass_conservation", drift, kinetic::kMassDriftTolerance,
                                     drift_t, 1.0));
  rows.push_back(detail::upper_limit("top_bin_occupancy", occ, kinetic::kTopBinTolerance, occ_t,
                                     static_cast<double>(first.grid().bins())));
  if (eps > 0.0) rows.push_back(verify::a_priori_cap_check(series, sc.m, eps));

  const auto xg = detail::x_grid(c.outputs);
  {
    bernstein::MonotonicityReport all;
    all.worst_value = std::numeric_limits<double>::infinity();
    for (const auto& s : snaps) {
      const auto m = bernstein::complete_monotonicity_report(s.dist, 6, xg, s.t);
      all.tolerance = m.tolerance;
      all.checked += m.checked;
      all.violations += m.violations;
      if (m.worst_value < all.worst_value) {
        all.worst_value = m.worst_value;
        all.worst_k = m.worst_k;
        all.worst_x = m.worst_x;
        all.worst_t = m.worst_t;
      }
    }
    rows.push_back(detail::from_monotonicity("complete_monotonicity_exact", all));
  }

  kinetic::Trajectory traj;
  traj.spec = c.kernel;
  traj.snapshots = snaps;
  const auto field = bernstein::transform(traj, xg);

  // Bounds on [0, T] with T the last output time before T*.
  double T = 0.0;
  for (double t : field.times)
    if (t < sc.t_star) T = t;
  if (T > 0.0) {
    const auto sub = detail::restrict_times(field, T);
    for (auto& r : verify::derivative_bounds_check(sub, sc, T)) rows.push_back(r);
    rows.push_back(bernstein::g_eps_bound_check(sub, sc, T));
  }

  if (snaps.size() >= 3) {
    for (double x : kWeakFormProbes) {
      const double r = kinetic::weak_form_residual(
          traj, [x](double s) { return -std::expm1(-x * s); });
      rows.push_back(detail::upper_limit("weak_form_residual", r, kWeakFormTolerance,
                                         std::numeric_limits<double>::quiet_NaN(), x));
    }
  }
  // The transformed equation and the moment hierarchy describe the
  // coagulation-fragmentation system; pure coagulation runs skip them.
  if (snaps.size() >= 3 && c.kernel.fragmentation) {
    // Fragmentation enters the discrete transform through a trapezoid sum
    // whose error grows like ds^2 x; the window x <= 1/ds keeps it resolved.
    const double x_cap = std::min(c.outputs.x_max, 1.0 / first.grid().ds());
    const auto hj = bernstein::hj_residual_summary(field, field.mass, eps, x_cap);
    rows.push_back(detail::upper_limit("hj_residual", hj.max_abs, kHjTolerance, hj.t, hj.x));
    for (int k : {2, 3}) rows.push_back(verify::moment_ode_check(series, eps, k, kMomentOdeTolerance));
  }
  return rows;
}

inline int run_verify(const RunContext& ctx) {
  const auto series = io::read_trajectory(ctx.dir() / "trajectory.csv");
  const auto snaps = io::read_snapshots(ctx.dir() / "snapshots.csv");
  const auto rows = verify_rows(ctx.config, series, snaps);
  io::write_report(ctx.dir() / "verify_report.csv", rows);
  std::size_t failed = 0;
  for (const auto& r : rows)
    if (!r.passed()) {
      ++failed;
      ctx.complain("FAIL {}: margin {:.3e} at t = {}, x/k = {}", r.name, r.worst_margin, r.t,
                   r.x_or_k);
    }
  ctx.say("{} checks, {} failed", rows.size(), failed);
  return failed == 0 ? kOk : kBoundViolation;
}

// ---------------------------------------------------------------------------

struct ConvergenceRow {
  double eps = 0.0;
  double gap = 0.0;
  double t = 0.0;
  double x = 0.0;
};

inline int run_convergence(const RunContext& ctx) {
  const auto& c = ctx.config;
  const auto& cv = c.convergence;
  if (!c.kernel.fragmentation)
    throw ConfigError("convergence: the eps -> 0 limit needs kernel.fragmentation = true");
  if (cv.eps_list.size() < 3)
    throw ConfigError("convergence: eps_list needs at least 3 entries");
  for (std::size_t i = 0; i < cv.eps_list.size(); ++i)
    if (!(cv.eps_list[i] > 0.0) || (i > 0 && !(cv.eps_list[i] < cv.eps_list[i - 1])))
      throw ConfigError("convergence: eps_list must be positive and strictly decreasing");
  detail::ensure_dir(ctx.dir());

  const double t_end = c.solver.t_end;
  const auto init0 = detail::initial_transform(c);
  const auto starts = detail::fan_starts(c, t_end, cv.x_hi);
  const auto fan = hj::integrate_fan(init0, starts, t_end, c.characteristics.dt, c.mass,
                                     c.characteristics.record_every);
  const auto [lo, hi] = hj::common_coverage(fan);
  const double reach = (c.mass + 0.5) * t_end;
  if (!(cv.x_lo > reach)) {
    ctx.complain(
        "coverage gap: no fan can cover x = {} at every time up to {}; starts must exceed "
        "(m + 1/2) t_end = {:.6g}, so raise convergence.x_lo above it",
        cv.x_lo, t_end, reach);
    return kCoverageGap;
  }
  if (!(lo <= cv.x_lo) || !(hi >= cv.x_hi)) {
    ctx.complain(
        "coverage gap: fan covers [{:.6g}, {:.6g}] but the window is [{}, {}]; "
        "required start range x0_min in ({:.6g}, {}], x0_max >= {:.6g}",
        lo, hi, cv.x_lo, cv.x_hi, reach, cv.x_lo, cv.x_hi + reach);
    return kCoverageGap;
  }

  std::vector<double> xw(cv.x_points);
  for (std::size_t i = 0; i < cv.x_points; ++i)
    xw[i] = cv.x_lo + (cv.x_hi - cv.x_lo) * static_cast<double>(i) /
                          static_cast<double>(cv.x_points - 1);

  std::vector<ConvergenceRow> rows(cv.eps_list.size());
  parallel_for(rows.size(), 0, [&](std::size_t i) {
    auto cfg = c;
    cfg.kernel = KernelSpec(cv.eps_list[i], c.kernel.truncation, c.kernel.fragmentation);
    const auto traj = kinetic::simulate(cfg.solver_config(), cfg.initial_distribution());
    std::vector<double> snap_times;
    for (const auto& s : traj.snapshots) snap_times.push_back(s.t);
    const auto times = detail::common_times(snap_times, fan.times);
    if (times.empty()) throw ConfigError("convergence: no output time shared by solver and fan");
    ConvergenceRow row{cv.eps_list[i], 0.0, 0.0, 0.0};
    std::size_t k = 0;
    for (double t : times) {
      while (std::abs(traj.snapshots[k].t - t) > 1e-9 * std::max(1.0, t)) ++k;
      const auto exact = bernstein::transform(traj.snapshots[k].dist, xw, t);
      const auto limit = hj::reconstruct(fan, xw, t);
      for (std::size_t j = 0; j < xw.size(); ++j) {
        const double g = std::abs(exact.F[j] - limit[j]);
        if (g > row.gap) row = {row.eps, g, t, xw[j]};
      }
    }
    rows[i] = row;
  });

  {
    io::CsvWriter w(ctx.dir() / "convergence.csv", {"eps", "gap", "worst_t", "worst_x"});
    for (const auto& r : rows) w.row({r.eps, r.gap, r.t, r.x});
  }
  for (const auto& r : rows) ctx.say("eps = {:<8g} gap = {:.6e} at (t, x) = ({}, {})", r.eps, r.gap, r.t, r.x);
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (!(rows[i].gap < rows[i - 1].gap)) {
      ctx.complain("gaps not strictly decreasing: eps {} -> {:.6e}, eps {} -> {:.6e}",
                   rows[i - 1].eps, rows[i - 1].gap, rows[i].eps, rows[i].gap);
      return kBoundViolation;
    }
  return kOk;
}

inline int run_characteristics(const RunContext& ctx) {
  const auto& c = ctx.config;
  detail::ensure_dir(ctx.dir());
  const double t_end = c.solver.t_end;
  const auto init0 = detail::initial_transform(c);
  const auto starts = detail::fan_starts(c, t_end, c.outputs.x_max);
  const auto fan = hj::integrate_fan(init0, starts, t_end, c.characteristics.dt, c.mass,
                                     c.characteristics.record_every);
  io::write_fan(ctx.dir() / "fan.csv", fan);
  const auto report = hj::monotone_derivative_checks(fan);
  io::write_report(ctx.dir() / "fan_report.csv", report.checks);
  const auto [lo, hi] = hj::common_coverage(fan);
  ctx.say("{} paths, {} recorded times, common coverage [{:.6g}, {:.6g}]", fan.paths.size(),
          fan.times.size(), lo, hi);
  for (const auto& r : report.checks)
    if (!r.passed()) ctx.complain("FAIL {}: margin {:.3e}", r.name, r.worst_margin);
  return report.pass() ? kOk : kBoundViolation;
}

inline int run_stochastic(const RunContext& ctx) {
  const auto& c = ctx.config;
  detail::ensure_dir(ctx.dir());
  const auto init = c.initial_distribution();
  std::vector<double> times = c.stochastic.times;
  if (times.empty()) {
    const auto [n, last] = kinetic::step_plan(c.solver.t_end, c.solver.dt);
    (void)last;
    for (std::size_t i = 0; i <= n; i += c.solver.output_every)
      times.push_back(std::min(c.solver.t_end, static_cast<double>(i) * c.solver.dt));
    if (times.back() < c.solver.t_end) times.push_back(c.solver.t_end);
  }
  const auto ens = stochastic::ensemble_moments(init, c.kernel, times, c.stochastic.replicas,
                                                c.seed, c.stochastic.volume);
  io::write_ensemble(ctx.dir() / "ensemble.csv", ens);
  const auto& m = ens.mean.back();
  const auto& se = ens.stderr_.back();
  ctx.say("{} replicas, volume {:.6g}; at t = {}: m1 = {:.6g} +- {:.2g}, m2 = {:.6g} +- {:.2g}",
          ens.replicas, ens.volume, ens.times.back(), m[1], se[1], m[2], se[2]);
  return kOk;
}

// ---------------------------------------------------------------------------

/// Runs `body`, translating library exceptions to exit codes.
inline int run_guarded(const std::function<int()>& body, std::ostream& err = std::cerr) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const ArtifactMissing& e) {
    err << e.what() << '\n';
    return kMissingArtifacts;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kParseFailure;
  } catch (const SolverAbort& e) {
    err << "solver abort: " << e.what() << '\n';
    return kSolverAbort;
  } catch (const CoverageGap& e) {
    err << "coverage gap: " << e.what() << '\n';
    return kCoverageGap;
  } catch (const CharacteristicCrossing& e) {
    err << "characteristics crossed: " << e.what() << '\n';
    return kBoundViolation;
  } catch (const GridTooSmall& e) {
    err << "grid too small: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kUsage;
  } catch (const std::domain_error& e) {
    err << "invalid input: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kSolverAbort;
  }
}

}  // namespace cflab::experiment

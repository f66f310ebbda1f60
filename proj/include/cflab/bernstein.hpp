#pragma once

// Bernstein transform F(x) = sum_i (1 - exp(-x s_i)) N_i of discrete
// distributions, sampled fields of F with derivatives, complete-monotonicity
// checks and residuals of the transformed Hamilton-Jacobi equation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "cflab/core.hpp"
#include "cflab/kinetic.hpp"
#include "cflab/report.hpp"

namespace cflab::bernstein {

/// F and its x-derivatives on an x-grid at a set of times.
///
/// Arrays are row-major by time: value(ti, xi) = F[ti * nx + xi].
/// `m2_of_t` and `G_eps` are empty when the second moment is unknown (fields
/// reconstructed from characteristics).
struct BernsteinField {
  std::vector<double> x_grid;
  std::vector<double> times;
  std::vector<double> F, Fx, Fxx;
  std::vector<double> m2_of_t;
  std::vector<double> G_eps;
  double mass = 0.0;

  std::size_t nx() const { return x_grid.size(); }
  std::size_t nt() const { return times.size(); }
  std::size_t index(std::size_t ti, std::size_t xi) const { return ti * nx() + xi; }
  bool has_g() const { return !G_eps.empty(); }
};

/// {0} followed by `points - 1` geometrically spaced values on [lo, hi].
inline std::vector<double> default_x_grid(std::size_t points = 64, double lo = 1e-3,
                                          double hi = 20.0) {
  if (points < 3 || !(lo > 0.0) || !(hi > lo))
    throw std::invalid_argument("default_x_grid: need >= 3 points and 0 < lo < hi");
  std::vector<double> x{0.0};
  const double ratio = std::log(hi / lo) / static_cast<double>(points - 2);
  for (std::size_t i = 0; i + 1 < points; ++i)
    x.push_back(i + 2 == points ? hi : lo * std::exp(ratio * static_cast<double>(i)));
  return x;
}

inline void check_x_grid(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("x grid is empty");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] >= 0.0) || (i > 0 && !(x[i] > x[i - 1])))
      throw std::invalid_argument("x grid must be strictly increasing and >= 0");
}

/// G^eps = m2/2 - Fxx/2 - (m - Fx)/x, with its limit 0 at x = 0.
inline double g_eps_value(double x, double m, double m2, double Fx, double Fxx) {
  if (x == 0.0) return 0.0;
  return 0.5 * m2 - 0.5 * Fxx - (m - Fx) / x;
}

namespace detail {

inline void append_exact(BernsteinField& field, const Distribution& dist) {
  const auto& g = dist.grid();
  const double m2 = moment(dist, 2);
  for (double x : field.x_grid) {
    double F = 0.0, Fx = 0.0, Fxx = 0.0;
    for (std::size_t b = 0; b < g.bins(); ++b) {
      const double n = dist.count(b);
      if (n == 0.0) continue;
      const double s = g.size(b);
      const double e = std::exp(-x * s);
      F += -std::expm1(-x * s) * n;
      Fx += s * e * n;
      Fxx -= s * s * e * n;
    }
    field.F.push_back(F);
    field.Fx.push_back(Fx);
    field.Fxx.push_back(Fxx);
    field.G_eps.push_back(g_eps_value(x, field.mass, m2, Fx, Fxx));
  }
  field.m2_of_t.push_back(m2);
}

}  // namespace detail

/// Exact-sum transform of a single distribution at time t.
inline BernsteinField transform(const Distribution& dist, std::span<const double> x_grid,
                                double t = 0.0) {
  check_x_grid(x_grid);
  BernsteinField field;
  field.x_grid.assign(x_grid.begin(), x_grid.end());
  field.times = {t};
  field.mass = moment(dist, 1);
  detail::append_exact(field, dist);
  return field;
}

/// Exact-sum transform of every snapshot; m is the initial mass.
inline BernsteinField transform(const kinetic::Trajectory& traj, std::span<const double> x_grid) {
  check_x_grid(x_grid);
  if (traj.snapshots.empty()) throw std::invalid_argument("transform: empty trajectory");
  BernsteinField field;
  field.x_grid.assign(x_grid.begin(), x_grid.end());
  field.mass = moment(traj.snapshots.front().dist, 1);
  for (const auto& snap : traj.snapshots) {
    field.times.push_back(snap.t);
    detail::append_exact(field, snap.dist);
  }
  return field;
}

/// Three-point weights for the first and second derivative at the middle
/// of (x0, x1, x2).
struct Stencil {
  double d1[3];
  double d2[3];
};

inline Stencil stencil(double x0, double x1, double x2, std::size_t at) {
  const double h0 = x1 - x0, h1 = x2 - x1;
  Stencil s{};
  s.d2[0] = 2.0 / (h0 * (h0 + h1));
  s.d2[1] = -2.0 / (h0 * h1);
  s.d2[2] = 2.0 / (h1 * (h0 + h1));
  if (at == 0) {
    s.d1[0] = -(2.0 * h0 + h1) / (h0 * (h0 + h1));
    s.d1[1] = (h0 + h1) / (h0 * h1);
    s.d1[2] = -h0 / (h1 * (h0 + h1));
  } else if (at == 1) {
    s.d1[0] = -h1 / (h0 * (h0 + h1));
    s.d1[1] = (h1 - h0) / (h0 * h1);
    s.d1[2] = h0 / (h1 * (h0 + h1));
  } else {
    s.d1[0] = h1 / (h0 * (h0 + h1));
    s.d1[1] = -(h0 + h1) / (h0 * h1);
    s.d1[2] = (h0 + 2.0 * h1) / (h1 * (h0 + h1));
  }
  return s;
}

/// Second-order finite-difference derivative of samples y over grid g at
/// index i (one-sided at the ends).
inline double fd_first(std::span<const double> g, std::span<const double> y, std::size_t i) {
  const std::size_t n = g.size();
  const std::size_t c = i == 0 ? 1 : (i + 1 == n ? n - 2 : i);
  const std::size_t at = i == 0 ? 0 : (i + 1 == n ? 2 : 1);
  const auto s = stencil(g[c - 1], g[c], g[c + 1], at);
  return s.d1[0] * y[c - 1] + s.d1[1] * y[c] + s.d1[2] * y[c + 1];
}

inline double fd_second(std::span<const double> g, std::span<const double> y, std::size_t i) {
  const std::size_t n = g.size();
  const std::size_t c = std::clamp<std::size_t>(i, 1, n - 2);
  const auto s = stencil(g[c - 1], g[c], g[c + 1], 1);
  return s.d2[0] * y[c - 1] + s.d2[1] * y[c] + s.d2[2] * y[c + 1];
}

/// Field from sampled F values (row-major by time); Fx and Fxx by finite
/// differences in x.
inline BernsteinField field_from_samples(std::span<const double> x_grid,
                                         std::span<const double> times,
                                         std::vector<double> F, double mass) {
  check_x_grid(x_grid);
  if (x_grid.size() < 3) throw std::invalid_argument("field_from_samples: need >= 3 x points");
  if (F.size() != x_grid.size() * times.size())
    throw std::invalid_argument("field_from_samples: sample count mismatch");
  BernsteinField field;
  field.x_grid.assign(x_grid.begin(), x_grid.end());
  field.times.assign(times.begin(), times.end());
  field.mass = mass;
  field.F = std::move(F);
  const std::size_t nx = x_grid.size();
  for (std::size_t ti = 0; ti < times.size(); ++ti) {
    std::span<const double> row(field.F.data() + ti * nx, nx);
    for (std::size_t xi = 0; xi < nx; ++xi) {
      field.Fx.push_back(fd_first(x_grid, row, xi));
      field.Fxx.push_back(fd_second(x_grid, row, xi));
    }
  }
  return field;
}

/// d^k F / dx^k by exact sums: (-1)^(k-1) sum_i s_i^k exp(-x s_i) N_i.
inline double derivative(const Distribution& dist, double x, int k) {
  if (k < 1) throw std::invalid_argument("derivative: order must be >= 1");
  const auto& g = dist.grid();
  double sum = 0.0;
  for (std::size_t b = 0; b < g.bins(); ++b) {
    const double n = dist.count(b);
    if (n == 0.0) continue;
    const double s = g.size(b);
    sum += std::exp(static_cast<double>(k) * std::log(s) - x * s) * n;
  }
  return (k % 2 == 1) ? sum : -sum;
}

struct MonotonicityReport {
  int k_max = 0;
  double tolerance = 0.0;
  std::size_t checked = 0;
  std::size_t violations = 0;
  /// Smallest (-1)^(k-1) d^k F seen, with its location.
  double worst_value = std::numeric_limits<double>::infinity();
  int worst_k = 0;
  double worst_x = std::numeric_limits<double>::quiet_NaN();
  double worst_t = std::numeric_limits<double>::quiet_NaN();

  bool pass() const { return violations == 0; }

  void observe(double value, int k, double x, double t) {
    ++checked;
    if (value < -tolerance || value != value) ++violations;
    if (value < worst_value) {
      worst_value = value;
      worst_k = k;
      worst_x = x;
      worst_t = t;
    }
  }
};

inline constexpr double kExactMonotonicityTolerance = 1e-8;
inline constexpr double kSampledMonotonicityTolerance = 1e-4;
inline constexpr int kSampledMaxOrder = 4;

/// Exact-sum signs of (-1)^(k-1) d^k F for k = 1..k_max; tolerance 1e-8 m.
inline MonotonicityReport complete_monotonicity_report(const Distribution& dist, int k_max,
                                                       std::span<const double> x_samples,
                                                       double t = 0.0) {
  if (k_max < 1) throw std::invalid_argument("complete_monotonicity_report: k_max >= 1");
  MonotonicityReport rep;
  rep.k_max = k_max;
  rep.tolerance = kExactMonotonicityTolerance * moment(dist, 1);
  for (int k = 1; k <= k_max; ++k)
    for (double x : x_samples) {
      const double d = derivative(dist, x, k);
      rep.observe((k % 2 == 1) ? d : -d, k, x, t);
    }
  return rep;
}

/// Finite-difference version on a sampled field, k <= 4, tolerance 1e-4 m.
/// The k-th divided difference over k+1 consecutive points equals
/// F^(k)(xi)/k! for some xi in their span.
inline MonotonicityReport complete_monotonicity_report(const BernsteinField& field, int k_max) {
  if (k_max < 1 || k_max > kSampledMaxOrder)
    throw std::invalid_argument("complete_monotonicity_report: sampled fields allow k in 1..4");
  MonotonicityReport rep;
  rep.k_max = k_max;
  rep.tolerance = kSampledMonotonicityTolerance * field.mass;
  const std::size_t nx = field.nx();
  const auto& x = field.x_grid;
  std::vector<double> dd(nx);
  for (std::size_t ti = 0; ti < field.nt(); ++ti) {
    for (std::size_t i = 0; i < nx; ++i) dd[i] = field.F[field.index(ti, i)];
    double factorial = 1.0;
    for (int k = 1; k <= k_max; ++k) {
      factorial *= k;
      const std::size_t ku = static_cast<std::size_t>(k);
      if (nx <= ku) break;
      for (std::size_t i = 0; i + ku < nx; ++i) dd[i] = (dd[i + 1] - dd[i]) / (x[i + ku] - x[i]);
      const double sign = (k % 2 == 1) ? 1.0 : -1.0;
      for (std::size_t i = 0; i + ku < nx; ++i)
        rep.observe(sign * factorial * dd[i], k, 0.5 * (x[i] + x[i + ku]), field.times[ti]);
    }
  }
  return rep;
}

/// dF/dt per field point: centered three-point formula in the interior,
/// one-sided second order at the first and last times.
inline std::vector<double> time_derivative(const BernsteinField& field) {
  if (field.nt() < 3) throw std::invalid_argument("time_derivative: need >= 3 times");
  std::vector<double> out(field.F.size());
  std::vector<double> column(field.nt());
  for (std::size_t xi = 0; xi < field.nx(); ++xi) {
    for (std::size_t ti = 0; ti < field.nt(); ++ti) column[ti] = field.F[field.index(ti, xi)];
    for (std::size_t ti = 0; ti < field.nt(); ++ti)
      out[field.index(ti, xi)] = fd_first(field.times, column, ti);
  }
  return out;
}

/// Pointwise residual dF/dt + ½(Fx-m)(Fx-m-1) + F/x - m - eps G^eps.
/// NaN at x = 0 and at the first and last times.
inline std::vector<double> hj_residual_values(const BernsteinField& field, double m, double eps) {
  if (eps > 0.0 && !field.has_g())
    throw std::invalid_argument("hj_residual: eps > 0 needs a field with G^eps");
  const auto Ft = time_derivative(field);
  std::vector<double> out(field.F.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t ti = 1; ti + 1 < field.nt(); ++ti)
    for (std::size_t xi = 0; xi < field.nx(); ++xi) {
      const double x = field.x_grid[xi];
      if (!(x > 0.0)) continue;
      const std::size_t i = field.index(ti, xi);
      const double p = field.Fx[i];
      double r = Ft[i] + 0.5 * (p - m) * (p - m - 1.0) + field.F[i] / x - m;
      if (eps > 0.0) r -= eps * field.G_eps[i];
      out[i] = r;
    }
  return out;
}

struct ResidualSummary {
  double max_abs = 0.0;
  double t = std::numeric_limits<double>::quiet_NaN();
  double x = std::numeric_limits<double>::quiet_NaN();
};

/// Max |residual| over interior points with 0 < x <= x_max.
inline ResidualSummary hj_residual_summary(const BernsteinField& field, double m, double eps,
                                           double x_max = std::numeric_limits<double>::infinity()) {
  const auto r = hj_residual_values(field, m, eps);
  ResidualSummary s;
  for (std::size_t ti = 0; ti < field.nt(); ++ti)
    for (std::size_t xi = 0; xi < field.nx(); ++xi) {
      const double v = r[field.index(ti, xi)];
      if (v != v || field.x_grid[xi] > x_max) continue;
      if (std::abs(v) > s.max_abs) s = {std::abs(v), field.times[ti], field.x_grid[xi]};
    }
  return s;
}

inline double hj_residual(const BernsteinField& field, const ScenarioParams& scenario, double eps) {
  return hj_residual_summary(field, scenario.m, eps).max_abs;
}

/// max |G^eps| <= 3/(T* - T) (1 + 1e-2) over a field with times in [0, T].
inline BoundReport g_eps_bound_check(const BernsteinField& field, const ScenarioParams& scenario,
                                     double T) {
  if (!(T < scenario.t_star)) throw std::invalid_argument("g_eps_bound_check: T must be < T*");
  if (!field.has_g()) throw std::invalid_argument("g_eps_bound_check: field has no G^eps");
  for (double t : field.times)
    if (t < 0.0 || t > T * (1.0 + 1e-12) + 1e-15)
      throw std::invalid_argument("g_eps_bound_check: field time outside [0, T]");
  const double bound = 3.0 / (scenario.t_star - T) * (1.0 + 1e-2);
  BoundReport rep{"g_eps_bound", std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t ti = 0; ti < field.nt(); ++ti)
    for (std::size_t xi = 0; xi < field.nx(); ++xi)
      rep.observe(bound - std::abs(field.G_eps[field.index(ti, xi)]), field.times[ti],
                  field.x_grid[xi]);
  return rep;
}

}  // namespace cflab::bernstein

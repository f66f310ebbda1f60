#pragma once

// Checkers for the quantitative bounds the coagulation-fragmentation system
// is known to satisfy. Every check returns a BoundReport so callers can print
// the worst case and where it happened.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "cflab/bernstein.hpp"
#include "cflab/core.hpp"
#include "cflab/report.hpp"

namespace cflab::verify {

inline constexpr double kEnvelopeTolerance = 1e-3;
inline constexpr double kHolderTolerance = 1e-9;
inline constexpr double kDerivativeTolerance = 1e-2;

/// Upper envelope 1 / (1/m2(0) - t) for the second moment, 0 <= t < T*.
inline double second_moment_envelope(double m2_0, double t) {
  if (!(m2_0 > 0.0)) throw std::invalid_argument("second_moment_envelope: m2(0) must be > 0");
  if (!(t >= 0.0) || !(t < 1.0 / m2_0))
    throw std::domain_error("second_moment_envelope: t must lie in [0, T*)");
  return 1.0 / (1.0 / m2_0 - t);
}

/// m2(t) <= envelope (1 + 1e-3) at every series time t <= t_limit.
/// Margin is relative: 1 - m2 / envelope.
inline BoundReport envelope_check(const MomentSeries& series, double m2_0, double t_limit) {
  BoundReport rep{"second_moment_envelope", std::numeric_limits<double>::infinity(),
                  kEnvelopeTolerance};
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double t = series.times[i];
    if (t > t_limit || !(t < 1.0 / m2_0)) continue;
    rep.observe(1.0 - series.moments[i][2] / second_moment_envelope(m2_0, t), t, 2.0);
  }
  return rep;
}

/// m4 m1^2 >= m2^3 and m5 m1 >= m3^2, each to relative tolerance 1e-9.
/// x_or_k of the worst case names the moment (4 or 5) on the left side.
inline BoundReport holder_bounds_check(std::span<const double> times,
                                       std::span<const Moments> moments) {
  if (times.size() != moments.size())
    throw std::invalid_argument("holder_bounds_check: size mismatch");
  BoundReport rep{"holder_moment_bounds", std::numeric_limits<double>::infinity(),
                  kHolderTolerance};
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto& m = moments[i];
    if (!(m[1] > 0.0)) continue;
    const double rhs4 = m[2] * m[2] * m[2];
    const double rhs5 = m[3] * m[3];
    if (rhs4 > 0.0) rep.observe(m[4] * m[1] * m[1] / rhs4 - 1.0, times[i], 4.0);
    if (rhs5 > 0.0) rep.observe(m[5] * m[1] / rhs5 - 1.0, times[i], 5.0);
  }
  return rep;
}

inline BoundReport holder_bounds_check(const MomentSeries& series) {
  return holder_bounds_check(series.times, series.moments);
}

/// c_k = ½ ∫_0^1 (1 - (1-u)^k - u^k) du, the loss coefficient of the
/// fragmentation weak form with test function s^k (b = 1), obtained by
/// expanding the polynomial in u and integrating term by term.
inline double fragmentation_moment_coefficient(int k) {
  if (k < 1 || k > 30) throw std::invalid_argument("fragmentation_moment_coefficient: k in 1..30");
  // coefficients of 1 - (1-u)^k - u^k in powers of u
  std::vector<double> poly(static_cast<std::size_t>(k) + 1, 0.0);
  poly[0] = 1.0;
  double binom = 1.0;
  for (int i = 0; i <= k; ++i) {
    if (i > 0) binom = binom * (k - i + 1) / i;
    poly[static_cast<std::size_t>(i)] -= ((i % 2 == 0) ? 1.0 : -1.0) * binom;
  }
  poly[static_cast<std::size_t>(k)] -= 1.0;
  double integral = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) integral += poly[i] / static_cast<double>(i + 1);
  return 0.5 * integral;
}

inline double m3_fragmentation_coefficient() {
  static const double c = fragmentation_moment_coefficient(3);
  return c;
}

/// dm_k/dt from the moment hierarchy, k in {2, 3}:
///   k = 2: m2^2 - m3/6 - eps m4/6
///   k = 3: 3 m3 m2 - c m4 - eps c m5 with c = fragmentation_moment_coefficient(3).
inline double moment_ode_rhs(const Moments& m, double eps, int k) {
  if (k == 2) {
    const double c = fragmentation_moment_coefficient(2);
    return m[2] * m[2] - c * m[3] - eps * c * m[4];
  }
  if (k == 3) {
    const double c = m3_fragmentation_coefficient();
    return 3.0 * m[3] * m[2] - c * m[4] - eps * c * m[5];
  }
  throw std::invalid_argument("moment_ode_rhs: k must be 2 or 3");
}

/// max_{y >= 0} y^2 - (eps/6) y^3 / m^2, by Brent's method.
inline double a_priori_cap(double m, double eps) {
  if (!(eps > 0.0)) throw std::domain_error("a_priori_cap: no cap exists for eps <= 0");
  if (!(m > 0.0)) throw std::invalid_argument("a_priori_cap: m must be > 0");
  auto neg = [&](double y) { return -(y * y - eps / 6.0 * y * y * y / (m * m)); };
  // the objective is negative beyond its root 6 m^2 / eps
  const double hi = 6.0 * m * m / eps;
  std::uintmax_t iters = 200;
  const auto [y, v] = boost::math::tools::brent_find_minima(
      neg, 0.0, hi, std::numeric_limits<double>::digits / 2, iters);
  (void)y;
  return -v;
}

/// m2^2 - (eps/6) m4 <= m2^2 - (eps/6) m2^3/m^2 <= C_{eps,2} at every time.
/// Relative margin against the cap.
inline BoundReport a_priori_cap_check(const MomentSeries& series, double m, double eps) {
  const double cap = a_priori_cap(m, eps);
  BoundReport rep{"a_priori_cap", std::numeric_limits<double>::infinity(), 1e-12};
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& mm = series.moments[i];
    const double exact = mm[2] * mm[2] - eps / 6.0 * mm[4];
    const double holder = mm[2] * mm[2] - eps / 6.0 * mm[2] * mm[2] * mm[2] / (m * m);
    rep.observe(std::min(holder - exact, cap - holder) / cap, series.times[i], 2.0);
  }
  return rep;
}

/// Compares moment_ode_rhs(k) to the centered time difference of m_k along
/// the series; margin = tolerance_scale - |mismatch| / max(1, |predicted|).
inline BoundReport moment_ode_check(const MomentSeries& series, double eps, int k,
                                    double tolerance) {
  BoundReport rep{k == 2 ? "moment_ode_m2" : "moment_ode_m3",
                  std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 1; i + 1 < series.size(); ++i) {
    const double h0 = series.times[i] - series.times[i - 1];
    const double h1 = series.times[i + 1] - series.times[i];
    const double measured =
        (-h1 / (h0 * (h0 + h1))) * series.moments[i - 1][k] +
        ((h1 - h0) / (h0 * h1)) * series.moments[i][k] +
        (h0 / (h1 * (h0 + h1))) * series.moments[i + 1][k];
    const double predicted = moment_ode_rhs(series.moments[i], eps, k);
    rep.observe(tolerance - std::abs(measured - predicted) / std::max(1.0, std::abs(predicted)),
                series.times[i], static_cast<double>(k));
  }
  return rep;
}

/// m(m + 5)/2 + 3/(T* - T).
inline double time_derivative_bound(double m, double t_star, double T) {
  if (!(T < t_star)) throw std::domain_error("time_derivative_bound: T must be < T*");
  return 0.5 * m * (m + 5.0) + 3.0 / (t_star - T);
}

/// 0 <= Fx <= m, |F_t| <= m(m+5)/2 + 3/(T*-T), -1/(T*-T) <= Fxx <= 0, each
/// with relative tolerance 1e-2 (relative to m, the time bound and 1/(T*-T)).
inline std::vector<BoundReport> derivative_bounds_check(const bernstein::BernsteinField& field,
                                                        const ScenarioParams& scenario, double T) {
  if (!(T < scenario.t_star)) throw std::domain_error("derivative_bounds_check: T must be < T*");
  for (double t : field.times)
    if (t < 0.0 || t > T * (1.0 + 1e-12) + 1e-15)
      throw std::invalid_argument("derivative_bounds_check: field time outside [0, T]");
  const double m = scenario.m;
  const double curv = 1.0 / (scenario.t_star - T);
  const double tbound = time_derivative_bound(m, scenario.t_star, T);
  const double inf = std::numeric_limits<double>::infinity();

  BoundReport first{"first_derivative_bounds", inf, kDerivativeTolerance};
  BoundReport second{"second_derivative_bounds", inf, kDerivativeTolerance};
  BoundReport timeb{"time_derivative_bound", inf, kDerivativeTolerance};
  for (std::size_t ti = 0; ti < field.nt(); ++ti)
    for (std::size_t xi = 0; xi < field.nx(); ++xi) {
      const std::size_t i = field.index(ti, xi);
      const double t = field.times[ti], x = field.x_grid[xi];
      first.observe(std::min(field.Fx[i], m - field.Fx[i]) / m, t, x);
      second.observe(std::min(field.Fxx[i] + curv, -field.Fxx[i]) / curv, t, x);
    }
  if (field.nt() >= 3) {
    const auto Ft = bernstein::time_derivative(field);
    for (std::size_t ti = 0; ti < field.nt(); ++ti)
      for (std::size_t xi = 0; xi < field.nx(); ++xi)
        timeb.observe((tbound - std::abs(Ft[field.index(ti, xi)])) / tbound, field.times[ti],
                      field.x_grid[xi]);
  }
  return {first, second, timeb};
}

}  // namespace cflab::verify

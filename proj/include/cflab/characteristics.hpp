#pragma once

// Method of characteristics for the limiting Hamilton-Jacobi equation
//
//   F_t + ½(F_x - m)(F_x - m - 1) + F/x - m = 0,
//
// integrating X' = P - (m + ½), P' = Z/X² - P/X, Z' = P²/2 - Z/X + m(1-m)/2
// from X(0) = x0, P(0) = F0'(x0), Z(0) = F0(x0), and reading the solution
// back off as F(x, t) = Z(X^{-1}(x, t), t).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cflab/bernstein.hpp"
#include "cflab/error.hpp"
#include "cflab/report.hpp"

namespace cflab::hj {

inline constexpr double kPathFloor = 1e-6;

struct CharacteristicState {
  double X = 0.0;
  double P = 0.0;
  double Z = 0.0;
};

/// Closed-form initial transform F0 with slope F0'; `mass` = F0'(0) and
/// `second_moment` = -F0''(0) fix T* = 1/second_moment.
struct InitialData {
  std::function<double(double)> value;
  std::function<double(double)> slope;
  double mass = 0.0;
  double second_moment = 0.0;

  double t_star() const { return 1.0 / second_moment; }
};

/// Point mass of total mass m at size s: F0 = (m/s)(1 - exp(-s x)).
inline InitialData point_mass_initial(double mass, double size = 1.0) {
  if (!(mass > 0.0) || !(size > 0.0))
    throw std::invalid_argument("point_mass_initial: mass and size must be positive");
  return {[=](double x) { return -mass / size * std::expm1(-size * x); },
          [=](double x) { return mass * std::exp(-size * x); }, mass, mass * size};
}

/// Number density m λ² exp(-λ s): F0 = m λ x / (x + λ).
inline InitialData exponential_initial(double mass, double rate) {
  if (!(mass > 0.0) || !(rate > 0.0))
    throw std::invalid_argument("exponential_initial: mass and rate must be positive");
  return {[=](double x) { return mass * rate * x / (x + rate); },
          [=](double x) { return mass * rate * rate / ((x + rate) * (x + rate)); }, mass,
          2.0 * mass / rate};
}

/// factor * F0; scales the implied mass and second moment alike.
inline InitialData scaled(const InitialData& base, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("scaled: factor must be positive");
  auto v = base.value;
  auto s = base.slope;
  return {[=](double x) { return factor * v(x); }, [=](double x) { return factor * s(x); },
          factor * base.mass, factor * base.second_moment};
}

inline CharacteristicState char_rhs(const CharacteristicState& st, double m) {
  if (!(st.X > 0.0)) throw std::domain_error("char_rhs: characteristic reached X <= 0");
  return {st.P - (m + 0.5), st.Z / (st.X * st.X) - st.P / st.X,
          0.5 * st.P * st.P - st.Z / st.X + 0.5 * m * (1.0 - m)};
}

struct CharacteristicPath {
  double start = 0.0;
  /// One state per recorded fan time until termination.
  std::vector<CharacteristicState> states;
  bool terminated = false;
};

struct CharacteristicFan {
  std::vector<double> starts;
  std::vector<double> times;
  std::vector<CharacteristicPath> paths;
  double m = 0.0;
  double t_star = 0.0;

  /// Index of the recorded time equal to t (relative tolerance 1e-9).
  std::size_t time_index(double t) const {
    for (std::size_t k = 0; k < times.size(); ++k)
      if (std::abs(times[k] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return k;
    throw std::invalid_argument("fan has no recorded time " + std::to_string(t));
  }
};

/// `count` starts spaced geometrically on [lo, hi], dense near lo.
inline std::vector<double> geometric_starts(std::size_t count, double lo, double hi) {
  if (count < 2 || !(lo > 0.0) || !(hi > lo))
    throw std::invalid_argument("geometric_starts: need count >= 2 and 0 < lo < hi");
  std::vector<double> x(count);
  const double r = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) x[i] = lo * std::exp(r * static_cast<double>(i));
  x.back() = hi;
  return x;
}

/// Integrates every start with RK4 at step dt to t_end, recording every
/// `record_every` steps and at t_end.
inline CharacteristicFan integrate_fan(const InitialData& init, std::span<const double> starts,
                                       double t_end, double dt, double m,
                                       std::size_t record_every = 1) {
  if (!(dt > 0.0) || !(t_end >= 0.0) || record_every == 0)
    throw std::invalid_argument("integrate_fan: need dt > 0, t_end >= 0, record_every >= 1");
  if (!(t_end < init.t_star())) throw std::invalid_argument("integrate_fan: t_end must be < T*");
  if (starts.empty()) throw std::invalid_argument("integrate_fan: no starts");
  const double reach = (m + 0.5) * t_end;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (i > 0 && !(starts[i] > starts[i - 1]))
      throw std::invalid_argument("integrate_fan: starts must be strictly increasing");
    if (!(starts[i] > reach))
      throw std::invalid_argument("integrate_fan: starts must exceed (m + 1/2) t_end = " +
                                  std::to_string(reach));
    const double p = init.slope(starts[i]);
    if (p < -1e-12 * m || p > m * (1.0 + 1e-12))
      throw std::invalid_argument("integrate_fan: F0' outside [0, m] at x = " +
                                  std::to_string(starts[i]));
  }

  CharacteristicFan fan;
  fan.starts.assign(starts.begin(), starts.end());
  fan.m = m;
  fan.t_star = init.t_star();
  const auto [n_steps, last_dt] = kinetic::step_plan(t_end, dt);
  fan.times.push_back(0.0);
  for (std::size_t i = 1; i <= n_steps; ++i)
    if (i % record_every == 0 || i == n_steps)
      fan.times.push_back(i == n_steps ? t_end : static_cast<double>(i) * dt);

  fan.paths.resize(starts.size());
  for (std::size_t p = 0; p < starts.size(); ++p) {
    auto& path = fan.paths[p];
    path.start = starts[p];
    CharacteristicState y{starts[p], std::clamp(init.slope(starts[p]), 0.0, m), init.value(starts[p])};
    path.states.push_back(y);
    auto add = [](CharacteristicState a, const CharacteristicState& d, double h) {
      a.X += h * d.X;
      a.P += h * d.P;
      a.Z += h * d.Z;
      return a;
    };
    for (std::size_t i = 1; i <= n_steps; ++i) {
      const double h = (i == n_steps) ? last_dt : dt;
      const auto k1 = char_rhs(y, m);
      const auto y2 = add(y, k1, 0.5 * h);
      if (!(y2.X > kPathFloor)) { path.terminated = true; break; }
      const auto k2 = char_rhs(y2, m);
      const auto y3 = add(y, k2, 0.5 * h);
      if (!(y3.X > kPathFloor)) { path.terminated = true; break; }
      const auto k3 = char_rhs(y3, m);
      const auto y4 = add(y, k3, h);
      if (!(y4.X > kPathFloor)) { path.terminated = true; break; }
      const auto k4 = char_rhs(y4, m);
      y.X += h / 6.0 * (k1.X + 2.0 * k2.X + 2.0 * k3.X + k4.X);
      y.P += h / 6.0 * (k1.P + 2.0 * k2.P + 2.0 * k3.P + k4.P);
      y.Z += h / 6.0 * (k1.Z + 2.0 * k2.Z + 2.0 * k3.Z + k4.Z);
      if (!(y.X > kPathFloor)) { path.terminated = true; break; }
      if (i % record_every == 0 || i == n_steps) path.states.push_back(y);
    }
  }
  return fan;
}

/// Surviving paths at one recorded time, ready for interpolation.
class FanSlice {
 public:
  FanSlice(const CharacteristicFan& fan, double t) : t_(t) {
    const std::size_t k = fan.time_index(t);
    for (const auto& path : fan.paths) {
      if (path.states.size() <= k) continue;
      const auto& s = path.states[k];
      if (!X_.empty() && !(s.X > X_.back()))
        throw CharacteristicCrossing("characteristics out of order at t = " + std::to_string(t));
      X_.push_back(s.X);
      Z_.push_back(s.Z);
      P_.push_back(s.P);
    }
  }

  double lo() const { return X_.empty() ? std::numeric_limits<double>::quiet_NaN() : X_.front(); }
  double hi() const { return X_.empty() ? std::numeric_limits<double>::quiet_NaN() : X_.back(); }
  bool covers(double x) const { return !X_.empty() && x >= X_.front() && x <= X_.back(); }

  /// Cubic Hermite interpolation of Z over X with slopes P, limited
  /// (Fritsch-Carlson) so each piece stays monotone.
  double operator()(double x) const {
    if (!covers(x))
      throw CoverageGap("x = " + std::to_string(x) + " outside fan reach [" +
                            std::to_string(lo()) + ", " + std::to_string(hi()) + "] at t = " +
                            std::to_string(t_),
                        x, t_, lo(), hi());
    if (X_.size() == 1) return Z_.front();
    const auto it = std::upper_bound(X_.begin(), X_.end(), x);
    std::size_t i = static_cast<std::size_t>(it - X_.begin());
    i = std::clamp<std::size_t>(i, 1, X_.size() - 1) - 1;
    const double h = X_[i + 1] - X_[i];
    const double delta = (Z_[i + 1] - Z_[i]) / h;
    double d0 = P_[i], d1 = P_[i + 1];
    if (delta == 0.0) {
      d0 = d1 = 0.0;
    } else {
      const double a = std::max(0.0, d0 / delta), b = std::max(0.0, d1 / delta);
      const double r = a * a + b * b;
      const double scale = r > 9.0 ? 3.0 / std::sqrt(r) : 1.0;
      d0 = scale * a * delta;
      d1 = scale * b * delta;
    }
    const double u = (x - X_[i]) / h;
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * Z_[i] + (u3 - 2 * u2 + u) * h * d0 +
           (-2 * u3 + 3 * u2) * Z_[i + 1] + (u3 - u2) * h * d1;
  }

 private:
  double t_;
  std::vector<double> X_, Z_, P_;
};

inline double reconstruct(const CharacteristicFan& fan, double x, double t) {
  return FanSlice(fan, t)(x);
}

inline std::vector<double> reconstruct(const CharacteristicFan& fan, std::span<const double> x,
                                       double t) {
  const FanSlice slice(fan, t);
  std::vector<double> out;
  out.reserve(x.size());
  for (double xi : x) out.push_back(slice(xi));
  return out;
}

/// Reconstructed field on x_grid at the given recorded times.
inline bernstein::BernsteinField reconstruct_field(const CharacteristicFan& fan,
                                                   std::span<const double> x_grid,
                                                   std::span<const double> times) {
  std::vector<double> F;
  for (double t : times) {
    const auto row = reconstruct(fan, x_grid, t);
    F.insert(F.end(), row.begin(), row.end());
  }
  return bernstein::field_from_samples(x_grid, times, std::move(F), fan.m);
}

/// The x-range covered by surviving paths at every recorded time.
inline std::pair<double, double> common_coverage(const CharacteristicFan& fan) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (double t : fan.times) {
    const FanSlice slice(fan, t);
    lo = std::max(lo, slice.lo());
    hi = std::min(hi, slice.hi());
  }
  return {lo, hi};
}

struct FanReport {
  std::vector<BoundReport> checks;
  bool pass() const { return all_passed(checks); }
  const BoundReport& operator[](const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw std::out_of_range("FanReport: no check named " + name);
  }
};

inline constexpr double kMonotoneTimeTolerance = 1e-10;
inline constexpr double kSecondDifferenceTolerance = 1e-6;

/// Runtime checks of the fan's structural invariants.
inline FanReport monotone_derivative_checks(const CharacteristicFan& fan) {
  if (fan.paths.empty()) throw std::invalid_argument("monotone_derivative_checks: empty fan");
  const double m = fan.m;
  const double T = fan.times.back();
  const double inf = std::numeric_limits<double>::infinity();

  BoundReport p_monotone{"P_nondecreasing_in_time", inf, kMonotoneTimeTolerance};
  BoundReport p_range{"P_in_0_m", inf, 0.0};
  BoundReport dx_band{"dX_in_band", inf, 0.0};
  BoundReport dp_sign{"dP_nonnegative", inf, kMonotoneTimeTolerance};
  BoundReport ordering{"X_ordering", inf, 0.0};
  BoundReport slope{"secant_slope_in_0_m", inf, 0.0};
  BoundReport curvature{"second_difference_bounds", inf, kSecondDifferenceTolerance};
  BoundReport spread{"weighted_dX_dx_nondecreasing", inf, 1e-9};

  for (const auto& path : fan.paths) {
    for (std::size_t k = 0; k < path.states.size(); ++k) {
      const auto& s = path.states[k];
      const double t = fan.times[k];
      const double dX = s.P - (m + 0.5);
      p_range.observe(std::min(s.P, m - s.P), t, path.start);
      dx_band.observe(std::min(dX + (m + 0.5), -0.5 - dX), t, path.start);
      dp_sign.observe(char_rhs(s, m).P, t, path.start);
      if (k > 0) p_monotone.observe(s.P - path.states[k - 1].P, t, path.start);
    }
  }

  // cross-path checks over surviving neighbours at each recorded time
  const double rate = 1.0 / (fan.t_star - T);
  for (std::size_t k = 0; k < fan.times.size(); ++k) {
    const double t = fan.times[k];
    std::vector<std::size_t> alive;
    for (std::size_t p = 0; p < fan.paths.size(); ++p)
      if (fan.paths[p].states.size() > k) alive.push_back(p);
    for (std::size_t a = 0; a + 1 < alive.size(); ++a) {
      const auto& L = fan.paths[alive[a]];
      const auto& R = fan.paths[alive[a + 1]];
      const double gap = R.states[k].X - L.states[k].X;
      ordering.observe(gap - 1e-12, t, L.start);
      const double q = (R.states[k].Z - L.states[k].Z) / gap;
      slope.observe(std::min(q, m - q), t, L.start);
      if (k > 0 && L.states.size() > k && R.states.size() > k) {
        const double now = std::exp(t * rate) * gap / (R.start - L.start);
        const double gap0 = R.states[k - 1].X - L.states[k - 1].X;
        const double before = std::exp(fan.times[k - 1] * rate) * gap0 / (R.start - L.start);
        spread.observe((now - before) / std::max(1.0, std::abs(before)), t, L.start);
      }
      if (a + 2 < alive.size()) {
        const auto& C = fan.paths[alive[a + 2]];
        const double x0 = L.states[k].X, x1 = R.states[k].X, x2 = C.states[k].X;
        const double s01 = (R.states[k].Z - L.states[k].Z) / (x1 - x0);
        const double s12 = (C.states[k].Z - R.states[k].Z) / (x2 - x1);
        const double second = 2.0 * (s12 - s01) / (x2 - x0);
        curvature.observe(std::min(second + rate, -second), t, R.start);
      }
    }
  }
  return {{p_monotone, p_range, dx_band, dp_sign, ordering, slope, curvature, spread}};
}

/// True iff the solution from `low` stays below the one from `high`
/// (+1e-6) on their common covered range at time t.
inline bool ordering_check(const InitialData& low, const InitialData& high, double t, double m,
                           std::span<const double> starts, double dt = 1e-3,
                           std::size_t samples = 400) {
  if (samples < 2) throw std::invalid_argument("ordering_check: need >= 2 samples");
  const auto fan_low = integrate_fan(low, starts, t, dt, m);
  const auto fan_high = integrate_fan(high, starts, t, dt, m);
  const FanSlice a(fan_low, t), b(fan_high, t);
  const double lo = std::max(a.lo(), b.lo());
  const double hi = std::min(a.hi(), b.hi());
  if (!(hi > lo)) throw CoverageGap("ordering_check: fans do not overlap", lo, t, lo, hi);
  for (std::size_t i = 0; i < samples; ++i) {
    const double x =
        std::min(hi, lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(samples - 1));
    if (a(x) > b(x) + 1e-6) return false;
  }
  return true;
}

}  // namespace cflab::hj

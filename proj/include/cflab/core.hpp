#pragma once

// Domain types shared by every engine: size grid, discrete distributions,
// kernels, scenario parameters and moment time series.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cflab/error.hpp"

namespace cflab {

inline constexpr int kMaxMomentOrder = 5;
using Moments = std::array<double, kMaxMomentOrder + 1>;

/// Uniform size lattice s_j = j * ds for j = 1..bins.
///
/// Storage is 0-based: bin b holds lattice index j = b + 1.
class SizeGrid {
 public:
  SizeGrid(double ds, std::size_t bins) : ds_(ds), bins_(bins) {
    if (!(ds > 0.0) || !std::isfinite(ds))
      throw std::invalid_argument("SizeGrid: ds must be positive and finite");
    if (bins < 2) throw std::invalid_argument("SizeGrid: need at least 2 bins");
  }

  double ds() const { return ds_; }
  std::size_t bins() const { return bins_; }
  double size(std::size_t bin) const { return static_cast<double>(bin + 1) * ds_; }
  double max_size() const { return size(bins_ - 1); }

  std::vector<double> sizes() const {
    std::vector<double> s(bins_);
    for (std::size_t b = 0; b < bins_; ++b) s[b] = size(b);
    return s;
  }

  bool operator==(const SizeGrid&) const = default;

 private:
  double ds_;
  std::size_t bins_;
};

/// Number concentrations per bin on a SizeGrid. Immutable after construction.
class Distribution {
 public:
  Distribution(SizeGrid grid, std::vector<double> counts)
      : grid_(grid), counts_(std::move(counts)) {
    if (counts_.size() != grid_.bins())
      throw std::invalid_argument("Distribution: counts do not match grid");
    for (double n : counts_)
      if (!(n >= 0.0) || !std::isfinite(n))
        throw std::invalid_argument("Distribution: counts must be finite and >= 0");
  }

  static Distribution zero(SizeGrid grid) {
    return Distribution(grid, std::vector<double>(grid.bins(), 0.0));
  }

  const SizeGrid& grid() const { return grid_; }
  std::span<const double> counts() const { return counts_; }
  double count(std::size_t bin) const { return counts_[bin]; }

 private:
  SizeGrid grid_;
  std::vector<double> counts_;
};

/// k-th moment sum_i s_i^k N_i, 0 <= k <= 5.
inline double moment(const Distribution& dist, int k) {
  if (k < 0 || k > kMaxMomentOrder)
    throw std::invalid_argument("moment: order must be in 0..5");
  const auto& g = dist.grid();
  double sum = 0.0;
  for (std::size_t b = 0; b < g.bins(); ++b) {
    const double s = g.size(b);
    double sk = 1.0;
    for (int p = 0; p < k; ++p) sk *= s;
    sum += sk * dist.count(b);
  }
  return sum;
}

inline Moments all_moments(const Distribution& dist) {
  Moments m{};
  const auto& g = dist.grid();
  for (std::size_t b = 0; b < g.bins(); ++b) {
    const double s = g.size(b);
    double term = dist.count(b);
    for (int k = 0; k <= kMaxMomentOrder; ++k) {
      m[k] += term;
      term *= s;
    }
  }
  return m;
}

/// Kernel family: a(s,ŝ) = sŝ and b^eps(s,ŝ) = 1 + eps (s + ŝ), both
/// switched off for events whose combined lattice index exceeds `truncation`.
/// `fragmentation = false` gives pure coagulation (b = 0), used as a control.
struct KernelSpec {
  double frag_eps = 0.0;
  std::size_t truncation = 0;
  bool fragmentation = true;

  KernelSpec() = default;
  KernelSpec(double eps, std::size_t trunc, bool with_fragmentation = true)
      : frag_eps(eps), truncation(trunc), fragmentation(with_fragmentation) {
    if (!(eps >= 0.0) || !std::isfinite(eps))
      throw std::invalid_argument("KernelSpec: eps must be finite and >= 0");
  }
};

inline double coag_kernel(double s, double s_hat) { return s * s_hat; }

inline double frag_kernel(const KernelSpec& spec, double s, double s_hat) {
  if (!spec.fragmentation) return 0.0;
  return 1.0 + spec.frag_eps * (s + s_hat);
}

struct ScenarioParams {
  double m = 0.0;
  double m2_0 = 0.0;
  double t_star = 0.0;

  ScenarioParams() = default;
  ScenarioParams(double mass, double second_moment)
      : m(mass), m2_0(second_moment), t_star(1.0 / second_moment) {
    if (!(mass > 0.0) || !(second_moment > 0.0) || !std::isfinite(second_moment))
      throw std::invalid_argument("ScenarioParams: m and m2(0) must be positive");
  }

  /// Uses the moments of the discretized distribution, not the continuum ones.
  static ScenarioParams from_initial(const Distribution& init) {
    return ScenarioParams(moment(init, 1), moment(init, 2));
  }
};

struct MomentSeries {
  std::vector<double> times;
  std::vector<Moments> moments;
  std::vector<double> mass_drift;
  /// Mass fraction s_n N_n / m1(0) held by the top bin.
  std::vector<double> top_bin_occupancy;

  std::size_t size() const { return times.size(); }

  void append(double t, const Distribution& dist, double reference_mass) {
    if (!times.empty() && !(t > times.back()))
      throw std::invalid_argument("MomentSeries: times must be strictly increasing");
    const Moments m = all_moments(dist);
    times.push_back(t);
    moments.push_back(m);
    mass_drift.push_back(std::abs(m[1] - reference_mass) / reference_mass);
    const std::size_t top = dist.grid().bins() - 1;
    top_bin_occupancy.push_back(dist.grid().size(top) * dist.count(top) / reference_mass);
  }
};

// ---------------------------------------------------------------------------
// Initial profiles

struct Monodisperse {
  double mass = 1.0;
  double size = 1.0;
};

/// Number density mass * rate^2 * exp(-rate * s).
struct Exponential {
  double mass = 1.0;
  double rate = 1.0;
};

struct CustomDensity {
  double mass = 1.0;
  std::function<double(double)> number_density;
};

using InitialProfile = std::variant<Monodisperse, Exponential, CustomDensity>;

inline constexpr double kInitialTailTolerance = 1e-9;

namespace detail {

inline Distribution renormalized(const SizeGrid& grid, std::vector<double> counts,
                                 double mass) {
  Distribution raw(grid, counts);
  const double m1 = moment(raw, 1);
  if (!(m1 > 0.0)) throw GridTooSmall("make_initial: profile has no mass on the grid");
  for (double& n : counts) n *= mass / m1;
  return Distribution(grid, std::move(counts));
}

inline Distribution sample_density(const SizeGrid& grid,
                                   const std::function<double(double)>& rho,
                                   double mass) {
  std::vector<double> counts(grid.bins());
  for (std::size_t b = 0; b < grid.bins(); ++b)
    counts[b] = rho(grid.size(b)) * grid.ds();
  return renormalized(grid, std::move(counts), mass);
}

}  // namespace detail

/// Discretizes an initial profile; the result carries exactly the requested
/// mass (to rounding) after renormalization.
inline Distribution make_initial(const InitialProfile& profile, const SizeGrid& grid) {
  const double ds = grid.ds();
  const double top = grid.max_size();

  if (const auto* p = std::get_if<Monodisperse>(&profile)) {
    if (!(p->mass > 0.0)) throw std::invalid_argument("make_initial: mass must be positive");
    const double j = p->size / ds;
    const double jr = std::round(j);
    if (jr < 1.0 || std::abs(j - jr) > 1e-9 * std::max(1.0, j))
      throw GridTooSmall("make_initial: monodisperse size is not a lattice point");
    if (jr > static_cast<double>(grid.bins()))
      throw GridTooSmall("make_initial: monodisperse size beyond the top bin");
    std::vector<double> counts(grid.bins(), 0.0);
    counts[static_cast<std::size_t>(jr) - 1] = p->mass / grid.size(static_cast<std::size_t>(jr) - 1);
    return detail::renormalized(grid, std::move(counts), p->mass);
  }

  if (const auto* p = std::get_if<Exponential>(&profile)) {
    if (!(p->mass > 0.0) || !(p->rate > 0.0))
      throw std::invalid_argument("make_initial: mass and rate must be positive");
    const double u = p->rate * top;
    if ((1.0 + u) * std::exp(-u) > kInitialTailTolerance)
      throw GridTooSmall("make_initial: exponential tail exceeds the grid");
    const double lam = p->rate;
    return detail::sample_density(
        grid, [&](double s) { return lam * lam * std::exp(-lam * s); }, p->mass);
  }

  const auto& p = std::get<CustomDensity>(profile);
  if (!(p.mass > 0.0)) throw std::invalid_argument("make_initial: mass must be positive");
  if (!p.number_density) throw std::invalid_argument("make_initial: empty density");
  using Quad = boost::math::quadrature::gauss_kronrod<double, 61>;
  auto mass_density = [&](double s) { return s * p.number_density(s); };
  const double inf = std::numeric_limits<double>::infinity();
  const double total = Quad::integrate(mass_density, 0.0, inf, 15);
  const double tail = Quad::integrate(mass_density, top, inf, 15);
  if (!(total > 0.0)) throw std::invalid_argument("make_initial: density has no mass");
  if (tail > kInitialTailTolerance * total)
    throw GridTooSmall("make_initial: custom density tail exceeds the grid");
  return detail::sample_density(grid, p.number_density, p.mass);
}

}  // namespace cflab

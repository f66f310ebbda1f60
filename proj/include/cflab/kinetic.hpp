#pragma once

// Deterministic solver for the truncated coagulation-fragmentation system on
// the uniform size lattice.
//
// Coagulation of lattice indices i and j produces i + j and is suppressed when
// i + j exceeds the truncation index. A parent j >= 2 splits into (k, j - k)
// for every k = 1..j-1 at rate ½·ds·b^eps(s_k, s_{j-k}) per ordered k, so
// both rate terms conserve sum_j s_j N_j exactly.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cflab/core.hpp"
#include "cflab/error.hpp"

namespace cflab::kinetic {

inline constexpr double kNegativeCountTolerance = 1e-12;
inline constexpr double kMassDriftTolerance = 1e-6;
inline constexpr double kTopBinTolerance = 1e-9;

struct SolverConfig {
  double dt = 1e-3;
  double t_end = 0.0;
  std::size_t output_every = 1;
  KernelSpec spec;
  ScenarioParams scenario;
};

/// 0.1 / max_i [s_i m + ½ s_i (1 + eps s_i)]: bound on the fastest per-bin
/// loss rate, evaluated at the largest size.
inline double stability_limit(const SizeGrid& grid, const KernelSpec& spec, double mass) {
  const double s = grid.max_size();
  const double frag = spec.fragmentation ? 0.5 * s * (1.0 + spec.frag_eps * s) : 0.0;
  return 0.1 / (s * mass + frag);
}

namespace detail {

inline std::size_t active_bins(const SizeGrid& grid, const KernelSpec& spec) {
  return std::min(grid.bins(), spec.truncation == 0 ? grid.bins() : spec.truncation);
}

/// Reusable workspace for the combined right-hand side.
class RateEvaluator {
 public:
  RateEvaluator(const SizeGrid& grid, const KernelSpec& spec)
      : grid_(grid), spec_(spec), n_(active_bins(grid, spec)),
        u_(grid.bins()), prefix_(grid.bins() + 1), suffix_(grid.bins() + 2) {}

  void coagulation(std::span<const double> N, std::span<double> out) {
    const std::size_t nb = grid_.bins();
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t b = 0; b < nb; ++b) u_[b] = grid_.size(b) * N[b];
    prefix_[0] = 0.0;
    for (std::size_t b = 0; b < nb; ++b) prefix_[b + 1] = prefix_[b] + u_[b];
    // lattice k = b + 1 gains from pairs (i, k - i); loses against j <= n - k.
    for (std::size_t b = 0; b < n_; ++b) {
      double gain = 0.0;
      for (std::size_t a = 0; a < b; ++a) gain += u_[a] * u_[b - 1 - a];
      const std::size_t partners = n_ - (b + 1);
      out[b] = 0.5 * gain - u_[b] * prefix_[partners];
    }
  }

  void fragmentation(std::span<const double> N, std::span<double> out) {
    const double ds = grid_.ds();
    const double eps = spec_.frag_eps;
    std::fill(out.begin(), out.end(), 0.0);
    if (!spec_.fragmentation) return;
    // suffix_[j] = sum_{j' >= j, j' <= n} b_j' N_j' over lattice indices.
    suffix_[n_ + 1] = 0.0;
    for (std::size_t j = n_; j >= 1; --j)
      suffix_[j] = suffix_[j + 1] + (1.0 + eps * grid_.size(j - 1)) * N[j - 1];
    for (std::size_t j = 1; j <= n_; ++j) {
      const double bj = 1.0 + eps * grid_.size(j - 1);
      const double loss = 0.5 * ds * static_cast<double>(j - 1) * bj * N[j - 1];
      out[j - 1] = ds * suffix_[j + 1] - loss;
    }
  }

  void combined(std::span<const double> N, std::span<double> out) {
    if (tmp_.size() != out.size()) tmp_.assign(out.size(), 0.0);
    coagulation(N, out);
    fragmentation(N, tmp_);
    for (std::size_t b = 0; b < out.size(); ++b) out[b] += tmp_[b];
  }

 private:
  SizeGrid grid_;
  KernelSpec spec_;
  std::size_t n_;
  std::vector<double> u_, prefix_, suffix_, tmp_;
};

}  // namespace detail

inline std::vector<double> coagulation_rhs(const Distribution& dist, const KernelSpec& spec) {
  std::vector<double> out(dist.grid().bins());
  detail::RateEvaluator(dist.grid(), spec).coagulation(dist.counts(), out);
  return out;
}

inline std::vector<double> fragmentation_rhs(const Distribution& dist, const KernelSpec& spec) {
  std::vector<double> out(dist.grid().bins());
  detail::RateEvaluator(dist.grid(), spec).fragmentation(dist.counts(), out);
  return out;
}

/// Classical RK4 integrator for the combined rate, holding its workspace.
class Integrator {
 public:
  Integrator(const SizeGrid& grid, const KernelSpec& spec)
      : rates_(grid, spec), k1_(grid.bins()), k2_(grid.bins()),
        k3_(grid.bins()), k4_(grid.bins()), stage_(grid.bins()) {}

  /// Advances `N` in place by `dt`. Throws SolverAbort on a negative count
  /// below -1e-12 max(N) or a non-finite value; smaller negatives are clipped.
  void advance(std::vector<double>& N, double dt, double t_now) {
    if (dt == 0.0) return;
    const std::size_t nb = N.size();
    const double scale = *std::max_element(N.begin(), N.end());
    rates_.combined(N, k1_);
    for (std::size_t b = 0; b < nb; ++b) stage_[b] = N[b] + 0.5 * dt * k1_[b];
    rates_.combined(stage_, k2_);
    for (std::size_t b = 0; b < nb; ++b) stage_[b] = N[b] + 0.5 * dt * k2_[b];
    rates_.combined(stage_, k3_);
    for (std::size_t b = 0; b < nb; ++b) stage_[b] = N[b] + dt * k3_[b];
    rates_.combined(stage_, k4_);
    const double floor = -kNegativeCountTolerance * scale;
    // Build the update in stage_ and commit only if every bin is acceptable.
    for (std::size_t b = 0; b < nb; ++b) {
      const double next = N[b] + dt / 6.0 * (k1_[b] + 2.0 * k2_[b] + 2.0 * k3_[b] + k4_[b]);
      if (!std::isfinite(next))
        throw SolverAbort("non-finite count at t=" + std::to_string(t_now + dt) +
                              " in bin " + std::to_string(b),
                          t_now + dt, b, next);
      if (next < floor)
        throw SolverAbort("negative count " + std::to_string(next) + " at t=" +
                              std::to_string(t_now + dt) + " in bin " + std::to_string(b) +
                              " (dt too large?)",
                          t_now + dt, b, next);
      stage_[b] = next < 0.0 ? 0.0 : next;
    }
    N.swap(stage_);
  }

 private:
  detail::RateEvaluator rates_;
  std::vector<double> k1_, k2_, k3_, k4_, stage_;
};

inline Distribution step(const Distribution& dist, const SolverConfig& config) {
  if (!(config.dt >= 0.0)) throw std::invalid_argument("step: dt must be >= 0");
  std::vector<double> N(dist.counts().begin(), dist.counts().end());
  Integrator(dist.grid(), config.spec).advance(N, config.dt, 0.0);
  return Distribution(dist.grid(), std::move(N));
}

struct Snapshot {
  double t;
  Distribution dist;
};

struct Trajectory {
  KernelSpec spec;
  std::vector<Snapshot> snapshots;
  MomentSeries moments;
  double max_mass_drift = 0.0;
  double max_top_bin_occupancy = 0.0;
  bool mass_drift_flagged = false;
  bool truncation_flagged = false;
};

/// Number of steps and the length of the final step for (t_end, dt).
inline std::pair<std::size_t, double> step_plan(double t_end, double dt) {
  if (t_end == 0.0) return {0, 0.0};
  const double ratio = t_end / dt;
  const double whole = std::round(ratio);
  if (std::abs(ratio - whole) <= 1e-9 * std::max(1.0, ratio))
    return {static_cast<std::size_t>(whole), dt};
  const auto n = static_cast<std::size_t>(std::ceil(ratio));
  return {n, t_end - static_cast<double>(n - 1) * dt};
}

/// Integrates to config.t_end, recording a snapshot every `output_every`
/// steps and at the final time.
inline Trajectory simulate(const SolverConfig& config, const Distribution& initial) {
  if (!(config.dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
  if (!(config.t_end >= 0.0)) throw std::invalid_argument("simulate: t_end must be >= 0");
  if (config.output_every == 0) throw std::invalid_argument("simulate: output_every must be >= 1");

  Trajectory traj;
  traj.spec = config.spec;
  const double m_ref = moment(initial, 1);
  auto record = [&](double t, const Distribution& d) {
    traj.snapshots.push_back({t, d});
    traj.moments.append(t, d, m_ref);
    traj.max_mass_drift = std::max(traj.max_mass_drift, traj.moments.mass_drift.back());
    traj.max_top_bin_occupancy =
        std::max(traj.max_top_bin_occupancy, traj.moments.top_bin_occupancy.back());
  };
  record(0.0, initial);

  const auto [n_steps, last_dt] = step_plan(config.t_end, config.dt);
  Integrator integrator(initial.grid(), config.spec);
  std::vector<double> N(initial.counts().begin(), initial.counts().end());
  double t = 0.0;
  for (std::size_t i = 1; i <= n_steps; ++i) {
    const double h = (i == n_steps) ? last_dt : config.dt;
    integrator.advance(N, h, t);
    t = (i == n_steps) ? config.t_end : static_cast<double>(i) * config.dt;
    if (i % config.output_every == 0 || i == n_steps) record(t, Distribution(initial.grid(), N));
  }
  traj.mass_drift_flagged = traj.max_mass_drift > kMassDriftTolerance;
  traj.truncation_flagged = traj.max_top_bin_occupancy > kTopBinTolerance;
  return traj;
}

/// Right side of the discrete weak form for test function phi: the truncated
/// coagulation double sum plus the fragmentation pair sum with weight ds.
inline double weak_form_rhs(const Distribution& dist, const KernelSpec& spec,
                            const std::function<double(double)>& phi) {
  const auto& g = dist.grid();
  const std::size_t n = detail::active_bins(g, spec);
  std::vector<double> ph(g.bins() + 1, 0.0);
  for (std::size_t j = 1; j <= g.bins(); ++j) ph[j] = phi(g.size(j - 1));
  const auto N = dist.counts();

  double coag = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (N[i - 1] == 0.0) continue;
    for (std::size_t j = 1; i + j <= n; ++j)
      coag += (ph[i + j] - ph[i] - ph[j]) * coag_kernel(g.size(i - 1), g.size(j - 1)) *
              N[i - 1] * N[j - 1];
  }
  double frag = 0.0;
  for (std::size_t j = 2; j <= n; ++j) {
    if (N[j - 1] == 0.0) continue;
    double inner = 0.0;
    for (std::size_t k = 1; k < j; ++k)
      inner += (ph[j] - ph[j - k] - ph[k]) * frag_kernel(spec, g.size(j - k - 1), g.size(k - 1));
    frag += inner * N[j - 1];
  }
  return 0.5 * coag - 0.5 * g.ds() * frag;
}

/// Max over interior snapshots of |d/dt sum phi(s_i) N_i - weak_form_rhs|,
/// the time derivative taken by the second-order three-point formula.
inline double weak_form_residual(const Trajectory& traj,
                                 const std::function<double(double)>& phi) {
  const auto& snaps = traj.snapshots;
  if (snaps.size() < 3) throw std::invalid_argument("weak_form_residual: need >= 3 snapshots");
  if (std::abs(phi(0.0)) > 1e-14) throw std::invalid_argument("weak_form_residual: phi(0) != 0");

  std::vector<double> pairing(snaps.size());
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const auto& d = snaps[i].dist;
    double sum = 0.0;
    for (std::size_t b = 0; b < d.grid().bins(); ++b) sum += phi(d.grid().size(b)) * d.count(b);
    pairing[i] = sum;
  }
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < snaps.size(); ++i) {
    const double h0 = snaps[i].t - snaps[i - 1].t;
    const double h1 = snaps[i + 1].t - snaps[i].t;
    const double deriv = (-h1 / (h0 * (h0 + h1))) * pairing[i - 1] +
                         ((h1 - h0) / (h0 * h1)) * pairing[i] +
                         (h0 / (h1 * (h0 + h1))) * pairing[i + 1];
    const double rhs = weak_form_rhs(snaps[i].dist, traj.spec, phi);
    worst = std::max(worst, std::abs(deriv - rhs));
  }
  return worst;
}

}  // namespace cflab::kinetic

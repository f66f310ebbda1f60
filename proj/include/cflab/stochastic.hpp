#pragma once

// Marcus-Lushnikov particle simulation of the same lattice system the kinetic
// solver integrates: pair merges at rate s_i s_j / V (suppressed above the
// truncation index) and binary splits of a size-j particle into (k, j - k),
// k uniform in 1..j-1, at total rate ½·ds·(j-1)·(1 + eps s_j).

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "cflab/core.hpp"
#include "cflab/error.hpp"
#include "cflab/parallel.hpp"

namespace cflab::stochastic {

enum class EventKind { coagulation, fragmentation, suppressed };

struct EventRates {
  double coagulation = 0.0;
  double fragmentation = 0.0;
  double total() const { return coagulation + fragmentation; }
};

/// Finite particle system in volume V; particle sizes are lattice indices.
class ParticleSystem {
 public:
  ParticleSystem(double ds, std::size_t bins, double volume,
                 std::vector<std::int32_t> lattice_sizes, std::uint64_t seed)
      : ds_(ds), bins_(bins), volume_(volume), rng_(seed), seed_(seed),
        hist_(bins + 1, 0) {
    if (!(ds > 0.0) || !(volume > 0.0))
      throw std::invalid_argument("ParticleSystem: ds and volume must be positive");
    for (auto j : lattice_sizes) add(j);
  }

  /// Rounds V * N_i to whole particles per bin.
  ParticleSystem(const Distribution& init, double volume, std::uint64_t seed)
      : ParticleSystem(init.grid().ds(), init.grid().bins(), volume, {}, seed) {
    for (std::size_t b = 0; b < init.grid().bins(); ++b) {
      const auto copies = std::llround(volume * init.count(b));
      for (long long c = 0; c < copies; ++c) add(static_cast<std::int32_t>(b + 1));
    }
  }

  double ds() const { return ds_; }
  std::size_t bins() const { return bins_; }
  double volume() const { return volume_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t particle_count() const { return particles_.size(); }
  std::span<const std::int32_t> particles() const { return particles_; }
  std::int64_t lattice_mass() const { return sum_j_; }

  /// (1/V) sum s^k over particles.
  double moment(int k) const {
    double sum = 0.0;
    for (std::size_t j = 1; j < hist_.size(); ++j) {
      if (hist_[j] == 0) continue;
      sum += static_cast<double>(hist_[j]) * std::pow(static_cast<double>(j) * ds_, k);
    }
    return sum / volume_;
  }

  Distribution to_distribution() const {
    std::vector<double> counts(bins_, 0.0);
    for (std::size_t j = 1; j <= bins_; ++j) counts[j - 1] = static_cast<double>(hist_[j]) / volume_;
    return Distribution(SizeGrid(ds_, bins_), std::move(counts));
  }

  /// Exact rates: truncated pair sum for coagulation.
  EventRates rates(const KernelSpec& spec) const {
    if (particles_.empty()) throw std::invalid_argument("event_rates: empty system");
    const std::size_t n = truncation(spec);
    std::vector<std::size_t> present;
    for (std::size_t j = 1; j < hist_.size(); ++j)
      if (hist_[j] > 0) present.push_back(j);
    double coag = 0.0;
    for (std::size_t a = 0; a < present.size(); ++a) {
      const double ja = static_cast<double>(present[a]);
      const double ca = static_cast<double>(hist_[present[a]]);
      if (2 * present[a] <= n) coag += 0.5 * ca * (ca - 1.0) * ja * ja;
      for (std::size_t b = a + 1; b < present.size() && present[a] + present[b] <= n; ++b)
        coag += ca * static_cast<double>(hist_[present[b]]) * ja * static_cast<double>(present[b]);
    }
    return {coag * ds_ * ds_ / volume_, fragmentation_rate(spec)};
  }

  /// Samples the waiting time to the next (possibly suppressed) event.
  double next_waiting_time(const KernelSpec& spec) {
    const double total = coagulation_upper_rate() + fragmentation_rate(spec);
    if (!(total > 0.0)) throw AbsorbingState("gillespie_step: total event rate is zero");
    return -std::log(1.0 - uniform()) / total;
  }

  /// Applies one event chosen proportionally to the thinned rates.
  EventKind fire(const KernelSpec& spec) {
    const double coag = coagulation_upper_rate();
    const double frag = fragmentation_rate(spec);
    if (!(coag + frag > 0.0)) throw AbsorbingState("gillespie_step: total event rate is zero");
    if (uniform() * (coag + frag) < coag) {
      std::size_t a, b;
      do {
        a = pick_by_size();
        b = pick_by_size();
      } while (a == b);
      const std::int32_t merged = particles_[a] + particles_[b];
      if (static_cast<std::size_t>(merged) > truncation(spec)) return EventKind::suppressed;
      remove_at(std::max(a, b));
      remove_at(std::min(a, b));
      add(merged);
      return EventKind::coagulation;
    }
    const std::size_t p = pick_for_split(spec);
    const std::int32_t parent = particles_[p];
    const auto k = static_cast<std::int32_t>(1 + uniform_index(static_cast<std::size_t>(parent - 1)));
    remove_at(p);
    add(k);
    add(parent - k);
    return EventKind::fragmentation;
  }

  /// Waiting time then event; returns the waiting time.
  double step(const KernelSpec& spec, EventKind* kind = nullptr) {
    const double dt = next_waiting_time(spec);
    const EventKind k = fire(spec);
    if (kind) *kind = k;
    return dt;
  }

 private:
  std::size_t truncation(const KernelSpec& spec) const {
    return spec.truncation == 0 ? bins_ : std::min(bins_, spec.truncation);
  }

  // Upper bound over all distinct pairs, ignoring truncation; suppressed
  // merges thin it back to the truncated rate.
  double coagulation_upper_rate() const {
    const double sj = static_cast<double>(sum_j_);
    const double sj2 = static_cast<double>(sum_j2_);
    return ds_ * ds_ * (sj * sj - sj2) / (2.0 * volume_);
  }

  double fragmentation_rate(const KernelSpec& spec) const {
    if (!spec.fragmentation) return 0.0;
    const double count = static_cast<double>(particles_.size());
    const double sj = static_cast<double>(sum_j_);
    const double sj2 = static_cast<double>(sum_j2_);
    return 0.5 * ds_ * ((sj - count) + spec.frag_eps * ds_ * (sj2 - sj));
  }

  double split_weight(std::int32_t j, const KernelSpec& spec) const {
    return static_cast<double>(j - 1) * (1.0 + spec.frag_eps * ds_ * static_cast<double>(j));
  }

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::size_t uniform_index(std::size_t n) {
    const auto i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  std::size_t pick_by_size() {
    const double top = static_cast<double>(max_j());
    for (;;) {
      const std::size_t i = uniform_index(particles_.size());
      if (uniform() * top < static_cast<double>(particles_[i])) return i;
    }
  }

  std::size_t pick_for_split(const KernelSpec& spec) {
    const double top = split_weight(max_j(), spec);
    for (;;) {
      const std::size_t i = uniform_index(particles_.size());
      if (uniform() * top < split_weight(particles_[i], spec)) return i;
    }
  }

  std::int32_t max_j() {
    while (max_ > 0 && hist_[static_cast<std::size_t>(max_)] == 0) --max_;
    return max_;
  }

  void add(std::int32_t j) {
    if (j < 1 || static_cast<std::size_t>(j) > bins_)
      throw std::invalid_argument("ParticleSystem: particle size outside the lattice");
    particles_.push_back(j);
    ++hist_[static_cast<std::size_t>(j)];
    sum_j_ += j;
    sum_j2_ += static_cast<std::int64_t>(j) * j;
    if (j > max_) max_ = j;
  }

  void remove_at(std::size_t i) {
    const std::int32_t j = particles_[i];
    particles_[i] = particles_.back();
    particles_.pop_back();
    --hist_[static_cast<std::size_t>(j)];
    sum_j_ -= j;
    sum_j2_ -= static_cast<std::int64_t>(j) * j;
  }

  double ds_;
  std::size_t bins_;
  double volume_;
  std::mt19937_64 rng_;
  std::uint64_t seed_;
  std::vector<std::int32_t> particles_;
  std::vector<std::int64_t> hist_;
  std::int64_t sum_j_ = 0;
  std::int64_t sum_j2_ = 0;
  std::int32_t max_ = 0;
};

inline EventRates event_rates(const ParticleSystem& sys, const KernelSpec& spec) {
  return sys.rates(spec);
}

/// Functional single step: returns the advanced copy and the waiting time.
inline std::pair<ParticleSystem, double> gillespie_step(ParticleSystem sys, const KernelSpec& spec) {
  const double dt = sys.step(spec);
  return {std::move(sys), dt};
}

/// Per-replica stream seed derived from (seed, replica).
inline std::uint64_t replica_seed(std::uint64_t seed, std::uint64_t replica) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline constexpr double kDefaultParticleCount = 1e4;

/// Volume giving roughly 10^4 initial particles.
inline double default_volume(const Distribution& init) {
  return kDefaultParticleCount / cflab::moment(init, 0);
}

struct EnsembleMoments {
  std::vector<double> times;
  std::vector<std::array<double, 4>> mean;
  std::vector<std::array<double, 4>> stderr_;
  std::size_t replicas = 0;
  double volume = 0.0;
};

/// Runs one replica and records (1/V) sum s^k, k = 0..3, at each grid time.
inline std::vector<std::array<double, 4>> run_replica(ParticleSystem sys, const KernelSpec& spec,
                                                      std::span<const double> t_grid) {
  std::vector<std::array<double, 4>> out;
  out.reserve(t_grid.size());
  std::size_t next = 0;
  auto record_until = [&](double horizon) {
    while (next < t_grid.size() && t_grid[next] < horizon) {
      out.push_back({sys.moment(0), sys.moment(1), sys.moment(2), sys.moment(3)});
      ++next;
    }
  };
  double t = 0.0;
  while (next < t_grid.size()) {
    double wait = 0.0;
    try {
      wait = sys.next_waiting_time(spec);
    } catch (const AbsorbingState&) {
      record_until(std::numeric_limits<double>::infinity());
      break;
    }
    record_until(t + wait);
    if (next == t_grid.size()) break;
    sys.fire(spec);
    t += wait;
  }
  return out;
}

/// Ensemble statistics over replicas seeded explicitly, one seed per replica.
inline EnsembleMoments ensemble_moments_with_seeds(const Distribution& init, const KernelSpec& spec,
                                                   std::span<const double> t_grid,
                                                   std::span<const std::uint64_t> seeds,
                                                   double volume = 0.0, unsigned threads = 0) {
  if (seeds.size() < 2) throw std::invalid_argument("ensemble_moments: need >= 2 replicas");
  for (std::size_t i = 0; i < t_grid.size(); ++i)
    if (!(t_grid[i] >= 0.0) || (i > 0 && t_grid[i] < t_grid[i - 1]))
      throw std::invalid_argument("ensemble_moments: t_grid must be nondecreasing and >= 0");
  if (volume <= 0.0) volume = default_volume(init);

  std::vector<std::vector<std::array<double, 4>>> per_replica(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t r) {
    per_replica[r] = run_replica(ParticleSystem(init, volume, seeds[r]), spec, t_grid);
  });

  EnsembleMoments result;
  result.times.assign(t_grid.begin(), t_grid.end());
  result.replicas = seeds.size();
  result.volume = volume;
  const double R = static_cast<double>(seeds.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    // Accumulate deviations from the first replica so that identical
    // replicas give exactly their common value and a zero standard error.
    std::array<double, 4> mean{}, se{};
    const auto& ref = per_replica.front()[i];
    for (int k = 0; k < 4; ++k) {
      double shift = 0.0;
      for (const auto& rep : per_replica) shift += (rep[i][k] - ref[k]) / R;
      double ss = 0.0;
      for (const auto& rep : per_replica) {
        const double d = rep[i][k] - ref[k] - shift;
        ss += d * d;
      }
      mean[k] = ref[k] + shift;
      se[k] = std::sqrt(ss / (R - 1.0)) / std::sqrt(R);
    }
    result.mean.push_back(mean);
    result.stderr_.push_back(se);
  }
  return result;
}

/// Mean and standard error of m0..m3 over `replicas` independent runs.
inline EnsembleMoments ensemble_moments(const Distribution& init, const KernelSpec& spec,
                                        std::span<const double> t_grid, std::size_t replicas,
                                        std::uint64_t seed, double volume = 0.0,
                                        unsigned threads = 0) {
  std::vector<std::uint64_t> seeds(replicas);
  for (std::size_t r = 0; r < replicas; ++r) seeds[r] = replica_seed(seed, r);
  return ensemble_moments_with_seeds(init, spec, t_grid, seeds, volume, threads);
}

}  // namespace cflab::stochastic

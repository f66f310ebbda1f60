#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <random>
#include <vector>

#include "cflab/core.hpp"

namespace cflab::testing {

/// Random nonnegative distribution, roughly `fill` of its bins occupied.
inline Distribution random_distribution(std::mt19937_64& rng, const SizeGrid& grid,
                                        double fill = 0.5) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> counts(grid.bins(), 0.0);
  for (auto& n : counts)
    if (u(rng) < fill) n = u(rng);
  counts[0] += 0.1;  // never empty
  return Distribution(grid, std::move(counts));
}

/// Random distribution with no occupied bin above `top` (1-based lattice index).
inline Distribution random_below(std::mt19937_64& rng, const SizeGrid& grid, std::size_t top) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> counts(grid.bins(), 0.0);
  for (std::size_t b = 0; b < top && b < grid.bins(); ++b) counts[b] = u(rng);
  return Distribution(grid, std::move(counts));
}

inline Distribution point_mass(const SizeGrid& grid, std::size_t lattice_index, double count) {
  std::vector<double> counts(grid.bins(), 0.0);
  counts.at(lattice_index - 1) = count;
  return Distribution(grid, std::move(counts));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cflab-" + tag + "-" + std::to_string(std::random_device{}()) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

}  // namespace cflab::testing

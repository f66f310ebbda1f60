#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

namespace cflab {

/// Outcome of one quantitative check.
///
/// `worst_margin` is the signed distance to the bound at the worst sample
/// (positive means satisfied). The check fails iff
/// `worst_margin < -tolerance` or the margin is NaN. `t` and `x_or_k` locate the worst sample;
/// NaN when the location has no meaning for the check.
struct BoundReport {
  std::string name;
  double worst_margin = std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  double t = std::numeric_limits<double>::quiet_NaN();
  double x_or_k = std::numeric_limits<double>::quiet_NaN();

  // A NaN margin never passes.
  bool passed() const { return worst_margin >= -tolerance; }

  /// Records a sample; keeps it if it is the worst so far.
  void observe(double margin, double at_t, double at_x) {
    if (worst_margin != worst_margin) return;
    if (margin < worst_margin || margin != margin) {
      worst_margin = margin;
      t = at_t;
      x_or_k = at_x;
    }
  }
};

inline bool all_passed(const std::vector<BoundReport>& reports) {
  return std::all_of(reports.begin(), reports.end(),
                     [](const BoundReport& r) { return r.passed(); });
}

}  // namespace cflab

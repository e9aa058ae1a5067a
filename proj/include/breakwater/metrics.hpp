#pragma once

#include <span>
#include <vector>

namespace breakwater {

// One point in objective space; both coordinates are minimized.
struct ObjectivePoint {
  double cost = 0;
  double wh = 0;
  bool operator==(const ObjectivePoint&) const = default;
};

// Strict Pareto dominance: a is no worse in both objectives and strictly
// better in at least one.
bool dominates(const ObjectivePoint& a, const ObjectivePoint& b);

// Indices of the nondominated members of `points` (first occurrence wins
// among exact duplicates), in increasing index order.
std::vector<size_t> nondominated_indices(std::span<const ObjectivePoint> points);

// Exact 2-D hypervolume of the region dominated by `points` and bounded by
// `reference`. Points with any coordinate >= the reference are clipped out;
// duplicates and dominated points contribute nothing. Empty set -> 0.
double hypervolume(std::span<const ObjectivePoint> points,
                   ObjectivePoint reference);

struct Efficiency {
  double cost_pct = 0;  // mean of (cost_pred / cost_baseline - 1) * 100
  double wh_pct = 0;    // mean of (wh_pred / wh_baseline - 1) * 100
};

// Archive-vs-baseline efficiency. For each predicted point the baseline
// point with the nearest wh (resp. nearest cost) is matched; ties pick the
// earlier baseline point. Throws std::runtime_error on an empty archive.
Efficiency efficiency(std::span<const ObjectivePoint> archive_pred,
                      std::span<const ObjectivePoint> archive_baseline);

// One sample of a run trace: cumulative real-model evaluations and the
// archive hypervolume right after they were spent.
struct TraceSample {
  long real_evals = 0;
  double hv = 0;
};

// Nearest-rank quantile of the traces' hypervolume, evaluated on the sorted
// union of all real-eval counts with step ("last value carried forward")
// interpolation; before a trace's first sample its value counts as 0.
std::vector<TraceSample> quantile_trace(
    const std::vector<std::vector<TraceSample>>& traces, double q);

double nearest_rank_quantile(std::vector<double> values, double q);

}  // namespace breakwater

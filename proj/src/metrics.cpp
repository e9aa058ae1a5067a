#include "breakwater/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace breakwater {

bool dominates(const ObjectivePoint& a, const ObjectivePoint& b) {
  if (a.cost > b.cost || a.wh > b.wh) return false;
  return a.cost < b.cost || a.wh < b.wh;
}

std::vector<size_t> nondominated_indices(
    std::span<const ObjectivePoint> points) {
  std::vector<size_t> keep;
  for (size_t i = 0; i < points.size(); ++i) {
    bool out = false;
    for (size_t j = 0; j < points.size() && !out; ++j) {
      if (j == i) continue;
      if (dominates(points[j], points[i])) out = true;
      // exact duplicate: keep only the first occurrence
      if (points[j] == points[i] && j < i) out = true;
    }
    if (!out) keep.push_back(i);
  }
  return keep;
}

double hypervolume(std::span<const ObjectivePoint> points,
                   ObjectivePoint reference) {
  std::vector<ObjectivePoint> pts;
  for (const auto& p : points)
    if (p.cost < reference.cost && p.wh < reference.wh) pts.push_back(p);
  if (pts.empty()) return 0.0;

  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    return a.wh < b.wh;
  });
  // Nondominated staircase: cost strictly ascending, wh strictly descending.
  std::vector<ObjectivePoint> front;
  for (const auto& p : pts)
    if (front.empty() || p.wh < front.back().wh) front.push_back(p);

  double hv = 0;
  for (size_t i = 0; i < front.size(); ++i) {
    const double next_cost =
        (i + 1 < front.size()) ? front[i + 1].cost : reference.cost;
    hv += (next_cost - front[i].cost) * (reference.wh - front[i].wh);
  }
  return hv;
}

Efficiency efficiency(std::span<const ObjectivePoint> archive_pred,
                      std::span<const ObjectivePoint> archive_baseline) {
  if (archive_pred.empty() || archive_baseline.empty())
    throw std::runtime_error("efficiency: empty archive");
  Efficiency eff;
  double cost_acc = 0, wh_acc = 0;
  for (const auto& p : archive_pred) {
    // match on nearest wh for the cost ratio
    size_t bi = 0;
    double best = std::abs(archive_baseline[0].wh - p.wh);
    for (size_t j = 1; j < archive_baseline.size(); ++j) {
      const double d = std::abs(archive_baseline[j].wh - p.wh);
      if (d < best) {
        best = d;
        bi = j;
      }
    }
    cost_acc += (p.cost / archive_baseline[bi].cost - 1.0) * 100.0;

    // match on nearest cost for the wh ratio
    size_t ci = 0;
    best = std::abs(archive_baseline[0].cost - p.cost);
    for (size_t j = 1; j < archive_baseline.size(); ++j) {
      const double d = std::abs(archive_baseline[j].cost - p.cost);
      if (d < best) {
        best = d;
        ci = j;
      }
    }
    wh_acc += (p.wh / archive_baseline[ci].wh - 1.0) * 100.0;
  }
  eff.cost_pct = cost_acc / double(archive_pred.size());
  eff.wh_pct = wh_acc / double(archive_pred.size());
  return eff;
}

double nearest_rank_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::runtime_error("quantile of empty set");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  size_t rank = size_t(std::ceil(q * double(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return values[rank - 1];
}

std::vector<TraceSample> quantile_trace(
    const std::vector<std::vector<TraceSample>>& traces, double q) {
  if (traces.empty()) throw std::runtime_error("quantile_trace: no traces");
  std::set<long> xs;
  for (const auto& t : traces)
    for (const auto& s : t) xs.insert(s.real_evals);

  std::vector<TraceSample> out;
  for (long x : xs) {
    std::vector<double> vals;
    vals.reserve(traces.size());
    for (const auto& t : traces) {
      double v = 0;  // before the first sample the archive is empty
      for (const auto& s : t) {
        if (s.real_evals <= x)
          v = s.hv;
        else
          break;
      }
      vals.push_back(v);
    }
    out.push_back({x, nearest_rank_quantile(std::move(vals), q)});
  }
  return out;
}

}  // namespace breakwater

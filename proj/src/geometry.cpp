#include "breakwater/geometry.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <string>

#include "breakwater/csv.hpp"
#include "breakwater/domain.hpp"

namespace breakwater {

namespace {

double hypot2(double dx, double dy) { return std::sqrt(dx * dx + dy * dy); }

std::string fmt_point(Point p) {
  return "(" + format_double(p.x) + "," + format_double(p.y) + ")";
}

}  // namespace

const char* violation_kind_name(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::in_prohibited: return "in_prohibited";
    case ViolationKind::in_protection: return "in_protection";
    case ViolationKind::out_of_bounds: return "out_of_bounds";
    case ViolationKind::too_close_target: return "too_close_target";
    case ViolationKind::too_close_structure: return "too_close_structure";
    case ViolationKind::self_proximity: return "self_proximity";
  }
  return "unknown";
}

bool valid_system(const BreakwaterSystem& sys) {
  for (const auto& line : sys.breakwaters) {
    if (line.size() < 2) return false;
    for (size_t i = 0; i + 1 < line.size(); ++i)
      if (line[i] == line[i + 1]) return false;
  }
  return true;
}

double cost(const BreakwaterSystem& sys) {
  double total = 0;
  for (const auto& line : sys.breakwaters)
    for (size_t i = 0; i + 1 < line.size(); ++i)
      total += hypot2(line[i + 1].x - line[i].x, line[i + 1].y - line[i].y);
  return total;
}

double point_segment_distance(Point p, Point a, Point b) {
  const double abx = b.x - a.x, aby = b.y - a.y;
  const double len2 = abx * abx + aby * aby;
  double t = 0;
  if (len2 > 0) {
    t = ((p.x - a.x) * abx + (p.y - a.y) * aby) / len2;
    t = std::clamp(t, 0.0, 1.0);
  }
  return hypot2(p.x - (a.x + t * abx), p.y - (a.y + t * aby));
}

namespace {

// 2-D cross product of (b-a) and (c-a)
double cross(Point a, Point b, Point c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

bool segments_intersect(Point a0, Point a1, Point b0, Point b1) {
  const double d1 = cross(b0, b1, a0);
  const double d2 = cross(b0, b1, a1);
  const double d3 = cross(a0, a1, b0);
  const double d4 = cross(a0, a1, b1);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  auto on_segment = [](Point p, Point q, Point r) {
    return std::min(p.x, r.x) <= q.x && q.x <= std::max(p.x, r.x) &&
           std::min(p.y, r.y) <= q.y && q.y <= std::max(p.y, r.y);
  };
  if (d1 == 0 && on_segment(b0, a0, b1)) return true;
  if (d2 == 0 && on_segment(b0, a1, b1)) return true;
  if (d3 == 0 && on_segment(a0, b0, a1)) return true;
  if (d4 == 0 && on_segment(a0, b1, a1)) return true;
  return false;
}

// Visits every cell the closed segment touches (supercover): the segment is
// split at every grid-line crossing and the cell containing each piece's
// midpoint is reported; a diagonal jump between consecutive pieces means the
// segment passed exactly through a lattice corner, in which case both side
// cells are reported too so the cover has no 4-connectivity gaps. May visit
// cells outside the grid; callers filter.
template <class F>
void for_each_supercover_cell(Point a, Point b, F&& visit) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  if (dx == 0 && dy == 0) {
    visit(int(std::floor(a.x)), int(std::floor(a.y)));
    return;
  }
  std::vector<double> ts;
  ts.reserve(size_t(std::abs(dx) + std::abs(dy)) + 4);
  ts.push_back(0.0);
  ts.push_back(1.0);
  if (dx != 0) {
    const int x0 = int(std::floor(std::min(a.x, b.x))) + 1;
    const int x1 = int(std::ceil(std::max(a.x, b.x))) - 1;
    for (int gx = x0; gx <= x1; ++gx) {
      const double t = (gx - a.x) / dx;
      if (t > 0 && t < 1) ts.push_back(t);
    }
  }
  if (dy != 0) {
    const int y0 = int(std::floor(std::min(a.y, b.y))) + 1;
    const int y1 = int(std::ceil(std::max(a.y, b.y))) - 1;
    for (int gy = y0; gy <= y1; ++gy) {
      const double t = (gy - a.y) / dy;
      if (t > 0 && t < 1) ts.push_back(t);
    }
  }
  std::sort(ts.begin(), ts.end());

  int prev_cx = INT_MIN, prev_cy = INT_MIN;
  for (size_t i = 0; i + 1 < ts.size(); ++i) {
    if (ts[i + 1] - ts[i] <= 1e-12) continue;
    const double tm = 0.5 * (ts[i] + ts[i + 1]);
    const int cx = int(std::floor(a.x + tm * dx));
    const int cy = int(std::floor(a.y + tm * dy));
    if (prev_cx != INT_MIN && cx != prev_cx && cy != prev_cy) {
      visit(cx, prev_cy);
      visit(prev_cx, cy);
    }
    visit(cx, cy);
    prev_cx = cx;
    prev_cy = cy;
  }
}

}  // namespace

double segment_segment_distance(Point a0, Point a1, Point b0, Point b1) {
  if (segments_intersect(a0, a1, b0, b1)) return 0.0;
  double d = point_segment_distance(a0, b0, b1);
  d = std::min(d, point_segment_distance(a1, b0, b1));
  d = std::min(d, point_segment_distance(b0, a0, a1));
  d = std::min(d, point_segment_distance(b1, a0, a1));
  return d;
}

void rasterize_segment(Point a, Point b, Mask& out) {
  for_each_supercover_cell(a, b, [&](int cx, int cy) {
    if (cx >= 0 && cx < out.width && cy >= 0 && cy < out.height)
      out.at(cx, cy) = 1;
  });
}

Mask rasterize(const BreakwaterSystem& sys, int grid_width, int grid_height) {
  Mask out(grid_width, grid_height, 0);
  for (const auto& line : sys.breakwaters)
    for (size_t i = 0; i + 1 < line.size(); ++i)
      rasterize_segment(line[i], line[i + 1], out);
  return out;
}

ConstraintVerdict check_constraints(const BreakwaterSystem& sys,
                                    const DomainConfig& dom) {
  ConstraintVerdict verdict;
  auto add = [&](ViolationKind kind, std::string detail) {
    verdict.feasible = false;
    verdict.violations.push_back({kind, std::move(detail)});
  };

  for (size_t bi = 0; bi < sys.breakwaters.size(); ++bi) {
    const auto& line = sys.breakwaters[bi];
    const std::string tag = "breakwater " + std::to_string(bi);

    for (const auto& p : line) {
      if (p.x < 0 || p.x > dom.width || p.y < 0 || p.y > dom.height) {
        add(ViolationKind::out_of_bounds,
            tag + " node " + fmt_point(p) + " outside the search area");
        break;
      }
    }

    for (size_t i = 0; i + 1 < line.size(); ++i) {
      bool on_land = false, on_prohibited = false, on_protection = false;
      for_each_supercover_cell(line[i], line[i + 1], [&](int cx, int cy) {
        if (cx < 0 || cx >= dom.width || cy < 0 || cy >= dom.height) return;
        if (dom.land_mask.at(cx, cy)) on_land = true;
        if (dom.prohibited_mask.at(cx, cy)) on_prohibited = true;
        if (dom.protection_mask.at(cx, cy)) on_protection = true;
      });
      const std::string seg = tag + " segment " + std::to_string(i);
      if (on_land)
        add(ViolationKind::out_of_bounds, seg + " crosses land");
      if (on_prohibited)
        add(ViolationKind::in_prohibited, seg + " crosses a prohibited cell");
      if (on_protection)
        add(ViolationKind::in_protection,
            seg + " crosses a target protection cell");

      for (size_t ti = 0; ti < dom.targets.size(); ++ti) {
        const double d =
            point_segment_distance(dom.target_point(ti), line[i], line[i + 1]);
        if (d < dom.epsilon)
          add(ViolationKind::too_close_target,
              seg + " at distance " + std::to_string(d) + " from target " +
                  std::to_string(ti));
      }
      for (size_t si = 0; si < dom.static_structures.size(); ++si) {
        const auto& st = dom.static_structures[si];
        for (size_t j = 0; j + 1 < st.size(); ++j) {
          const double d = segment_segment_distance(line[i], line[i + 1],
                                                    st[j], st[j + 1]);
          if (d < dom.epsilon) {
            add(ViolationKind::too_close_structure,
                seg + " at distance " + std::to_string(d) + " from structure " +
                    std::to_string(si));
            break;
          }
        }
      }
    }

    if (dom.forbid_self_proximity) {
      for (size_t i = 0; i + 1 < line.size(); ++i) {
        for (size_t j = i + 2; j + 1 < line.size(); ++j) {
          const double d = segment_segment_distance(line[i], line[i + 1],
                                                    line[j], line[j + 1]);
          if (d < dom.epsilon)
            add(ViolationKind::self_proximity,
                tag + " segments " + std::to_string(i) + " and " +
                    std::to_string(j) + " closer than epsilon");
        }
      }
    }
  }
  return verdict;
}

}  // namespace breakwater

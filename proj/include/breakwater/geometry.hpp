#pragma once

#include <string>
#include <vector>

#include "breakwater/grid.hpp"

namespace breakwater {

struct DomainConfig;

struct Point {
  double x = 0;
  double y = 0;
  bool operator==(const Point&) const = default;
};

// A breakwater is an open polyline; each consecutive node pair is one
// built segment. Coordinates are continuous, in grid units.
using Polyline = std::vector<Point>;

struct BreakwaterSystem {
  std::vector<Polyline> breakwaters;
  bool operator==(const BreakwaterSystem&) const = default;
};

// Total construction cost: the summed Euclidean length of every segment.
double cost(const BreakwaterSystem& sys);

enum class ViolationKind {
  in_prohibited,
  in_protection,
  out_of_bounds,
  too_close_target,
  too_close_structure,
  self_proximity,
};

const char* violation_kind_name(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  std::string detail;
};

struct ConstraintVerdict {
  bool feasible = true;
  std::vector<Violation> violations;
};

// Placement constraints: segments must stay inside the water search area
// (grid bounds, off land), clear of prohibited cells and target protection
// discs, and keep at least dom.epsilon distance from target points and
// static structures. Distances are continuous point/segment distances.
ConstraintVerdict check_constraints(const BreakwaterSystem& sys,
                                    const DomainConfig& dom);

// Supercover rasterization: marks every grid cell whose closed unit square
// is touched by a segment, including both side cells at exact corner
// crossings, so a rasterized diagonal has no 4-connectivity gaps a
// propagating wave could slip through. Cells outside the grid are dropped.
Mask rasterize(const BreakwaterSystem& sys, int grid_width, int grid_height);

void rasterize_segment(Point a, Point b, Mask& out);

double point_segment_distance(Point p, Point a, Point b);
double segment_segment_distance(Point a0, Point a1, Point b0, Point b1);

// True when every polyline has >= 2 nodes and no zero-length segment.
bool valid_system(const BreakwaterSystem& sys);

}  // namespace breakwater

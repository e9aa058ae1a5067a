#pragma once

#include <string>
#include <vector>

#include "breakwater/geometry.hpp"
#include "breakwater/grid.hpp"

namespace breakwater {

struct CellCoord {
  int x = 0;
  int y = 0;
  bool operator==(const CellCoord&) const = default;
};

// The water area: grid geometry, bathymetry, wind forcing, protection
// targets, land and prohibited zones, and fixed non-optimizable structures.
// Immutable after finalize(); shared freely across threads.
struct DomainConfig {
  int width = 0;                   // cells
  int height = 0;                  // cells
  double cell_size = 10.0;         // meters per cell
  Grid<double> bathymetry;         // meters depth; > 0 on water, 0 on land
  Mask land_mask;
  Mask prohibited_mask;
  std::vector<CellCoord> targets;  // cell coordinates of protected points
  std::vector<Polyline> static_structures;
  double wind_direction = 45.0;    // met convention: direction wind blows FROM,
                                   // degrees clockwise from north (+y)
  double wind_speed = 15.0;        // m/s
  double epsilon = 1.0;            // min clearance, grid units
  double protection_radius = 2.0;  // protection disc radius, cells
  bool forbid_self_proximity = false;

  // Derived, built by finalize()
  Mask protection_mask;  // cells within protection_radius of a target
  Mask static_mask;      // supercover raster of static_structures
  Mask blocked_mask;     // land | static structures

  // Continuous coordinates of a target point (its cell center).
  Point target_point(size_t i) const {
    return {targets[i].x + 0.5, targets[i].y + 0.5};
  }

  // Validates invariants and rebuilds derived masks; throws
  // std::runtime_error with a descriptive message on violation.
  void finalize();

  bool operator==(const DomainConfig& other) const;
};

// Built-in replica of the benchmark coastal scenario: depth grows linearly
// from the lower-left (shore) to the upper-right (open sea), a land wedge
// occupies the lower-left corner, two shore-attached static breakwaters jut
// into the water, two targets sit in mid-depth water, and one rectangular
// prohibited block lies offshore. All features scale with `size`.
DomainConfig synthetic_case(int size = 64);

DomainConfig load_domain(const std::string& path);
void save_domain(const DomainConfig& dom, const std::string& path);

// Serialization to/from the plain-text domain format (documented in the
// README); save_domain/load_domain are file wrappers around these.
std::string domain_to_text(const DomainConfig& dom);
DomainConfig domain_from_text(const std::string& text);

}  // namespace breakwater

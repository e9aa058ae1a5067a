#include "breakwater/domain.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "breakwater/csv.hpp"

namespace breakwater {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error("domain: " + msg);
}

Mask build_protection_mask(const DomainConfig& dom) {
  Mask m(dom.width, dom.height, 0);
  for (size_t ti = 0; ti < dom.targets.size(); ++ti) {
    const auto t = dom.targets[ti];
    const int r = int(std::ceil(dom.protection_radius));
    for (int y = t.y - r; y <= t.y + r; ++y) {
      for (int x = t.x - r; x <= t.x + r; ++x) {
        if (!m.in_bounds(x, y)) continue;
        const double dx = x - t.x, dy = y - t.y;
        if (std::sqrt(dx * dx + dy * dy) <= dom.protection_radius)
          m.at(x, y) = 1;
      }
    }
  }
  return m;
}

}  // namespace

void DomainConfig::finalize() {
  require(width > 0 && height > 0, "grid dimensions must be positive");
  require(cell_size > 0, "cell_size must be positive");
  require(wind_speed > 0, "wind_speed must be positive");
  require(wind_direction >= 0 && wind_direction < 360,
          "wind_direction must lie in [0, 360)");
  require(epsilon >= 0, "epsilon must be non-negative");
  require(protection_radius >= 0, "protection_radius must be non-negative");
  auto dims_ok = [&](const auto& g) {
    return g.width == width && g.height == height;
  };
  require(dims_ok(bathymetry), "bathymetry dimensions mismatch grid");
  require(dims_ok(land_mask), "land_mask dimensions mismatch grid");
  require(dims_ok(prohibited_mask), "prohibited_mask dimensions mismatch grid");
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if (!land_mask.at(x, y))
        require(bathymetry.at(x, y) > 0,
                "bathymetry must be positive on water at (" +
                    std::to_string(x) + "," + std::to_string(y) + ")");
  for (size_t i = 0; i < targets.size(); ++i) {
    const auto t = targets[i];
    require(t.x >= 0 && t.x < width && t.y >= 0 && t.y < height,
            "target " + std::to_string(i) + " outside the grid");
    require(!land_mask.at(t.x, t.y),
            "target " + std::to_string(i) + " lies on a land cell");
    require(!prohibited_mask.at(t.x, t.y),
            "target " + std::to_string(i) + " lies on a prohibited cell");
  }
  for (const auto& line : static_structures)
    require(line.size() >= 2, "static structure with fewer than 2 nodes");

  protection_mask = build_protection_mask(*this);
  BreakwaterSystem statics{static_structures};
  static_mask = rasterize(statics, width, height);
  blocked_mask = mask_union(land_mask, static_mask);
}

bool DomainConfig::operator==(const DomainConfig& o) const {
  return width == o.width && height == o.height && cell_size == o.cell_size &&
         bathymetry == o.bathymetry && land_mask == o.land_mask &&
         prohibited_mask == o.prohibited_mask && targets == o.targets &&
         static_structures == o.static_structures &&
         wind_direction == o.wind_direction && wind_speed == o.wind_speed &&
         epsilon == o.epsilon && protection_radius == o.protection_radius &&
         forbid_self_proximity == o.forbid_self_proximity;
}

DomainConfig synthetic_case(int size) {
  if (size < 16) throw std::runtime_error("synthetic_case: size must be >= 16");
  DomainConfig dom;
  dom.width = size;
  dom.height = size;
  dom.cell_size = 10.0;
  dom.wind_direction = 45.0;  // waves arrive from the open north-east water
  dom.wind_speed = 15.0;
  dom.epsilon = 1.0;
  dom.protection_radius = 2.0;

  const double s = size / 64.0;  // every feature scales with resolution

  // Land wedge in the lower-left corner; the x + y < land_extent diagonal is
  // the shoreline. Depth grows linearly toward the upper-right corner.
  const int land_extent = int(std::round(10 * s));
  const double depth_min = 1.0, depth_max = 8.0;
  dom.land_mask = Mask(size, size, 0);
  dom.bathymetry = Grid<double>(size, size, 0.0);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      if (x + y < land_extent) {
        dom.land_mask.at(x, y) = 1;
        dom.bathymetry.at(x, y) = 0.0;
      } else {
        const double frac = double(x + y) / double(2 * (size - 1));
        dom.bathymetry.at(x, y) = depth_min + (depth_max - depth_min) * frac;
      }
    }
  }

  dom.prohibited_mask = Mask(size, size, 0);
  const int px0 = int(std::round(35 * s)), px1 = int(std::round(44 * s));
  const int py0 = int(std::round(35 * s)), py1 = int(std::round(44 * s));
  for (int y = py0; y <= py1 && y < size; ++y)
    for (int x = px0; x <= px1 && x < size; ++x)
      dom.prohibited_mask.at(x, y) = 1;

  dom.targets = {
      {int(std::round(13 * s)), int(std::round(18 * s))},
      {int(std::round(21 * s)), int(std::round(11 * s))},
  };

  // Two fixed breakwaters attached to the shore, jutting into open water.
  dom.static_structures = {
      {{2.0 * s, 8.5 * s}, {7.0 * s, 14.0 * s}},
      {{8.5 * s, 2.0 * s}, {15.0 * s, 6.0 * s}},
  };

  dom.finalize();
  return dom;
}

// ---------------------------------------------------------------------------
// Text format
// ---------------------------------------------------------------------------

namespace {

void write_mask_block(std::ostringstream& out, const std::string& name,
                      const Mask& m) {
  out << name << "\n";
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (x) out << ' ';
      out << int(m.at(x, y));
    }
    out << "\n";
  }
}

}  // namespace

std::string domain_to_text(const DomainConfig& dom) {
  std::ostringstream out;
  out << "breakwater_domain 1\n";
  out << "width " << dom.width << "\n";
  out << "height " << dom.height << "\n";
  out << "cell_size " << format_double(dom.cell_size) << "\n";
  out << "wind_direction " << format_double(dom.wind_direction) << "\n";
  out << "wind_speed " << format_double(dom.wind_speed) << "\n";
  out << "epsilon " << format_double(dom.epsilon) << "\n";
  out << "protection_radius " << format_double(dom.protection_radius) << "\n";
  out << "forbid_self_proximity " << int(dom.forbid_self_proximity) << "\n";
  out << "targets " << dom.targets.size() << "\n";
  for (const auto& t : dom.targets) out << t.x << " " << t.y << "\n";
  out << "static_structures " << dom.static_structures.size() << "\n";
  for (const auto& line : dom.static_structures) {
    out << line.size();
    for (const auto& p : line)
      out << " " << format_double(p.x) << " " << format_double(p.y);
    out << "\n";
  }
  write_mask_block(out, "land_mask", dom.land_mask);
  write_mask_block(out, "prohibited_mask", dom.prohibited_mask);
  out << "bathymetry\n";
  for (int y = 0; y < dom.height; ++y) {
    for (int x = 0; x < dom.width; ++x) {
      if (x) out << ' ';
      out << format_double(dom.bathymetry.at(x, y));
    }
    out << "\n";
  }
  return out.str();
}

DomainConfig domain_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  auto next_word = [&](const std::string& what) {
    if (!(in >> word))
      throw std::runtime_error("domain parse: unexpected end of input, expected " +
                               what);
    return word;
  };
  auto expect = [&](const std::string& key) {
    if (next_word(key) != key)
      throw std::runtime_error("domain parse: expected '" + key + "', got '" +
                               word + "'");
  };
  auto read_int = [&](const std::string& what) {
    next_word(what);
    try {
      return std::stoi(word);
    } catch (...) {
      throw std::runtime_error("domain parse: bad integer for " + what);
    }
  };
  auto read_double = [&](const std::string& what) {
    next_word(what);
    try {
      return parse_double(word);
    } catch (...) {
      throw std::runtime_error("domain parse: bad number for " + what);
    }
  };

  expect("breakwater_domain");
  if (read_int("format version") != 1)
    throw std::runtime_error("domain parse: unsupported format version");

  DomainConfig dom;
  expect("width");
  dom.width = read_int("width");
  expect("height");
  dom.height = read_int("height");
  expect("cell_size");
  dom.cell_size = read_double("cell_size");
  expect("wind_direction");
  dom.wind_direction = read_double("wind_direction");
  expect("wind_speed");
  dom.wind_speed = read_double("wind_speed");
  expect("epsilon");
  dom.epsilon = read_double("epsilon");
  expect("protection_radius");
  dom.protection_radius = read_double("protection_radius");
  expect("forbid_self_proximity");
  dom.forbid_self_proximity = read_int("forbid_self_proximity") != 0;

  expect("targets");
  const int n_targets = read_int("target count");
  for (int i = 0; i < n_targets; ++i) {
    CellCoord t;
    t.x = read_int("target x");
    t.y = read_int("target y");
    dom.targets.push_back(t);
  }

  expect("static_structures");
  const int n_statics = read_int("static structure count");
  for (int i = 0; i < n_statics; ++i) {
    const int n_nodes = read_int("node count");
    Polyline line;
    for (int k = 0; k < n_nodes; ++k) {
      Point p;
      p.x = read_double("node x");
      p.y = read_double("node y");
      line.push_back(p);
    }
    dom.static_structures.push_back(std::move(line));
  }

  if (dom.width <= 0 || dom.height <= 0)
    throw std::runtime_error("domain parse: non-positive grid dimensions");

  auto read_mask = [&](const std::string& name) {
    expect(name);
    Mask m(dom.width, dom.height, 0);
    for (int y = 0; y < dom.height; ++y)
      for (int x = 0; x < dom.width; ++x)
        m.at(x, y) = read_int(name + " cell") != 0;
    return m;
  };
  dom.land_mask = read_mask("land_mask");
  dom.prohibited_mask = read_mask("prohibited_mask");

  expect("bathymetry");
  dom.bathymetry = Grid<double>(dom.width, dom.height, 0.0);
  for (int y = 0; y < dom.height; ++y)
    for (int x = 0; x < dom.width; ++x)
      dom.bathymetry.at(x, y) = read_double("bathymetry cell");

  dom.finalize();
  return dom;
}

DomainConfig load_domain(const std::string& path) {
  return domain_from_text(read_text_file(path));
}

void save_domain(const DomainConfig& dom, const std::string& path) {
  write_text_file(path, domain_to_text(dom));
}

}  // namespace breakwater

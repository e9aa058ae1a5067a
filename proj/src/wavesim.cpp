#include "breakwater/wavesim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace breakwater {

namespace {

// Bilinear sample of the coarse bathymetry at continuous grid coords.
double sample_depth(const Grid<double>& depth, double x, double y) {
  const double fx = std::clamp(x - 0.5, 0.0, double(depth.width - 1));
  const double fy = std::clamp(y - 0.5, 0.0, double(depth.height - 1));
  const int x0 = std::min(int(fx), std::max(0, depth.width - 2));
  const int y0 = std::min(int(fy), std::max(0, depth.height - 2));
  const int x1 = std::min(x0 + 1, depth.width - 1);
  const int y1 = std::min(y0 + 1, depth.height - 1);
  const double ax = fx - x0, ay = fy - y0;
  return depth.at(x0, y0) * (1 - ax) * (1 - ay) +
         depth.at(x1, y0) * ax * (1 - ay) +
         depth.at(x0, y1) * (1 - ax) * ay + depth.at(x1, y1) * ax * ay;
}

struct FineGrids {
  int w = 0, h = 0;
  std::vector<float> equilibrium;  // min(h0, gamma*depth), 0 on obstacles
  std::vector<uint8_t> obstacle;
};

FineGrids build_fine_grids(const BreakwaterSystem& sys, const DomainConfig& dom,
                           const WaveParams& p, double h0) {
  FineGrids fg;
  const int R = std::max(1, p.refine);
  fg.w = dom.width * R;
  fg.h = dom.height * R;
  fg.obstacle.assign(size_t(fg.w) * fg.h, 0);

  // land replicated; candidate and static polylines rasterized at fine scale
  for (int y = 0; y < fg.h; ++y)
    for (int x = 0; x < fg.w; ++x)
      if (dom.land_mask.at(x / R, y / R))
        fg.obstacle[size_t(y) * fg.w + x] = 1;

  Mask fine_mask(fg.w, fg.h, 0);
  auto add_scaled = [&](const Polyline& line) {
    for (size_t i = 0; i + 1 < line.size(); ++i)
      rasterize_segment({line[i].x * R, line[i].y * R},
                        {line[i + 1].x * R, line[i + 1].y * R}, fine_mask);
  };
  for (const auto& line : dom.static_structures) add_scaled(line);
  for (const auto& line : sys.breakwaters) add_scaled(line);
  for (size_t i = 0; i < fine_mask.cells.size(); ++i)
    if (fine_mask.cells[i]) fg.obstacle[i] = 1;

  fg.equilibrium.assign(size_t(fg.w) * fg.h, 0.f);
  for (int y = 0; y < fg.h; ++y) {
    for (int x = 0; x < fg.w; ++x) {
      const size_t i = size_t(y) * fg.w + x;
      if (fg.obstacle[i]) continue;
      const double d =
          sample_depth(dom.bathymetry, (x + 0.5) / R, (y + 0.5) / R);
      fg.equilibrium[i] = float(std::min(h0, p.gamma * std::max(0.0, d)));
    }
  }
  return fg;
}

// One downwind march for a single incident direction: waves enter the upwind
// boundary at equilibrium height, advect line by line with constant sub-cell
// shear, relax toward the depth-limited equilibrium, spread laterally with
// the 3-cell kernel at every step, and vanish on obstacle cells. Adds
// `weight` times the resulting field into `accum`.
void march_direction(const FineGrids& fg, const WaveParams& p,
                     double direction_deg, float weight,
                     std::vector<float>& work, std::vector<float>& premix,
                     std::vector<float>& accum) {
  const int FW = fg.w, FH = fg.h;
  const double rad = direction_deg * 3.14159265358979323846 / 180.0;
  // met convention: direction is where the wind comes FROM
  const double ux = -std::sin(rad), uy = -std::cos(rad);
  const bool along_y = std::abs(uy) >= std::abs(ux);

  const int lines = along_y ? FH : FW;
  const int span = along_y ? FW : FH;
  const double primary = along_y ? uy : ux;
  const double secondary = along_y ? ux : uy;
  const int step = primary > 0 ? 1 : -1;
  const int first = primary > 0 ? 0 : lines - 1;
  const double shear = secondary / std::abs(primary);

  auto idx = [&](int line, int lat) {
    return along_y ? size_t(line) * FW + lat : size_t(lat) * FW + line;
  };

  const float lam = float(p.lateral);
  const float keep = 1.f - 2.f * lam;
  const float grow = float(p.regrowth);

  const double off = -shear;
  const int k = int(std::floor(off));
  const float f = float(off - k);

  for (int li = 0, line = first; li < lines; ++li, line += step) {
    if (li == 0) {
      for (int x = 0; x < span; ++x) {
        const size_t i = idx(line, x);
        work[i] = fg.obstacle[i] ? 0.f : fg.equilibrium[i];
      }
      continue;
    }
    const int prev = line - step;
    // advect + grow into the pre-mix buffer; lateral out-of-range sources
    // are open sea entering at the local equilibrium
    for (int x = 0; x < span; ++x) {
      const size_t i = idx(line, x);
      if (fg.obstacle[i]) {
        premix[x] = 0.f;
        continue;
      }
      const float e = fg.equilibrium[i];
      const int xa = x + k, xb = xa + 1;
      const float va = (xa >= 0 && xa < span) ? work[idx(prev, xa)] : e;
      const float vb = (xb >= 0 && xb < span) ? work[idx(prev, xb)] : e;
      const float adv = (1.f - f) * va + f * vb;
      premix[x] = adv + grow * (e - adv);
    }
    // 3-cell lateral diffusion within the line, then saturation
    for (int x = 0; x < span; ++x) {
      const size_t i = idx(line, x);
      if (fg.obstacle[i]) {
        work[i] = 0.f;
        continue;
      }
      const float e = fg.equilibrium[i];
      const float left = x > 0 ? premix[x - 1] : e;
      const float right = x < span - 1 ? premix[x + 1] : e;
      const float mixed = keep * premix[x] + lam * (left + right);
      work[i] = std::max(0.f, std::min(mixed, e));
    }
  }
  for (size_t i = 0; i < accum.size(); ++i) accum[i] += weight * work[i];
}

}  // namespace

WaveField simulate(const BreakwaterSystem& sys, const DomainConfig& dom,
                   const WaveParams& p) {
  const double h0 = p.boundary_coeff * dom.wind_speed;
  const FineGrids fg = build_fine_grids(sys, dom, p, h0);

  // cosine-squared directional spreading around the mean wind direction
  const int n_dirs = std::max(1, p.n_directions | 1);  // odd count
  std::vector<double> offsets(n_dirs), weights(n_dirs);
  double wsum = 0;
  for (int i = 0; i < n_dirs; ++i) {
    const double t =
        n_dirs == 1 ? 0.0 : (double(i) / (n_dirs - 1)) * 2.0 - 1.0;
    offsets[i] = t * p.spread_deg;
    const double c = std::cos(1.5707963267948966 * t * 0.999);
    weights[i] = c * c;
    wsum += weights[i];
  }

  std::vector<float> accum(fg.equilibrium.size(), 0.f);
  std::vector<float> work(fg.equilibrium.size(), 0.f);
  std::vector<float> premix(size_t(std::max(fg.w, fg.h)), 0.f);
  for (int i = 0; i < n_dirs; ++i) {
    double dir = dom.wind_direction + offsets[i];
    while (dir < 0) dir += 360.0;
    while (dir >= 360.0) dir -= 360.0;
    march_direction(fg, p, dir, float(weights[i] / wsum), work, premix, accum);
  }

  // Average-pool back to the coarse grid; obstacle and land cells stay 0.
  const int R = std::max(1, p.refine);
  WaveField field;
  field.provenance = Provenance::builtin_oracle;
  field.heights = Grid<float>(dom.width, dom.height, 0.f);
  const Mask candidate = rasterize(sys, dom.width, dom.height);
  for (int y = 0; y < dom.height; ++y) {
    for (int x = 0; x < dom.width; ++x) {
      if (dom.blocked_mask.at(x, y) || candidate.at(x, y)) continue;
      double acc = 0;
      for (int fy = y * R; fy < (y + 1) * R; ++fy)
        for (int fx = x * R; fx < (x + 1) * R; ++fx)
          acc += accum[size_t(fy) * fg.w + fx];
      field.heights.at(x, y) = float(acc / double(R * R));
    }
  }
  return field;
}

std::vector<double> wave_height_at_targets(const WaveField& field,
                                           const DomainConfig& dom) {
  if (field.heights.width != dom.width || field.heights.height != dom.height)
    throw std::runtime_error("wave field dimensions mismatch domain");
  std::vector<double> out;
  out.reserve(dom.targets.size());
  for (const auto& t : dom.targets) out.push_back(field.heights.at(t.x, t.y));
  return out;
}

double aggregate_target_heights(const std::vector<double>& heights,
                                Aggregation agg) {
  if (heights.empty()) return 0.0;
  switch (agg) {
    case Aggregation::sum: {
      double s = 0;
      for (double h : heights) s += h;
      return s;
    }
    case Aggregation::mean: {
      double s = 0;
      for (double h : heights) s += h;
      return s / double(heights.size());
    }
    case Aggregation::max:
      return *std::max_element(heights.begin(), heights.end());
  }
  return 0.0;
}

}  // namespace breakwater

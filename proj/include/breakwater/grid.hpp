#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace breakwater {

// Dense row-major H x W grid. Cell (x, y) covers the unit square
// [x, x+1) x [y, y+1) in continuous grid coordinates; row y = 0 is the
// southern edge of the domain.
template <class T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> cells;

  Grid() = default;
  Grid(int w, int h, T fill = T{})
      : width(w), height(h), cells(size_t(w) * size_t(h), fill) {}

  T& at(int x, int y) { return cells[size_t(y) * width + x]; }
  const T& at(int x, int y) const { return cells[size_t(y) * width + x]; }

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }

  size_t size() const { return cells.size(); }

  bool operator==(const Grid&) const = default;
};

using Mask = Grid<uint8_t>;

inline Mask mask_union(const Mask& a, const Mask& b) {
  Mask out = a;
  for (size_t i = 0; i < out.cells.size(); ++i)
    out.cells[i] = out.cells[i] || b.cells[i];
  return out;
}

inline size_t mask_count(const Mask& m) {
  size_t n = 0;
  for (uint8_t c : m.cells) n += (c != 0);
  return n;
}

}  // namespace breakwater

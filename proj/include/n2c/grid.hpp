#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace n2c {

// Row-major 2D field of 64-bit values. This is the working precision for all
// filtering, network and loss computations; Image is the storage type.
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int w, int h, double fill = 0.0)
      : width(w), height(h), v(static_cast<std::size_t>(w) * h, fill) {}

  std::size_t size() const { return v.size(); }
  double& at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
  std::span<double> row(int y) { return {v.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)}; }
  std::span<const double> row(int y) const {
    return {v.data() + static_cast<std::size_t>(y) * width, static_cast<std::size_t>(width)};
  }

  bool same_shape(const Grid& o) const { return width == o.width && height == o.height; }
  friend bool operator==(const Grid&, const Grid&) = default;
};

double grid_min(const Grid& g);
double grid_max(const Grid& g);
double grid_mean(const Grid& g);
bool grid_all_finite(const Grid& g);

}  // namespace n2c

#include "n2c/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace n2c {

double grid_min(const Grid& g) {
  return g.v.empty() ? 0.0 : *std::min_element(g.v.begin(), g.v.end());
}

double grid_max(const Grid& g) {
  return g.v.empty() ? 0.0 : *std::max_element(g.v.begin(), g.v.end());
}

double grid_mean(const Grid& g) {
  if (g.v.empty()) return 0.0;
  double s = 0.0;
  for (double x : g.v) s += x;
  return s / static_cast<double>(g.v.size());
}

bool grid_all_finite(const Grid& g) {
  return std::all_of(g.v.begin(), g.v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace n2c

#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "n2c/grid.hpp"
#include "n2c/image.hpp"
#include "n2c/rng.hpp"

namespace n2c::test {

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 salt(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() / ("n2c_" + tag + "_" + std::to_string(salt()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Grid random_grid(int w, int h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  Grid g(w, h);
  for (double& v : g.v) v = rng.uniform(lo, hi);
  return g;
}

inline Image constant_image(int w, int h, float value, Contrast c = Contrast::A) {
  Image img(w, h, c);
  for (float& v : img.data) v = value;
  return img;
}

inline double sample_std(const std::vector<double>& d) {
  double m = 0.0;
  for (double v : d) m += v;
  m /= static_cast<double>(d.size());
  double s = 0.0;
  for (double v : d) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(d.size() - 1));
}

// Lag-1 horizontal autocorrelation of a field.
inline double lag1_autocorrelation(const Grid& g) {
  const double m = grid_mean(g);
  double num = 0.0, den = 0.0;
  for (int y = 0; y < g.height; ++y)
    for (int x = 0; x < g.width; ++x) {
      const double a = g.at(x, y) - m;
      den += a * a;
      if (x + 1 < g.width) num += a * (g.at(x + 1, y) - m);
    }
  return num / den;
}

inline Grid difference(const Image& a, const Image& b) {
  Grid d(a.width, a.height);
  for (std::size_t i = 0; i < d.size(); ++i) d.v[i] = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
  return d;
}

}  // namespace n2c::test

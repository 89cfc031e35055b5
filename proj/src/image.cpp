#include "n2c/image.hpp"

#include <algorithm>
#include <cmath>

#include "n2c/errors.hpp"

namespace n2c {

std::string_view to_string(Contrast c) { return c == Contrast::A ? "A" : "B"; }

Contrast contrast_from_string(std::string_view s) {
  if (s == "A" || s == "a") return Contrast::A;
  if (s == "B" || s == "b") return Contrast::B;
  throw ConfigError("unknown contrast tag '" + std::string(s) + "' (expected A or B)");
}

Image::Image(int w, int h, Contrast c, int realization)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0f), contrast(c), realization_id(realization) {}

Grid Image::to_grid() const {
  Grid g(width, height);
  std::copy(data.begin(), data.end(), g.v.begin());
  return g;
}

Image Image::from_grid(const Grid& g, Contrast c, int realization) {
  Image img(g.width, g.height, c, realization);
  std::transform(g.v.begin(), g.v.end(), img.data.begin(), [](double x) { return static_cast<float>(x); });
  return img;
}

void Image::validate() const {
  if (width <= 0 || height <= 0) throw DataError("image has non-positive dimensions");
  if (data.size() != static_cast<std::size_t>(width) * height)
    throw DataError("image data length " + std::to_string(data.size()) + " != width*height " +
                    std::to_string(static_cast<std::size_t>(width) * height));
  for (float x : data)
    if (!std::isfinite(x)) throw DataError("image contains non-finite intensities");
}

float Image::max_value() const {
  return data.empty() ? 0.0f : *std::max_element(data.begin(), data.end());
}

}  // namespace n2c

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "n2c/grid.hpp"

namespace n2c {

enum class Contrast : std::uint8_t { A = 0, B = 1 };

std::string_view to_string(Contrast c);
Contrast contrast_from_string(std::string_view s);  // throws ConfigError
inline Contrast other(Contrast c) { return c == Contrast::A ? Contrast::B : Contrast::A; }

// Stored image: float32 intensities, nominal range [0, 1], tagged with the
// acquisition contrast and the realization index j of the noisy acquisition.
// Clean images carry realization_id -1.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;
  Contrast contrast = Contrast::A;
  int realization_id = -1;

  Image() = default;
  Image(int w, int h, Contrast c = Contrast::A, int realization = -1);

  std::size_t size() const { return data.size(); }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }

  Grid to_grid() const;
  static Image from_grid(const Grid& g, Contrast c, int realization);

  // Throws DataError when the size or finiteness invariant is broken.
  void validate() const;
  float max_value() const;

  friend bool operator==(const Image&, const Image&) = default;
};

}  // namespace n2c

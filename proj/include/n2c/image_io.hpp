#pragma once

#include <filesystem>
#include <iosfwd>

#include "n2c/image.hpp"

namespace n2c {

// Native image format:
//   "N2CIMG1\n"
//   "<width> <height> <contrast A|B> <realization_id>\n"
//   width*height little-endian float32, row-major.
//
// Errors: FormatError (bad magic or header), TruncationError (payload short),
// DimensionError (payload longer than the header advertises).
void write_image(const Image& img, std::ostream& out);
void write_image(const Image& img, const std::filesystem::path& path);
Image read_image(std::istream& in);
Image read_image(const std::filesystem::path& path);

}  // namespace n2c

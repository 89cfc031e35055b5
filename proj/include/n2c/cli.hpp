#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "n2c/phantom.hpp"

namespace n2c {

inline constexpr const char* kToolVersion = "1.0.0";

// Runs the command line front end. Returns the process exit code:
// 0 success, 1 check failure, 2 config error, 3 data error, 4 numerical error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// File names of the generated data layout:
//   <dir>/clean/slice<NN>_<C>.n2c
//   <dir>/noisy/slice<NN>_<C>_r<R>.n2c
std::string clean_file_name(int slice, Contrast c);
std::string noisy_file_name(int slice, Contrast c, int realization);

// Writes a volume in that layout; returns the number of image files.
std::size_t write_volume(const MultiContrastVolume& vol, const std::filesystem::path& dir);
// Reads it back. Clean images are optional; has_clean is set only when every
// slice has them for each contrast with noisy images. Throws DataError on
// gaps, duplicates or header/name disagreements.
MultiContrastVolume load_volume(const std::filesystem::path& dir);

}  // namespace n2c

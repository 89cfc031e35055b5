#pragma once

#include <filesystem>
#include <iosfwd>

#include "n2c/training.hpp"

namespace n2c {

// Model file layout:
//   "N2CMDL1" <version byte> "\n"
//   "scheme <name>\n" "seed <u64>\n" "direction <A|B>:<A|B>\n" "blocks <n>\n"
//   n times: "block <role> <kind> <json bytes> <float count>\n" <json> "\n" <float32 LE payload>
//   "end\n"
// Roles are filter, denoiser and translator; kinds are bilateral_stack and
// domain_net. A bilateral block is a JSON map from layer index to its widths
// and carries no payload. A network block holds the config and shape
// manifest in JSON and all weights in the payload.
//
// Errors: FormatError (bad magic or line syntax), VersionError,
// TruncationError (file ends early), ManifestError (inconsistent blocks,
// unknown scheme, trailing bytes).
void write_model(const ModelBundle& bundle, std::ostream& out);
void write_model(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle read_model(std::istream& in);
ModelBundle read_model(const std::filesystem::path& path);

}  // namespace n2c

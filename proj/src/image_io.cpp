#include "n2c/image_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "n2c/errors.hpp"

namespace n2c {
namespace {

constexpr std::string_view kMagic = "N2CIMG1\n";
constexpr int kMaxDim = 1 << 15;

void put_f32(std::ostream& out, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  const std::array<char, 4> b = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                                 static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
  out.write(b.data(), 4);
}

float get_f32(const unsigned char* b) {
  const std::uint32_t u = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                          (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return std::bit_cast<float>(u);
}

}  // namespace

void write_image(const Image& img, std::ostream& out) {
  img.validate();
  out.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  out << img.width << ' ' << img.height << ' ' << to_string(img.contrast) << ' ' << img.realization_id << '\n';
  for (float f : img.data) put_f32(out, f);
  if (!out) throw IoError("failed writing image stream");
}

void write_image(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_image(img, out);
}

Image read_image(std::istream& in) {
  std::string magic(kMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (in.gcount() != static_cast<std::streamsize>(kMagic.size()) || magic != kMagic)
    throw FormatError("not a native image file (bad magic)");

  std::string header;
  if (!std::getline(in, header)) throw FormatError("malformed header: missing header line");
  std::istringstream hs(header);
  int w = 0, h = 0, realization = 0;
  std::string tag, rest;
  if (!(hs >> w >> h >> tag >> realization) || (hs >> rest))
    throw FormatError("malformed header: '" + header + "'");
  if (w <= 0 || h <= 0 || w > kMaxDim || h > kMaxDim)
    throw FormatError("malformed header: invalid dimensions " + std::to_string(w) + "x" + std::to_string(h));
  Contrast c;
  try {
    c = contrast_from_string(tag);
  } catch (const ConfigError&) {
    throw FormatError("malformed header: unknown contrast tag '" + tag + "'");
  }

  Image img(w, h, c, realization);
  const std::size_t bytes = img.size() * 4;
  std::string payload(bytes, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(bytes));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got != bytes)
    throw TruncationError("truncated payload: expected " + std::to_string(img.size()) + " values, found " +
                          std::to_string(got / 4));
  if (in.peek() != std::char_traits<char>::eof())
    throw DimensionError("payload longer than the advertised " + std::to_string(w) + "x" + std::to_string(h));
  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = get_f32(p + 4 * i);
  try {
    img.validate();
  } catch (const DataError& e) {
    throw FormatError(std::string("invalid payload: ") + e.what());
  }
  return img;
}

Image read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return read_image(in);
}

}  // namespace n2c

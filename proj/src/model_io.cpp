#include "n2c/model_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "n2c/errors.hpp"

namespace n2c {
namespace {

using nlohmann::ordered_json;

constexpr std::string_view kMagic = "N2CMDL1";

void put_f32(std::ostream& out, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  const std::array<char, 4> b = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                                 static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
  out.write(b.data(), 4);
}

ordered_json bilateral_json(const BilateralStackParams& p) {
  ordered_json j = ordered_json::object();
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    j[std::to_string(i)] = {{"sigma_sx", l.sigma_sx()},         {"sigma_sy", l.sigma_sy()},
                            {"sigma_r", l.sigma_r()},           {"raw_sigma_sx", l.raw_sigma_sx},
                            {"raw_sigma_sy", l.raw_sigma_sy},   {"raw_sigma_r", l.raw_sigma_r}};
  }
  return j;
}

ordered_json net_json(const DomainNetParams& p) {
  ordered_json m = ordered_json::array();
  for (const auto& t : p.manifest) m.push_back({{"name", t.name}, {"dims", t.dims}});
  return {{"config",
           {{"base_features", p.config.base_features}, {"depth", p.config.depth}, {"kernel_size", p.config.kernel_size}}},
          {"param_count", p.flat.size()},
          {"manifest", m}};
}

void write_block(std::ostream& out, std::string_view role, std::string_view kind, const ordered_json& j,
                 const std::vector<double>* payload) {
  const std::string text = j.dump();
  const std::size_t count = payload ? payload->size() : 0;
  out << "block " << role << ' ' << kind << ' ' << text.size() << ' ' << count << '\n' << text << '\n';
  if (payload)
    for (double v : *payload) {
      const float f = static_cast<float>(v);
      if (static_cast<double>(f) != v)
        throw ContractError("network parameter is not representable as float32; quantize before saving");
      put_f32(out, f);
    }
}

std::string read_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line)) throw TruncationError(std::string("model file ends before ") + what);
  if (in.eof()) throw TruncationError(std::string("model file ends inside ") + what);
  return line;
}

// "<key> <value>" with a single space.
std::string keyed(const std::string& line, const std::string& key) {
  if (line.rfind(key + " ", 0) != 0) throw FormatError("expected '" + key + " ...', got '" + line + "'");
  return line.substr(key.size() + 1);
}

double json_number(const ordered_json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw ManifestError(std::string("missing numeric field '") + key + "'");
  return j[key].get<double>();
}

BilateralStackParams parse_bilateral(const ordered_json& j) {
  if (!j.is_object() || j.empty()) throw ManifestError("bilateral block must be a non-empty object");
  BilateralStackParams p;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string key = std::to_string(i);
    if (!j.contains(key)) throw ManifestError("bilateral block lacks layer " + key);
    const auto& l = j[key];
    BilateralLayerParams layer{json_number(l, "raw_sigma_sx"), json_number(l, "raw_sigma_sy"),
                               json_number(l, "raw_sigma_r")};
    const std::array<std::pair<const char*, double>, 3> eff = {
        {{"sigma_sx", layer.sigma_sx()}, {"sigma_sy", layer.sigma_sy()}, {"sigma_r", layer.sigma_r()}}};
    for (const auto& [name, value] : eff) {
      const double stored = json_number(l, name);
      if (!(stored > 0.0) || std::abs(stored - value) > 1e-12 * std::max(1.0, value))
        throw ManifestError("layer " + key + " " + name + " disagrees with its raw value");
    }
    p.layers.push_back(layer);
  }
  return p;
}

DomainNetParams parse_net(const ordered_json& j, const std::vector<float>& payload) {
  NetConfig cfg;
  try {
    const auto& c = j.at("config");
    cfg.base_features = c.at("base_features").get<int>();
    cfg.depth = c.at("depth").get<int>();
    cfg.kernel_size = c.at("kernel_size").get<int>();
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ManifestError(std::string("bad network config: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(std::string("bad network config: ") + e.what());
  }
  const auto expected = net_manifest(cfg);
  std::vector<TensorSpec> stored;
  try {
    for (const auto& t : j.at("manifest"))
      stored.push_back({t.at("name").get<std::string>(), t.at("dims").get<std::vector<int>>()});
    if (j.at("param_count").get<std::size_t>() != payload.size())
      throw ManifestError("param_count does not match payload length");
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(std::string("bad network manifest: ") + e.what());
  }
  if (stored != expected) throw ManifestError("network manifest does not match its config");
  if (payload.size() != net_param_count(cfg))
    throw ManifestError("network payload has " + std::to_string(payload.size()) + " values, config needs " +
                        std::to_string(net_param_count(cfg)));
  DomainNetParams p = net_init(cfg, 0);
  for (std::size_t i = 0; i < payload.size(); ++i) {
    if (!std::isfinite(payload[i])) throw ManifestError("network payload holds a non-finite value");
    p.flat.values[i] = static_cast<double>(payload[i]);
  }
  return p;
}

}  // namespace

void write_model(const ModelBundle& bundle, std::ostream& out) {
  bundle.validate();
  out.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  out.put(static_cast<char>(bundle.version));
  out << '\n';
  out << "scheme " << to_string(bundle.scheme) << '\n';
  out << "seed " << bundle.seed << '\n';
  out << "direction " << to_string(bundle.input_contrast) << ':' << to_string(bundle.target_contrast) << '\n';
  const int n = int(bundle.filter.has_value()) + int(bundle.denoiser_net.has_value()) + int(bundle.translator.has_value());
  out << "blocks " << n << '\n';
  if (bundle.filter) write_block(out, "filter", "bilateral_stack", bilateral_json(*bundle.filter), nullptr);
  if (bundle.denoiser_net)
    write_block(out, "denoiser", "domain_net", net_json(*bundle.denoiser_net), &bundle.denoiser_net->flat.values);
  if (bundle.translator)
    write_block(out, "translator", "domain_net", net_json(*bundle.translator), &bundle.translator->flat.values);
  out << "end\n";
  if (!out) throw IoError("failed writing model stream");
}

void write_model(const ModelBundle& bundle, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_model(bundle, out);
}

ModelBundle read_model(std::istream& in) {
  std::string magic(kMagic.size(), '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  if (in.gcount() != static_cast<std::streamsize>(kMagic.size()) || magic != kMagic)
    throw FormatError("not a model file (bad magic)");
  const int version = in.get();
  if (version == std::char_traits<char>::eof()) throw TruncationError("model file ends before the version byte");
  if (version != kModelFormatVersion)
    throw VersionError("unsupported model format version " + std::to_string(version) + " (expected " +
                       std::to_string(kModelFormatVersion) + ")");
  if (in.get() != '\n') throw FormatError("missing newline after version byte");

  ModelBundle b;
  b.version = static_cast<std::uint8_t>(version);
  try {
    b.scheme = scheme_from_string(keyed(read_line(in, "the scheme line"), "scheme"));
  } catch (const ConfigError& e) {
    throw ManifestError(e.what());
  }
  {
    const std::string s = keyed(read_line(in, "the seed line"), "seed");
    std::size_t pos = 0;
    try {
      b.seed = std::stoull(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != s.size()) throw FormatError("malformed seed '" + s + "'");
  }
  {
    const std::string d = keyed(read_line(in, "the direction line"), "direction");
    if (d.size() != 3 || d[1] != ':') throw FormatError("malformed direction '" + d + "'");
    try {
      b.input_contrast = contrast_from_string(d.substr(0, 1));
      b.target_contrast = contrast_from_string(d.substr(2, 1));
    } catch (const ConfigError&) {
      throw FormatError("malformed direction '" + d + "'");
    }
  }
  int n_blocks = 0;
  {
    const std::string s = keyed(read_line(in, "the block count"), "blocks");
    if (s.size() != 1 || s[0] < '0' || s[0] > '3') throw FormatError("malformed block count '" + s + "'");
    n_blocks = s[0] - '0';
  }
  for (int k = 0; k < n_blocks; ++k) {
    std::istringstream hs(keyed(read_line(in, "a block header"), "block"));
    std::string role, kind, extra;
    std::size_t json_len = 0, count = 0;
    if (!(hs >> role >> kind >> json_len >> count) || (hs >> extra)) throw FormatError("malformed block header");
    if (json_len > (1u << 24) || count > (1u << 28)) throw ManifestError("block size out of range");
    std::string text(json_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(json_len));
    if (static_cast<std::size_t>(in.gcount()) != json_len) throw TruncationError("model file ends inside a block");
    const int nl = in.get();
    if (nl == std::char_traits<char>::eof()) throw TruncationError("model file ends inside a block");
    if (nl != '\n') throw ManifestError("block JSON length does not match its header");
    std::vector<float> payload(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::array<unsigned char, 4> buf{};
      in.read(reinterpret_cast<char*>(buf.data()), 4);
      if (in.gcount() != 4) throw TruncationError("model file ends inside a parameter payload");
      payload[i] = std::bit_cast<float>(static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
                                        (static_cast<std::uint32_t>(buf[2]) << 16) |
                                        (static_cast<std::uint32_t>(buf[3]) << 24));
    }
    ordered_json j;
    try {
      j = ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ManifestError(std::string("block JSON does not parse: ") + e.what());
    }
    if (kind == "bilateral_stack") {
      if (role != "filter" || count != 0) throw ManifestError("bilateral block must be the filter without payload");
      if (b.filter) throw ManifestError("duplicate filter block");
      b.filter = parse_bilateral(j);
    } else if (kind == "domain_net") {
      auto& slot = role == "denoiser" ? b.denoiser_net : role == "translator" ? b.translator
                                                                               : throw ManifestError("unknown block role '" + role + "'");
      if (slot) throw ManifestError("duplicate " + role + " block");
      slot = parse_net(j, payload);
    } else {
      throw ManifestError("unknown block kind '" + kind + "'");
    }
  }
  if (read_line(in, "the end marker") != "end") throw ManifestError("missing end marker");
  if (in.peek() != std::char_traits<char>::eof()) throw ManifestError("trailing bytes after end marker");
  try {
    b.validate();
  } catch (const ContractError& e) {
    throw ManifestError(e.what());
  }
  return b;
}

ModelBundle read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_model(in);
}

}  // namespace n2c

#include "n2c/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "n2c/errors.hpp"

namespace n2c {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  KeyValueConfig kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value', got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (kv.has(key)) throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    kv.set(key, trim(t.substr(eq + 1)));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool KeyValueConfig::has(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
}

const std::string& KeyValueConfig::get(const std::string& key) const {
  for (const auto& e : entries_)
    if (e.first == key) return e.second;
  throw ConfigError("missing config key '" + key + "'");
}

void KeyValueConfig::set(const std::string& key, std::string value) {
  for (auto& e : entries_)
    if (e.first == key) {
      e.second = std::move(value);
      return;
    }
  entries_.emplace_back(key, std::move(value));
}

double KeyValueConfig::get_double(const std::string& key) const {
  const std::string& s = get(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (...) {
  }
  throw ConfigError("config key '" + key + "' expects a number, got '" + s + "'");
}

long long KeyValueConfig::get_int(const std::string& key) const {
  const std::string& s = get(key);
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("config key '" + key + "' expects an integer, got '" + s + "'");
  return v;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key) const {
  const std::string& s = get(key);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + s + "'");
  return v;
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    KeyValueConfig tmp;
    tmp.set(key, trim(item));
    out.push_back(tmp.get_double(key));
  }
  return out;
}

void KeyValueConfig::check_known(const std::vector<std::string>& allowed) const {
  std::string unknown;
  for (const auto& e : entries_)
    if (std::find(allowed.begin(), allowed.end(), e.first) == allowed.end())
      unknown += (unknown.empty() ? "" : ", ") + e.first;
  if (!unknown.empty()) throw ConfigError("unknown config key(s): " + unknown);
}

std::string KeyValueConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + v + "\n";
  return out;
}

std::vector<std::string> generate_keys() {
  return {"size",         "n_slices",       "n_regions",      "noise_rel_std",  "noise_kind", "seed",
          "corr_sigma",   "max_drift_px",   "n_realizations", "contrast_map_a", "contrast_map_b"};
}

GenerateSettings generate_settings_from(const KeyValueConfig& kv) {
  kv.check_known(generate_keys());
  GenerateSettings s;
  auto& p = s.phantom;
  p.size = static_cast<int>(kv.get_int("size"));
  p.n_slices = static_cast<int>(kv.get_int("n_slices"));
  p.n_regions = static_cast<int>(kv.get_int("n_regions"));
  p.noise_rel_std = kv.get_double("noise_rel_std");
  p.noise_kind = noise_kind_from_string(kv.get("noise_kind"));
  s.seed = kv.get_u64("seed");
  if (kv.has("corr_sigma")) p.corr_sigma = kv.get_double("corr_sigma");
  if (kv.has("max_drift_px")) p.max_drift_px = kv.get_double("max_drift_px");
  if (kv.has("n_realizations")) p.n_realizations = static_cast<int>(kv.get_int("n_realizations"));
  if (kv.has("contrast_map_a")) p.contrast_map_a = kv.get_doubles("contrast_map_a");
  if (kv.has("contrast_map_b")) p.contrast_map_b = kv.get_doubles("contrast_map_b");
  p.validate();
  return s;
}

KeyValueConfig to_key_values(const GenerateSettings& s) {
  KeyValueConfig kv;
  const auto& p = s.phantom;
  kv.set("size", std::to_string(p.size));
  kv.set("n_slices", std::to_string(p.n_slices));
  kv.set("n_regions", std::to_string(p.n_regions));
  kv.set("noise_rel_std", format_double(p.noise_rel_std));
  kv.set("noise_kind", std::string(to_string(p.noise_kind)));
  kv.set("seed", std::to_string(s.seed));
  kv.set("corr_sigma", format_double(p.corr_sigma));
  kv.set("max_drift_px", format_double(p.max_drift_px));
  kv.set("n_realizations", std::to_string(p.n_realizations));
  auto join = [](const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
    return out;
  };
  if (!p.contrast_map_a.empty()) {
    kv.set("contrast_map_a", join(p.contrast_map_a));
    kv.set("contrast_map_b", join(p.contrast_map_b));
  }
  return kv;
}

std::vector<std::string> train_keys() {
  return {"scheme",       "lr",           "filter_lr",    "max_epochs",        "patience",
          "seed",         "direction",    "n2v_mask_fraction", "n2v_replace_radius", "neighbor_offset",
          "n_val_slices", "n_test_slices", "stack_depth", "base_features",     "depth",
          "ssim_window",  "ssim_k1",      "ssim_k2",      "ssim_gaussian_sigma"};
}

TrainConfig train_config_from(const KeyValueConfig& kv, const TrainConfig& base) {
  kv.check_known(train_keys());
  TrainConfig c = base;
  if (kv.has("scheme")) c.scheme = scheme_from_string(kv.get("scheme"));
  if (kv.has("lr")) c.lr = kv.get_double("lr");
  if (kv.has("filter_lr")) c.filter_lr = kv.get_double("filter_lr");
  if (kv.has("max_epochs")) c.max_epochs = static_cast<int>(kv.get_int("max_epochs"));
  if (kv.has("patience")) c.patience = static_cast<int>(kv.get_int("patience"));
  if (kv.has("seed")) c.seed = kv.get_u64("seed");
  if (kv.has("direction")) {
    const std::string& d = kv.get("direction");
    const auto colon = d.find(':');
    if (colon == std::string::npos) throw ConfigError("direction must look like A:B, got '" + d + "'");
    c.input_contrast = contrast_from_string(d.substr(0, colon));
    c.target_contrast = contrast_from_string(d.substr(colon + 1));
  }
  if (kv.has("n2v_mask_fraction")) c.n2v_mask_fraction = kv.get_double("n2v_mask_fraction");
  if (kv.has("n2v_replace_radius")) c.n2v_replace_radius = static_cast<int>(kv.get_int("n2v_replace_radius"));
  if (kv.has("neighbor_offset")) c.neighbor_offset = static_cast<int>(kv.get_int("neighbor_offset"));
  if (kv.has("n_val_slices")) c.n_val_slices = static_cast<int>(kv.get_int("n_val_slices"));
  if (kv.has("n_test_slices")) c.n_test_slices = static_cast<int>(kv.get_int("n_test_slices"));
  if (kv.has("stack_depth")) c.stack_depth = static_cast<int>(kv.get_int("stack_depth"));
  if (kv.has("base_features")) c.net.base_features = static_cast<int>(kv.get_int("base_features"));
  if (kv.has("depth")) c.net.depth = static_cast<int>(kv.get_int("depth"));
  if (kv.has("ssim_window")) c.metrics.ssim_window = static_cast<int>(kv.get_int("ssim_window"));
  if (kv.has("ssim_k1")) c.metrics.ssim_k1 = kv.get_double("ssim_k1");
  if (kv.has("ssim_k2")) c.metrics.ssim_k2 = kv.get_double("ssim_k2");
  if (kv.has("ssim_gaussian_sigma")) c.metrics.ssim_gaussian_sigma = kv.get_double("ssim_gaussian_sigma");
  c.validate();
  return c;
}

KeyValueConfig to_key_values(const TrainConfig& c) {
  KeyValueConfig kv;
  kv.set("scheme", std::string(to_string(c.scheme)));
  kv.set("lr", format_double(c.lr));
  kv.set("filter_lr", format_double(c.filter_lr));
  kv.set("max_epochs", std::to_string(c.max_epochs));
  kv.set("patience", std::to_string(c.patience));
  kv.set("seed", std::to_string(c.seed));
  kv.set("direction", std::string(to_string(c.input_contrast)) + ":" + std::string(to_string(c.target_contrast)));
  kv.set("n2v_mask_fraction", format_double(c.n2v_mask_fraction));
  kv.set("n2v_replace_radius", std::to_string(c.n2v_replace_radius));
  kv.set("neighbor_offset", std::to_string(c.neighbor_offset));
  kv.set("n_val_slices", std::to_string(c.n_val_slices));
  kv.set("n_test_slices", std::to_string(c.n_test_slices));
  kv.set("stack_depth", std::to_string(c.stack_depth));
  kv.set("base_features", std::to_string(c.net.base_features));
  kv.set("depth", std::to_string(c.net.depth));
  kv.set("ssim_window", std::to_string(c.metrics.ssim_window));
  kv.set("ssim_k1", format_double(c.metrics.ssim_k1));
  kv.set("ssim_k2", format_double(c.metrics.ssim_k2));
  kv.set("ssim_gaussian_sigma", format_double(c.metrics.ssim_gaussian_sigma));
  return kv;
}

}  // namespace n2c

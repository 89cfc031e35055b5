#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "n2c/phantom.hpp"
#include "n2c/training.hpp"

namespace n2c {

// Flat "key = value" text configuration. Blank lines and lines starting with
// '#' are ignored. Keys keep their first-seen order for stable echoes.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);  // ConfigError with line number
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // ConfigError naming the key
  void set(const std::string& key, std::string value);
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string get_string(const std::string& key) const { return get(key); }
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;  // comma separated

  // Throws ConfigError naming every key not in `allowed`.
  void check_known(const std::vector<std::string>& allowed) const;
  std::string to_text() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Phantom settings. Keys: size, n_slices, n_regions, noise_rel_std,
// noise_kind, seed are required; corr_sigma, max_drift_px, n_realizations,
// contrast_map_a, contrast_map_b are optional.
struct GenerateSettings {
  PhantomConfig phantom;
  std::uint64_t seed = 7;
};
GenerateSettings generate_settings_from(const KeyValueConfig& kv);
KeyValueConfig to_key_values(const GenerateSettings& s);
std::vector<std::string> generate_keys();

// Training settings. Every key is optional; missing keys keep the desk-scale
// defaults of the chosen scheme.
TrainConfig train_config_from(const KeyValueConfig& kv, const TrainConfig& base);
KeyValueConfig to_key_values(const TrainConfig& cfg);
std::vector<std::string> train_keys();

std::string format_double(double v);  // shortest text that round-trips

}  // namespace n2c

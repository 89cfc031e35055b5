#include <string>

#include "doctest.h"
#include "n2c/config.hpp"
#include "n2c/errors.hpp"

using namespace n2c;

namespace {

std::string message_of(const std::string& text) {
  try {
    KeyValueConfig::parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("key = value parsing keeps order and skips comments") {
  const auto kv = KeyValueConfig::parse("# comment\n\nsize = 32\n  noise_kind=correlated_gaussian  \nlr = 1e-3\n");
  REQUIRE(kv.entries().size() == 3);
  CHECK(kv.entries()[0].first == "size");
  CHECK(kv.get_int("size") == 32);
  CHECK(kv.get("noise_kind") == "correlated_gaussian");
  CHECK(kv.get_double("lr") == 1e-3);
}

TEST_CASE("parse errors carry the line number") {
  CHECK(message_of("a = 1\nbroken\n").find("line 2") != std::string::npos);
  CHECK(message_of("a = 1\na = 2\n").find("duplicate") != std::string::npos);
  CHECK(message_of(" = 3\n").find("empty key") != std::string::npos);
}

TEST_CASE("typed getters reject malformed values and name the key") {
  const auto kv = KeyValueConfig::parse("x = 1.5abc\nn = 2.5\nu = -1\nv = 0.1, 0.2 ,0.3\n");
  CHECK_THROWS_WITH_AS(kv.get_double("x"), doctest::Contains("'x'"), ConfigError);
  CHECK_THROWS_AS(kv.get_int("n"), ConfigError);
  CHECK_THROWS_AS(kv.get_u64("u"), ConfigError);
  CHECK_THROWS_WITH_AS(kv.get("missing"), doctest::Contains("missing"), ConfigError);
  CHECK(kv.get_doubles("v") == std::vector<double>{0.1, 0.2, 0.3});
}

TEST_CASE("unknown keys are listed") {
  const auto kv = KeyValueConfig::parse("size = 1\nszie = 2\n");
  CHECK_THROWS_WITH_AS(kv.check_known({"size"}), doctest::Contains("szie"), ConfigError);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1e-300, 5e-5, 123456789.123, -0.0, 1.0 / 3.0}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("generate settings round trip through key = value text") {
  GenerateSettings s;
  s.seed = 99;
  s.phantom.noise_kind = NoiseKind::kCorrelated;
  s.phantom.contrast_map_a = {0, 0.2, 0.4, 0.6, 0.8, 1.0};
  s.phantom.contrast_map_b = {0, 1.0, 0.8, 0.6, 0.4, 0.2};
  const auto kv = KeyValueConfig::parse(to_key_values(s).to_text());
  const auto back = generate_settings_from(kv);
  CHECK(back.seed == 99);
  CHECK(back.phantom.noise_kind == NoiseKind::kCorrelated);
  CHECK(back.phantom.contrast_map_b == s.phantom.contrast_map_b);
  CHECK(to_key_values(back).to_text() == to_key_values(s).to_text());
}

TEST_CASE("train settings round trip and fill missing keys from the base") {
  TrainConfig base = TrainConfig::desk_scale(Scheme::kN2vBfs);
  base.seed = 4;
  base.n2v_mask_fraction = 0.02;
  const auto back = train_config_from(KeyValueConfig::parse(to_key_values(base).to_text()), TrainConfig{});
  CHECK(to_key_values(back).to_text() == to_key_values(base).to_text());
  const auto partial = train_config_from(KeyValueConfig::parse("max_epochs = 3\n"), base);
  CHECK(partial.max_epochs == 3);
  CHECK(partial.n2v_mask_fraction == 0.02);
  CHECK_THROWS_AS(train_config_from(KeyValueConfig::parse("max_epoch = 3\n"), base), ConfigError);
}

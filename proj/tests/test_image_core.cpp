#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "n2c/errors.hpp"
#include "n2c/image_io.hpp"
#include "n2c/metrics.hpp"
#include "n2c/noise.hpp"
#include "n2c/parallel.hpp"
#include "n2c/phantom.hpp"

using namespace n2c;
using namespace n2c::test;

TEST_CASE("derive_seed separates streams and is stable") {
  CHECK(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
  CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
  CHECK(derive_seed(7, {1}) != derive_seed(8, {1}));
  CHECK(derive_seed(7, {0}) != derive_seed(7, {}));
}

TEST_CASE("Rng uniform and normal moments") {
  Rng rng(123);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.01);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
    CHECK(rng.below(7) < 7u);
  }
}

TEST_CASE("Image invariants") {
  Image img(4, 3);
  CHECK(img.size() == 12);
  img.validate();
  img.data.pop_back();
  CHECK_THROWS_AS(img.validate(), DataError);
  Image bad(2, 2);
  bad.data[1] = std::nanf("");
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("gaussian noise on a constant image has the requested std") {
  const Image flat = constant_image(64, 64, 0.5f);
  const Image noisy = add_gaussian_noise(flat, 0.05, 11);
  const Grid d = difference(noisy, flat);
  CHECK(sample_std(d.v) == doctest::Approx(0.05 * 0.5).epsilon(0.05));
  CHECK(add_gaussian_noise(flat, 0.05, 11) == noisy);
  CHECK(add_gaussian_noise(flat, 0.05, 12) != noisy);
}

TEST_CASE("noise is not clipped") {
  const Image ones = constant_image(64, 64, 1.0f);
  const Image noisy = add_gaussian_noise(ones, 0.05, 3);
  CHECK(noisy.max_value() > 1.0f);
}

TEST_CASE("noise rejects bad input") {
  Image img = constant_image(8, 8, 0.5f);
  CHECK_THROWS_AS(add_gaussian_noise(img, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(add_correlated_noise(img, 0.05, 0.0, 1), ConfigError);
  img.data[3] = INFINITY;
  CHECK_THROWS_AS(add_gaussian_noise(img, 0.05, 1), DataError);
  CHECK_THROWS_AS(add_correlated_noise(img, 0.05, 1.0, 1), DataError);
}

TEST_CASE("gaussian noise PSNR anchor is -20 log10(r)") {
  // A textured [0,1] image with maximum exactly 1.
  Image ref(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) ref.data[y * 64 + x] = static_cast<float>(0.5 + 0.5 * std::sin(0.2 * x) * std::cos(0.15 * y));
  ref.data[0] = 1.0f;
  MetricConfig mc;
  mc.data_range = ref.max_value();
  double mean = 0.0;
  for (std::uint64_t s = 0; s < 8; ++s) mean += psnr(add_gaussian_noise(ref, 0.05, s).to_grid(), ref.to_grid(), mc);
  mean /= 8.0;
  CHECK(std::abs(mean - (-20.0 * std::log10(0.05))) < 0.3);
}

TEST_CASE("correlated noise: std and autocorrelation") {
  const Image flat = constant_image(64, 64, 0.8f);
  const Image wide = add_correlated_noise(flat, 0.05, 2.0, 5);
  const Grid dw = difference(wide, flat);
  CHECK(sample_std(dw.v) == doctest::Approx(0.05 * 0.8).epsilon(0.05));
  CHECK(lag1_autocorrelation(dw) > 0.5);

  const Image narrow = add_correlated_noise(flat, 0.05, 0.01, 5);
  const Grid dn = difference(narrow, flat);
  CHECK(std::abs(lag1_autocorrelation(dn)) < 0.05);
  CHECK(sample_std(dn.v) == doctest::Approx(0.05 * 0.8).epsilon(0.05));
  CHECK(add_correlated_noise(flat, 0.05, 2.0, 5) == wide);
}

TEST_CASE("image file round trip is bit exact") {
  Image img(7, 5, Contrast::B, 3);
  Rng rng(9);
  for (float& v : img.data) v = static_cast<float>(rng.normal());
  img.data[2] = -0.0f;
  img.data[4] = 1e-40f;  // subnormal
  std::stringstream ss;
  write_image(img, ss);
  const Image back = read_image(ss);
  CHECK(back == img);
  CHECK(std::signbit(back.data[2]));

  const auto dir = temp_dir("img");
  write_image(img, dir / "x.n2c");
  CHECK(read_image(dir / "x.n2c") == img);
  std::filesystem::remove_all(dir);
}

TEST_CASE("image file errors are distinct") {
  std::stringstream good;
  write_image(constant_image(64, 64, 0.25f), good);
  const std::string bytes = good.str();

  SUBCASE("truncated payload") {
    // Header advertises 64x64 but only 100 values follow.
    std::string s = "N2CIMG1\n64 64 A -1\n" + std::string(400, '\0');
    std::stringstream in(s);
    CHECK_THROWS_AS(read_image(in), TruncationError);
  }
  SUBCASE("wrong magic") {
    std::string s = bytes;
    s[3] = 'X';
    std::stringstream in(s);
    CHECK_THROWS_AS(read_image(in), FormatError);
  }
  SUBCASE("malformed header") {
    std::stringstream in("N2CIMG1\n64 sixty A -1\n");
    CHECK_THROWS_AS(read_image(in), FormatError);
    std::stringstream in2("N2CIMG1\n64 64 C -1\n");
    CHECK_THROWS_AS(read_image(in2), FormatError);
  }
  SUBCASE("payload longer than the header") {
    std::stringstream in(bytes + std::string(4, '\0'));
    CHECK_THROWS_AS(read_image(in), DimensionError);
  }
  SUBCASE("all are data errors") {
    std::stringstream in("garbage");
    try {
      read_image(in);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.exit_code() == ExitCode::kData);
    }
  }
}

TEST_CASE("phantom generation is deterministic") {
  PhantomConfig cfg;
  cfg.size = 64;
  cfg.n_slices = 8;
  const auto a = generate_phantom(cfg, 7);
  const auto b = generate_phantom(cfg, 7);
  REQUIRE(a.slices.size() == 8);
  for (std::size_t i = 0; i < a.slices.size(); ++i) {
    CHECK(a.slices[i].clean_a == b.slices[i].clean_a);
    CHECK(a.slices[i].clean_b == b.slices[i].clean_b);
    CHECK(a.slices[i].noisy_a == b.slices[i].noisy_a);
    CHECK(a.slices[i].noisy_b == b.slices[i].noisy_b);
  }
  const auto c = generate_phantom(cfg, 8);
  CHECK(c.slices[0].noisy_a[0] != a.slices[0].noisy_a[0]);
}

TEST_CASE("phantom does not depend on the thread count") {
  PhantomConfig cfg;
  cfg.n_slices = 4;
  setenv("N2C_THREADS", "1", 1);
  const auto one = generate_phantom(cfg, 3);
  setenv("N2C_THREADS", "3", 1);
  const auto three = generate_phantom(cfg, 3);
  unsetenv("N2C_THREADS");
  for (std::size_t i = 0; i < one.slices.size(); ++i) {
    CHECK(one.slices[i].noisy_a == three.slices[i].noisy_a);
    CHECK(one.slices[i].noisy_b == three.slices[i].noisy_b);
  }
}

TEST_CASE("phantom structure") {
  PhantomConfig cfg;
  const auto vol = generate_phantom(cfg, 7);
  vol.validate();
  const auto maps = phantom_contrast_maps(cfg, 7);
  double max_diff = 0.0;
  for (std::size_t r = 0; r < maps.a.size(); ++r) max_diff = std::max(max_diff, std::abs(maps.a[r] - maps.b[r]));
  CHECK(max_diff > 0.1);

  for (std::size_t i = 0; i < vol.slices.size(); ++i) {
    const auto& s = vol.slices[i];
    CHECK(s.clean_a.max_value() <= 1.0f);
    CHECK(*std::min_element(s.clean_a.data.begin(), s.clean_a.data.end()) >= 0.0f);
    CHECK(s.noisy_a.size() >= 2);
    CHECK(s.noisy_b.size() >= 2);
    CHECK(s.noisy_a[0].realization_id != s.noisy_a[1].realization_id);
    // Both contrasts come from one label map: equal labels give equal values.
    const auto labels = phantom_labels(cfg, 7, static_cast<int>(i));
    for (std::size_t p = 0; p < labels.size(); ++p) {
      CHECK(s.clean_a.data[p] == static_cast<float>(maps.a[static_cast<std::size_t>(labels[p])]));
      CHECK(s.clean_b.data[p] == static_cast<float>(maps.b[static_cast<std::size_t>(labels[p])]));
    }
  }
}

namespace {

std::vector<std::pair<double, double>> boundary_points(const PhantomShape& e, int n) {
  std::vector<std::pair<double, double>> pts;
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * M_PI * i / n;
    const double u = e.rx * std::cos(t), v = e.ry * std::sin(t);
    pts.push_back({e.cx + c * u - s * v, e.cy + s * u + c * v});
  }
  return pts;
}

double distance_to(const std::vector<std::pair<double, double>>& pts, double x, double y) {
  double best = INFINITY;
  for (auto [px, py] : pts) best = std::min(best, std::hypot(px - x, py - y));
  return best;
}

bool inside(const PhantomShape& e, double x, double y) {
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  const double u = c * (x - e.cx) + s * (y - e.cy), v = -s * (x - e.cx) + c * (y - e.cy);
  return u * u / (e.rx * e.rx) + v * v / (e.ry * e.ry) <= 1.0;
}

}  // namespace

TEST_CASE("label maps are the painter's-order rasterization of the shapes") {
  PhantomConfig cfg;
  for (int slice : {0, 3, 7}) {
    const auto shapes = phantom_shapes(cfg, 7, slice);
    const auto labels = phantom_labels(cfg, 7, slice);
    for (int y = 0; y < cfg.size; ++y)
      for (int x = 0; x < cfg.size; ++x) {
        int l = 0;
        for (const auto& e : shapes)
          if (inside(e, x + 0.5, y + 0.5)) l = e.label;
        CHECK(labels[static_cast<std::size_t>(y * cfg.size + x)] == l);
      }
  }
}

TEST_CASE("region boundaries move by at most 2 px between adjacent slices") {
  for (std::uint64_t seed : {7u, 8u, 42u}) {
    PhantomConfig cfg;
    int moved = 0;
    for (int s = 0; s + 1 < cfg.n_slices; ++s) {
      const auto a = phantom_shapes(cfg, seed, s);
      const auto b = phantom_shapes(cfg, seed, s + 1);
      REQUIRE(a.size() == b.size());
      std::vector<std::vector<std::pair<double, double>>> edges_a;
      for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].label == b[k].label);
        const auto pa = boundary_points(a[k], 720);
        const auto pb = boundary_points(b[k], 4000);
        double hausdorff = 0.0;
        for (auto [x, y] : pa) hausdorff = std::max(hausdorff, distance_to(pb, x, y));
        for (auto [x, y] : boundary_points(b[k], 720)) hausdorff = std::max(hausdorff, distance_to(boundary_points(a[k], 4000), x, y));
        CHECK(hausdorff <= 2.0);
        edges_a.push_back(boundary_points(a[k], 2000));
      }
      // A pixel can only change label when a shape boundary passes within
      // 2 px of its sample point.
      const auto la = phantom_labels(cfg, seed, s);
      const auto lb = phantom_labels(cfg, seed, s + 1);
      for (int y = 0; y < cfg.size; ++y)
        for (int x = 0; x < cfg.size; ++x) {
          if (la[static_cast<std::size_t>(y * cfg.size + x)] == lb[static_cast<std::size_t>(y * cfg.size + x)]) continue;
          ++moved;
          double nearest = INFINITY;
          for (const auto& e : edges_a) nearest = std::min(nearest, distance_to(e, x + 0.5, y + 0.5));
          CHECK(nearest <= 2.0 + 0.05);
        }
    }
    CHECK(moved > 0);
  }
}

TEST_CASE("noise realizations are independent across contrasts") {
  PhantomConfig cfg;
  cfg.n_slices = 2;
  const auto vol = generate_phantom(cfg, 5);
  const auto& s = vol.slices[0];
  const Grid na = difference(s.noisy_a[0], s.clean_a);
  const Grid nb = difference(s.noisy_b[0], s.clean_b);
  const double ma = grid_mean(na), mb = grid_mean(nb);
  double num = 0, da = 0, db = 0;
  for (std::size_t i = 0; i < na.size(); ++i) {
    num += (na.v[i] - ma) * (nb.v[i] - mb);
    da += (na.v[i] - ma) * (na.v[i] - ma);
    db += (nb.v[i] - mb) * (nb.v[i] - mb);
  }
  CHECK(std::abs(num / std::sqrt(da * db)) < 0.05);
}

TEST_CASE("phantom noisy PSNR matches the 5% anchor") {
  PhantomConfig cfg;
  const auto vol = generate_phantom(cfg, 7);
  MetricConfig mc;
  mc.data_range = vol.clean_max(Contrast::A);
  double mean = 0.0;
  for (const auto& s : vol.slices) mean += psnr(s.noisy_a[0].to_grid(), s.clean_a.to_grid(), mc);
  mean /= static_cast<double>(vol.slices.size());
  CHECK(std::abs(mean - 26.02) < 0.3);
}

TEST_CASE("phantom config validation names the bound") {
  auto message = [](const PhantomConfig& c) {
    try {
      c.validate();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  PhantomConfig c;
  c.size = 8;
  CHECK(message(c).find("size") != std::string::npos);
  c = {};
  c.noise_rel_std = 0.0;
  CHECK(message(c).find("noise_rel_std") != std::string::npos);
  c = {};
  c.n_regions = 1;
  c.contrast_map_a = {0.5};
  c.contrast_map_b = {0.5};
  CHECK_THROWS_AS(generate_phantom(c, 1), ConfigError);
  c = {};
  c.n_regions = 3;
  c.contrast_map_a = {0.0, 0.5, 1.0};
  c.contrast_map_b = {0.0, 0.55, 0.95};
  CHECK(message(c).find("differ") != std::string::npos);
  c.contrast_map_b = {0.0, 1.0, 0.5};
  CHECK(message(c).empty());
  c = {};
  c.max_drift_px = 3.0;
  CHECK(message(c).find("max_drift_px") != std::string::npos);
}

TEST_CASE("parallel_for visits each index once") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
}

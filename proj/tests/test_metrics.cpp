#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "n2c/errors.hpp"
#include "n2c/metrics.hpp"
#include "n2c/rng.hpp"

using namespace n2c;
using namespace n2c::test;

namespace {

Grid noisy(const Grid& a, double sd, std::uint64_t seed) {
  Rng rng(seed);
  Grid b = a;
  for (double& v : b.v) v += sd * rng.normal();
  return b;
}

}  // namespace

TEST_CASE("PSNR of a constant offset") {
  const Grid ref = random_grid(32, 24, 1);
  Grid pred = ref;
  for (double& v : pred.v) v += 0.1;
  MetricConfig cfg;
  CHECK(psnr(pred, ref, cfg) == doctest::Approx(20.0).epsilon(1e-12));
  cfg.data_range = 2.0;
  CHECK(psnr(pred, ref, cfg) == doctest::Approx(20.0 + 20.0 * std::log10(2.0)).epsilon(1e-12));
}

TEST_CASE("identical images: PSNR is infinite and SSIM is one") {
  const Grid a = random_grid(16, 16, 2);
  MetricConfig cfg;
  CHECK(std::isinf(psnr(a, a, cfg)));
  CHECK(psnr(a, a, cfg) > 0);
  CHECK(ssim(a, a, cfg) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("SSIM is symmetric and bounded") {
  const Grid a = random_grid(20, 18, 3);
  const Grid b = random_grid(20, 18, 4);
  MetricConfig cfg;
  const double s = ssim(a, b, cfg);
  CHECK(s == doctest::Approx(ssim(b, a, cfg)).epsilon(1e-14));
  CHECK(s <= 1.0);
  CHECK(s >= -1.0);
}

TEST_CASE("SSIM of an anti-correlated image is negative") {
  const Grid a = random_grid(24, 24, 5);
  Grid b = a;
  for (double& v : b.v) v = 1.0 - v;
  CHECK(ssim(a, b, MetricConfig{}) < 0.0);
}

TEST_CASE("SSIM on a single 7x7 window matches a two-pass computation") {
  const Grid a = random_grid(7, 7, 6);
  const Grid b = random_grid(7, 7, 7, -0.5, 1.5);
  MetricConfig cfg;
  cfg.data_range = 2.0;

  double w[7][7], wsum = 0.0;
  for (int j = 0; j < 7; ++j)
    for (int i = 0; i < 7; ++i) {
      w[j][i] = std::exp(-((i - 3.0) * (i - 3.0) + (j - 3.0) * (j - 3.0)) / (2.0 * 1.5 * 1.5));
      wsum += w[j][i];
    }
  double ma = 0.0, mb = 0.0;
  for (int j = 0; j < 7; ++j)
    for (int i = 0; i < 7; ++i) {
      ma += w[j][i] / wsum * a.at(i, j);
      mb += w[j][i] / wsum * b.at(i, j);
    }
  double va = 0.0, vb = 0.0, cab = 0.0;
  for (int j = 0; j < 7; ++j)
    for (int i = 0; i < 7; ++i) {
      const double k = w[j][i] / wsum;
      va += k * (a.at(i, j) - ma) * (a.at(i, j) - ma);
      vb += k * (b.at(i, j) - mb) * (b.at(i, j) - mb);
      cab += k * (a.at(i, j) - ma) * (b.at(i, j) - mb);
    }
  const double c1 = std::pow(0.01 * 2.0, 2), c2 = std::pow(0.03 * 2.0, 2);
  const double expected = (2 * ma * mb + c1) * (2 * cab + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  CHECK(ssim(a, b, cfg) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("tiny noise keeps SSIM near one") {
  const Grid a = random_grid(32, 32, 8);
  const Grid b = noisy(a, 1e-4, 9);
  CHECK(ssim(b, a, MetricConfig{}) > 0.999);
}

TEST_CASE("PSNR falls and SSIM falls as noise grows") {
  const Grid a = random_grid(48, 48, 10);
  double last_psnr = INFINITY, last_ssim = 1.0;
  for (double sd : {0.01, 0.03, 0.1, 0.3}) {
    const Grid b = noisy(a, sd, 11);
    const double p = psnr(b, a, MetricConfig{});
    const double s = ssim(b, a, MetricConfig{});
    CHECK(p < last_psnr);
    CHECK(s < last_ssim);
    last_psnr = p;
    last_ssim = s;
  }
}

TEST_CASE("metric contract and config errors") {
  MetricConfig cfg;
  CHECK_THROWS_AS(psnr(Grid(4, 4), Grid(4, 5), cfg), ContractError);
  CHECK_THROWS_AS(ssim(Grid(6, 6), Grid(6, 6), cfg), ContractError);
  cfg.data_range = 0.0;
  CHECK_THROWS_AS(psnr(Grid(4, 4), Grid(4, 4), cfg), ConfigError);
  cfg = MetricConfig{};
  cfg.ssim_window = 6;
  CHECK_THROWS_AS(ssim(Grid(8, 8), Grid(8, 8), cfg), ConfigError);
}

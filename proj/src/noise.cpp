#include "n2c/noise.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "n2c/errors.hpp"
#include "n2c/rng.hpp"

namespace n2c {
namespace {

void check_input(const Image& img) {
  img.validate();
}

Image add_field(const Image& img, const std::vector<double>& field) {
  Image out = img;
  for (std::size_t i = 0; i < field.size(); ++i)
    out.data[i] = static_cast<float>(static_cast<double>(img.data[i]) + field[i]);
  return out;
}

}  // namespace

Image add_gaussian_noise_abs(const Image& img, double std_dev, std::uint64_t seed) {
  check_input(img);
  if (!(std_dev >= 0.0) || !std::isfinite(std_dev)) throw ConfigError("noise std must be finite and >= 0");
  Rng rng(seed);
  std::vector<double> field(img.size());
  for (double& n : field) n = std_dev * rng.normal();
  return add_field(img, field);
}

Image add_gaussian_noise(const Image& img, double rel_std, std::uint64_t seed) {
  if (!(rel_std > 0.0)) throw ConfigError("rel_std must be > 0, got " + std::to_string(rel_std));
  check_input(img);
  return add_gaussian_noise_abs(img, rel_std * img.max_value(), seed);
}

Image add_correlated_noise_abs(const Image& img, double std_dev, double corr_sigma, std::uint64_t seed) {
  check_input(img);
  if (!(corr_sigma > 0.0)) throw ConfigError("corr_sigma must be > 0, got " + std::to_string(corr_sigma));
  if (!(std_dev >= 0.0) || !std::isfinite(std_dev)) throw ConfigError("noise std must be finite and >= 0");

  // The iid field is generated on a padded canvas so that the smoothed field
  // has the same statistics at the image border as in the interior.
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * corr_sigma)));
  const int pw = img.width + 2 * radius;
  const int ph = img.height + 2 * radius;
  Rng rng(seed);
  std::vector<double> raw(static_cast<std::size_t>(pw) * ph);
  for (double& n : raw) n = rng.normal();

  std::vector<double> kernel(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i)
    kernel[i + radius] = std::exp(-0.5 * (i * i) / (corr_sigma * corr_sigma));

  // Separable pass: horizontal on the padded canvas, then vertical into the crop.
  std::vector<double> horiz(static_cast<std::size_t>(img.width) * ph, 0.0);
  for (int y = 0; y < ph; ++y)
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * raw[static_cast<std::size_t>(y) * pw + x + radius + k];
      horiz[static_cast<std::size_t>(y) * img.width + x] = s;
    }
  std::vector<double> field(img.size(), 0.0);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k)
        s += kernel[k + radius] * horiz[static_cast<std::size_t>(y + radius + k) * img.width + x];
      field[static_cast<std::size_t>(y) * img.width + x] = s;
    }

  double mean = 0.0;
  for (double f : field) mean += f;
  mean /= static_cast<double>(field.size());
  double var = 0.0;
  for (double f : field) var += (f - mean) * (f - mean);
  var /= static_cast<double>(field.size() > 1 ? field.size() - 1 : 1);
  const double scale = var > 0.0 ? std_dev / std::sqrt(var) : 0.0;
  for (double& f : field) f *= scale;
  return add_field(img, field);
}

Image add_correlated_noise(const Image& img, double rel_std, double corr_sigma, std::uint64_t seed) {
  if (!(rel_std > 0.0)) throw ConfigError("rel_std must be > 0, got " + std::to_string(rel_std));
  check_input(img);
  return add_correlated_noise_abs(img, rel_std * img.max_value(), corr_sigma, seed);
}

}  // namespace n2c

#include "n2c/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "n2c/errors.hpp"

namespace n2c {

void MetricConfig::validate() const {
  if (!(data_range > 0.0)) throw ConfigError("data_range must be > 0");
  if (ssim_window < 3 || ssim_window % 2 == 0) throw ConfigError("ssim_window must be odd and >= 3");
  if (!(ssim_gaussian_sigma > 0.0)) throw ConfigError("ssim_gaussian_sigma must be > 0");
}

namespace {

void check_shapes(const Grid& a, const Grid& b) {
  if (!a.same_shape(b) || a.size() == 0)
    throw ContractError("metric inputs differ in shape: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                        " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
}

}  // namespace

double mse(const Grid& a, const Grid& b) {
  check_shapes(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.v[i] - b.v[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr(const Grid& pred, const Grid& ref, const MetricConfig& cfg) {
  cfg.validate();
  const double m = mse(pred, ref);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(cfg.data_range * cfg.data_range / m);
}

double ssim(const Grid& pred, const Grid& ref, const MetricConfig& cfg) {
  cfg.validate();
  check_shapes(pred, ref);
  const int win = cfg.ssim_window;
  if (pred.width < win || pred.height < win)
    throw ContractError("image " + std::to_string(pred.width) + "x" + std::to_string(pred.height) +
                        " is smaller than the SSIM window " + std::to_string(win));

  const int r = win / 2;
  std::vector<double> kernel(static_cast<std::size_t>(win) * win);
  double ksum = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * cfg.ssim_gaussian_sigma * cfg.ssim_gaussian_sigma));
      kernel[static_cast<std::size_t>(dy + r) * win + dx + r] = w;
      ksum += w;
    }
  for (double& w : kernel) w /= ksum;

  const double c1 = (cfg.ssim_k1 * cfg.data_range) * (cfg.ssim_k1 * cfg.data_range);
  const double c2 = (cfg.ssim_k2 * cfg.data_range) * (cfg.ssim_k2 * cfg.data_range);
  double total = 0.0;
  std::size_t count = 0;
  for (int y = 0; y + win <= pred.height; ++y)
    for (int x = 0; x + win <= pred.width; ++x) {
      double mx = 0.0, my = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int j = 0; j < win; ++j)
        for (int i = 0; i < win; ++i) {
          const double w = kernel[static_cast<std::size_t>(j) * win + i];
          const double a = pred.at(x + i, y + j);
          const double b = ref.at(x + i, y + j);
          mx += w * a;
          my += w * b;
          sxx += w * a * a;
          syy += w * b * b;
          sxy += w * a * b;
        }
      const double vx = sxx - mx * mx;
      const double vy = syy - my * my;
      const double cxy = sxy - mx * my;
      total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

}  // namespace n2c

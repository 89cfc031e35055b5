#pragma once

#include "n2c/grid.hpp"

namespace n2c {

struct MetricConfig {
  double data_range = 1.0;
  int ssim_window = 7;
  double ssim_k1 = 0.01;
  double ssim_k2 = 0.03;
  double ssim_gaussian_sigma = 1.5;

  void validate() const;  // ConfigError
};

double mse(const Grid& a, const Grid& b);

// 10 log10(data_range^2 / MSE); +infinity when the images are identical.
double psnr(const Grid& pred, const Grid& ref, const MetricConfig& cfg);

// Mean SSIM over all window positions that lie fully inside the image, with
// Gaussian-weighted local statistics and C1 = (k1 L)^2, C2 = (k2 L)^2.
double ssim(const Grid& pred, const Grid& ref, const MetricConfig& cfg);

}  // namespace n2c

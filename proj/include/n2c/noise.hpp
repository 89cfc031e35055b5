#pragma once

#include <cstdint>

#include "n2c/image.hpp"

namespace n2c {

// x = y + n with n iid zero-mean Gaussian of std rel_std * max(img).
// The result is not clipped.
Image add_gaussian_noise(const Image& img, double rel_std, std::uint64_t seed);

// Same, with an absolute standard deviation.
Image add_gaussian_noise_abs(const Image& img, double std_dev, std::uint64_t seed);

// Spatially correlated noise: an iid Gaussian field smoothed with a Gaussian
// kernel of width corr_sigma, rescaled to sample std rel_std * max(img).
Image add_correlated_noise(const Image& img, double rel_std, double corr_sigma, std::uint64_t seed);
Image add_correlated_noise_abs(const Image& img, double std_dev, double corr_sigma, std::uint64_t seed);

}  // namespace n2c

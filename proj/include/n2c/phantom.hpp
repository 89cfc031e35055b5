#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "n2c/image.hpp"

namespace n2c {

enum class NoiseKind { kIid, kCorrelated };

std::string_view to_string(NoiseKind k);
NoiseKind noise_kind_from_string(std::string_view s);

struct PhantomConfig {
  int size = 64;
  int n_slices = 8;
  // Number of intensity regions including the background (label 0).
  int n_regions = 6;
  // Per-region intensities. Empty means "draw from the seed".
  std::vector<double> contrast_map_a;
  std::vector<double> contrast_map_b;
  double noise_rel_std = 0.05;
  NoiseKind noise_kind = NoiseKind::kIid;
  double corr_sigma = 2.0;
  // Upper bound on how far region boundaries move between adjacent slices.
  double max_drift_px = 2.0;
  int n_realizations = 2;

  // Throws ConfigError naming the violated bound.
  void validate() const;
};

struct PhantomSlice {
  Image clean_a;
  Image clean_b;
  std::vector<Image> noisy_a;
  std::vector<Image> noisy_b;

  const Image& clean(Contrast c) const { return c == Contrast::A ? clean_a : clean_b; }
  const std::vector<Image>& noisy(Contrast c) const { return c == Contrast::A ? noisy_a : noisy_b; }
  const Image& noisy(Contrast c, int realization) const;
};

struct MultiContrastVolume {
  std::vector<PhantomSlice> slices;
  std::uint64_t seed = 0;
  // False for imported data without ground truth; clean images are then empty.
  bool has_clean = true;

  int width() const;
  int height() const;
  // Maximum clean intensity of one contrast over the whole volume; this is the
  // PSNR data range used for evaluation.
  double clean_max(Contrast c) const;

  // Throws DataError when a slice breaks the shape or realization invariants.
  void validate() const;
};

// Piecewise-constant multi-contrast phantom. Both contrasts share one label
// map per slice; region intensities differ between contrasts. Seed streams:
//   geometry     derive_seed(seed, {kGeometry})
//   intensities  derive_seed(seed, {kIntensities})
//   noise        derive_seed(seed, {kNoise, slice, contrast, realization})
// Noise std is noise_rel_std times the volume's maximum clean intensity of
// the respective contrast.
MultiContrastVolume generate_phantom(const PhantomConfig& config, std::uint64_t seed);

// Region label map of one slice (exposed for tests of geometric drift).
std::vector<int> phantom_labels(const PhantomConfig& config, std::uint64_t seed, int slice);

// Painted ellipses of one slice in painter's order (later shapes cover
// earlier ones; pixels outside every shape are background).
struct PhantomShape {
  int label = 0;
  double cx = 0.0, cy = 0.0;  // centre in pixel units, pixel (x, y) is sampled at (x + 0.5, y + 0.5)
  double rx = 0.0, ry = 0.0;
  double angle = 0.0;  // rotation of the rx axis, radians
};
std::vector<PhantomShape> phantom_shapes(const PhantomConfig& config, std::uint64_t seed, int slice);

// The per-region intensity maps a generated volume uses.
struct ContrastMaps {
  std::vector<double> a;
  std::vector<double> b;
};
ContrastMaps phantom_contrast_maps(const PhantomConfig& config, std::uint64_t seed);

}  // namespace n2c

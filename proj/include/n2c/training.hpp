#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "n2c/bilateral.hpp"
#include "n2c/domain_net.hpp"
#include "n2c/grid.hpp"
#include "n2c/metrics.hpp"
#include "n2c/phantom.hpp"

namespace n2c {

enum class Scheme {
  kN2cBfs,             // Noise2Contrast (BFs): filter stack + translator, joint
  kN2cNet,             // Noise2Contrast (U-Net): translator first, then a net denoiser through it
  kN2vBfs,             // Noise2Void (BFs): blind-spot masking
  kN2NeighborBfs,      // Noise2Neighbor (BFs): adjacent slice as target
  kN2nDirect,          // ablation: one net maps input contrast onto target contrast
  kBfOnlyCrossContrast // ablation: filter stack alone against the other contrast
};

std::string_view to_string(Scheme s);
Scheme scheme_from_string(std::string_view s);  // ConfigError listing valid names
std::vector<std::string_view> scheme_names();

struct TrainConfig {
  Scheme scheme = Scheme::kN2cBfs;
  // Adam learning rate for network weights and for the filter widths. Both
  // default to 5e-5; desk_scale() raises them for short CPU runs.
  double lr = 5e-5;
  double filter_lr = 5e-5;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;
  Contrast input_contrast = Contrast::A;
  Contrast target_contrast = Contrast::B;
  double n2v_mask_fraction = 0.01;
  int n2v_replace_radius = 2;
  // Slice distance of the Noise2Neighbor target. 0 uses the second noisy
  // realization of the same slice (plain Noise2Noise).
  int neighbor_offset = 1;
  int n_val_slices = 1;
  int n_test_slices = 2;
  int stack_depth = 3;
  NetConfig net;
  MetricConfig metrics;  // data_range is replaced by the volume's clean maximum

  static TrainConfig desk_scale(Scheme scheme);
  bool cross_contrast() const;
  void validate() const;  // ConfigError
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct StageReport {
  std::string name;
  double initial_train_loss = 0.0;
  double initial_val_loss = 0.0;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double final_train_loss = 0.0;  // fixed-sample objective at the returned parameters
  int stop_epoch = 0;
  std::string stop_reason;  // "early_stop", "max_epochs" or "no_epochs"
};

struct SliceMetrics {
  int slice = 0;
  double psnr_noisy = 0.0;
  double ssim_noisy = 0.0;
  double psnr_denoised = 0.0;
  double ssim_denoised = 0.0;
  double mean_noisy = 0.0;
  double mean_denoised = 0.0;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
};

struct TrainReport {
  TrainConfig config;
  std::vector<StageReport> stages;
  bool has_metrics = false;
  double data_range = 0.0;
  std::vector<SliceMetrics> test_metrics;
  MetricSummary psnr_noisy, ssim_noisy, psnr_denoised, ssim_denoised;
  double wall_seconds = 0.0;

  const StageReport& last_stage() const { return stages.back(); }
  double psnr_gain() const { return psnr_denoised.mean - psnr_noisy.mean; }
  double ssim_gain() const { return ssim_denoised.mean - ssim_noisy.mean; }
  // Everything except timing, as JSON with a fixed key order.
  std::string to_json(bool include_timing = true) const;
};

inline constexpr std::uint8_t kModelFormatVersion = 1;

struct ModelBundle {
  Scheme scheme = Scheme::kN2cBfs;
  std::uint64_t seed = 0;
  std::uint8_t version = kModelFormatVersion;
  Contrast input_contrast = Contrast::A;
  Contrast target_contrast = Contrast::B;
  std::optional<BilateralStackParams> filter;
  std::optional<DomainNetParams> denoiser_net;
  std::optional<DomainNetParams> translator;

  // Accessors throw ContractError when the scheme carries no such operator.
  const BilateralStackParams& filter_stack() const;
  const DomainNetParams& denoiser_network() const;
  const DomainNetParams& translator_network() const;
  bool denoiser_is_filter() const { return filter.has_value(); }

  // Throws ContractError when the contents do not match the scheme.
  void validate() const;

  // Applies only the denoising operator; the translator is dropped.
  Grid denoise(const Grid& x) const;
  Image denoise(const Image& img) const;

  friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

// MSE and its gradient 2 (pred - target) / N.
std::pair<double, Grid> mse_loss(const Grid& pred, const Grid& target);

// Slices used for training, validation and testing.
struct SliceSplit {
  std::vector<int> train, val, test;
};
SliceSplit split_slices(int n_slices, const TrainConfig& cfg);

// Blind-spot masking: indices of the masked pixels and the input with every
// masked pixel replaced by a random neighbour (never itself) within radius.
struct BlindSpotSample {
  std::vector<std::size_t> masked;
  Grid input;
};
BlindSpotSample blind_spot_mask(const Grid& noisy, double fraction, int radius, std::uint64_t seed);

using TrainResult = std::pair<ModelBundle, TrainReport>;

TrainResult train_n2c_known(const MultiContrastVolume& data, const TrainConfig& cfg);
TrainResult train_n2c_network(const MultiContrastVolume& data, const TrainConfig& cfg);
TrainResult train_n2v(const MultiContrastVolume& data, const TrainConfig& cfg);
TrainResult train_n2neighbor(const MultiContrastVolume& data, const TrainConfig& cfg);
TrainResult train_ablations(const MultiContrastVolume& data, const TrainConfig& cfg);
// Dispatches on cfg.scheme.
TrainResult train(const MultiContrastVolume& data, const TrainConfig& cfg);

// Metrics of a bundle's denoiser on the test slices.
void evaluate_bundle(const ModelBundle& bundle, const MultiContrastVolume& data, const TrainConfig& cfg,
                     TrainReport& report);

}  // namespace n2c

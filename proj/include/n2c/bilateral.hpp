#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "n2c/grid.hpp"
#include "n2c/operator.hpp"
#include "n2c/optim.hpp"

namespace n2c {

double softplus(double u);
double softplus_inverse(double s);  // s > 0
double sigmoid(double u);

// One bilateral layer. The widths are stored unconstrained and mapped through
// softplus, so the effective widths are always strictly positive. Gradients
// are taken with respect to the unconstrained values.
struct BilateralLayerParams {
  double raw_sigma_sx = 0.0;
  double raw_sigma_sy = 0.0;
  double raw_sigma_r = 0.0;

  static BilateralLayerParams from_sigmas(double sigma_sx, double sigma_sy, double sigma_r);
  static BilateralLayerParams initial() { return from_sigmas(1.5, 1.5, 0.05); }

  double sigma_sx() const { return softplus(raw_sigma_sx); }
  double sigma_sy() const { return softplus(raw_sigma_sy); }
  double sigma_r() const { return softplus(raw_sigma_r); }

  friend bool operator==(const BilateralLayerParams&, const BilateralLayerParams&) = default;
};

struct BilateralStackParams {
  std::vector<BilateralLayerParams> layers;

  static BilateralStackParams initial(int depth = 3);
  // Names are "layer<i>.sigma_sx", "layer<i>.sigma_sy", "layer<i>.sigma_r".
  ParamVector to_params() const;
  static BilateralStackParams from_params(const ParamVector& p);

  friend bool operator==(const BilateralStackParams&, const BilateralStackParams&) = default;
};

enum class BorderPolicy { kClampToEdge };

// The neighbourhood of a pixel: offsets |dx| <= radius_x, |dy| <= radius_y.
struct FilterWindow {
  int radius_x = 1;
  int radius_y = 1;
  BorderPolicy border = BorderPolicy::kClampToEdge;

  void validate() const;  // ConfigError when a radius is < 1
  friend bool operator==(const FilterWindow&, const FilterWindow&) = default;
};

inline constexpr int kMaxWindowRadius = 15;

// radius = ceil(3 sigma) per axis, clamped to [1, 15].
FilterWindow window_for(const BilateralLayerParams& p);

// Y_k = sum_n Gs(k - n) Gr(X_k - X_n) X_n / alpha_k,
// alpha_k = sum_n Gs(k - n) Gr(X_k - X_n), with unnormalized Gaussians
// G(x) = exp(-x^2 / (2 sigma^2)) and separate spatial widths per axis.
Grid bf_forward(const Grid& x, const BilateralLayerParams& params, const FilterWindow& window);

struct BilateralLayerGrads {
  // Gradients with respect to the unconstrained widths.
  double raw_sigma_sx = 0.0;
  double raw_sigma_sy = 0.0;
  double raw_sigma_r = 0.0;
  Grid input;
};

// Gradients of sum_k upstream_k * Y_k. The window is treated as fixed.
BilateralLayerGrads bf_backward(const Grid& x, const BilateralLayerParams& params, const FilterWindow& window,
                                const Grid& upstream);

struct StackTrace {
  BilateralStackParams params;
  std::vector<FilterWindow> windows;
  std::vector<Grid> layer_inputs;
  int out_width = 0;
  int out_height = 0;
};

// Sequential application of every layer. Windows default to window_for() of
// each layer's current widths.
std::pair<Grid, StackTrace> stack_forward(const Grid& x, const BilateralStackParams& params,
                                          std::optional<std::vector<FilterWindow>> windows = std::nullopt);

// Reverse-mode chain through the layers: gradients for all widths (in
// to_params() order) and for the stack input.
std::pair<ParamVector, Grid> stack_backward(const StackTrace& trace, const Grid& upstream);

// TrainableOperator view of a filter stack. Windows are pinned when the
// operator is constructed, matching the fixed-window gradient.
class BilateralStackOperator : public TrainableOperator {
 public:
  explicit BilateralStackOperator(BilateralStackParams params);

  std::string name() const override { return "bilateral_stack"; }
  const ParamVector& params() const override { return flat_; }
  void set_params(const ParamVector& p) override;
  Grid forward(const Grid& x) override;
  OperatorGrads backward(const Grid& upstream) override;

  const BilateralStackParams& stack() const { return stack_; }

 private:
  BilateralStackParams stack_;
  ParamVector flat_;
  std::vector<FilterWindow> windows_;
  std::optional<StackTrace> trace_;
};

}  // namespace n2c

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "n2c/grid.hpp"
#include "n2c/operator.hpp"
#include "n2c/optim.hpp"

namespace n2c {

// Encoder-decoder with skip connections. Level l (l < depth) has
// base_features * 2^l channels; the bottleneck keeps the deepest encoder
// width. Each level is [conv3x3 + relu] x 2, downsampling is 2x2 average
// pooling, upsampling is nearest neighbour followed by skip concatenation,
// and the head is a 1x1 convolution without activation. The reference
// architecture this stands in for used 16 base features and ~1.1M weights;
// the desk default is 8 features at depth 2 (18,065 weights).
struct NetConfig {
  int base_features = 8;
  int depth = 2;
  int kernel_size = 3;

  void validate() const;  // ConfigError
  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct TensorSpec {
  std::string name;
  std::vector<int> dims;
  std::size_t count() const;
  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

// Shape manifest in parameter order: for every convolution "<layer>.weight"
// [out, in, k, k] followed by "<layer>.bias" [out].
std::vector<TensorSpec> net_manifest(const NetConfig& config);
std::size_t net_param_count(const NetConfig& config);

struct DomainNetParams {
  NetConfig config;
  ParamVector flat;  // names are "<tensor>[<index>]"
  std::vector<TensorSpec> manifest;

  // ManifestError-free consistency check; throws ContractError.
  void validate() const;
  friend bool operator==(const DomainNetParams&, const DomainNetParams&) = default;
};

// He-style uniform weights in +-sqrt(6 / fan_in), zero biases, rounded to
// float32 (the serialization precision).
DomainNetParams net_init(const NetConfig& config, std::uint64_t seed);

// Rounds every parameter to the nearest float32.
void quantize_to_float(ParamVector& p);

struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int c, int h, int w) : channels(c), height(h), width(w), v(static_cast<std::size_t>(c) * h * w, 0.0) {}
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double* channel(int c) { return v.data() + c * plane(); }
  const double* channel(int c) const { return v.data() + c * plane(); }
};

struct NetTrace {
  std::shared_ptr<const DomainNetParams> params;
  // Per convolution in manifest order: its input and pre-activation output.
  std::vector<Tensor> conv_inputs;
  std::vector<Tensor> conv_outputs;
  int width = 0;
  int height = 0;

  std::vector<std::uint8_t> relu_signature() const;
  double relu_margin() const;
};

// Throws ContractError when the input size is not divisible by 2^depth.
std::pair<Grid, NetTrace> net_forward(const Grid& x, std::shared_ptr<const DomainNetParams> params);
std::pair<Grid, NetTrace> net_forward(const Grid& x, const DomainNetParams& params);

// Gradients of sum(upstream * output) for every parameter and the input.
// Pass want_params = false to skip the weight gradients.
std::pair<ParamVector, Grid> net_backward(const NetTrace& trace, const Grid& upstream, bool want_params = true);

// Trainable adapter.
class DomainNetOperator : public TrainableOperator {
 public:
  explicit DomainNetOperator(DomainNetParams params);

  std::string name() const override { return "domain_net"; }
  const ParamVector& params() const override { return params_->flat; }
  void set_params(const ParamVector& p) override;
  Grid forward(const Grid& x) override;
  OperatorGrads backward(const Grid& upstream) override;
  std::vector<std::uint8_t> kink_signature() const override;
  double kink_margin() const override;

  const DomainNetParams& net() const { return *params_; }

 private:
  std::shared_ptr<DomainNetParams> params_;
  std::optional<NetTrace> trace_;
};

// A trained translator whose parameters can no longer change. It exposes the
// forward pass and the input gradient only.
class FrozenNet : public TrainableOperator {
 public:
  explicit FrozenNet(DomainNetParams params);

  std::string name() const override { return "domain_net (frozen)"; }
  const ParamVector& params() const override { return params_->flat; }
  void set_params(const ParamVector&) override;  // always throws ContractError
  bool frozen() const override { return true; }
  Grid forward(const Grid& x) override;
  OperatorGrads backward(const Grid& upstream) override;  // params left empty
  Grid grad_input(const Grid& upstream) const;
  std::vector<std::uint8_t> kink_signature() const override;
  double kink_margin() const override;

  const DomainNetParams& net() const { return *params_; }

 private:
  std::shared_ptr<const DomainNetParams> params_;
  std::optional<NetTrace> trace_;
};

FrozenNet freeze(const DomainNetParams& params);

}  // namespace n2c

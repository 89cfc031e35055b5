#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "n2c/grid.hpp"
#include "n2c/optim.hpp"

namespace n2c {

struct OperatorGrads {
  ParamVector params;  // empty for frozen operators
  Grid input;
};

// Uniform view of a trainable image-to-image operator: forward keeps whatever
// backward needs, backward returns gradients of sum(upstream * output).
class TrainableOperator {
 public:
  virtual ~TrainableOperator() = default;

  virtual std::string name() const = 0;
  virtual const ParamVector& params() const = 0;
  // Throws ContractError on frozen operators.
  virtual void set_params(const ParamVector& p) = 0;
  virtual bool frozen() const { return false; }

  virtual Grid forward(const Grid& x) = 0;
  // Uses the state saved by the most recent forward call.
  virtual OperatorGrads backward(const Grid& upstream) = 0;

  // Piecewise-linear operators report the sign pattern of their kinks for the
  // last forward call, and the smallest distance of any kink argument to zero.
  virtual std::vector<std::uint8_t> kink_signature() const { return {}; }
  virtual double kink_margin() const { return std::numeric_limits<double>::infinity(); }
};

// Applies one Adam step to the operator's parameters in place.
// Throws ContractError for frozen operators.
void adam_step(TrainableOperator& op, const ParamVector& grads, AdamState& state);

}  // namespace n2c

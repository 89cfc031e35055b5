#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace n2c {

// Flat trainable parameters with one human-readable name per entry.
struct ParamVector {
  std::vector<double> values;
  std::vector<std::string> names;

  std::size_t size() const { return values.size(); }
  // Throws ContractError on length mismatch or duplicate names,
  // NumericalError on non-finite values.
  void validate() const;
  // Same names, all values zero.
  ParamVector zeros_like() const;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

struct AdamState {
  std::int64_t step_count = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const ParamVector& p, double lr);
  // Throws ConfigError when a hyperparameter is out of range.
  void validate() const;

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// One bias-corrected Adam update. Coordinates whose gradient is exactly zero
// keep their value (their moments still decay), so an all-zero gradient is the
// identity on the parameters for any state.
std::pair<ParamVector, AdamState> adam_step(const ParamVector& params, const ParamVector& grads,
                                            const AdamState& state);

using ScalarFunction = std::function<double(const ParamVector&)>;

// Central differences (f(p + h e_i) - f(p - h e_i)) / (2 h). With
// scale_by_magnitude the step for coordinate i is h * max(1, |p_i|).
ParamVector finite_diff_gradient(const ScalarFunction& f, const ParamVector& params, double h,
                                 bool scale_by_magnitude = false);

}  // namespace n2c

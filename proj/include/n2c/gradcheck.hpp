#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "n2c/operator.hpp"

namespace n2c {

struct GradCheckEntry {
  std::string name;  // parameter name or "input[x,y]"
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckOptions {
  double h = 1e-3;  // step is h * max(1, |value|)
  // Upper bounds on checked coordinates; 0 checks all of them.
  std::size_t max_params = 0;
  std::size_t max_inputs = 0;
  std::uint64_t seed = 0;
  // Parameters whose names contain this string are visited first, so a
  // sampled check always covers them.
  std::string focus;
};

struct GradCheckReport {
  std::string op_name;
  double tolerance = 0.0;
  std::vector<GradCheckEntry> params;
  std::vector<GradCheckEntry> inputs;
  double max_param_error = 0.0;
  double max_input_error = 0.0;
  std::string worst_param;
  std::string worst_input;
  std::size_t kink_skipped = 0;
  bool passed = false;

  void print(std::ostream& out) const;
};

// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

// Compares the operator's analytic backward against central finite
// differences of L(p, x) = sum(r * op(x; p)) with a random fixed r. Failures
// are reported, not thrown. Coordinates whose +-h probes change the
// operator's kink signature are skipped (and replaced when sampling).
GradCheckReport gradient_check(TrainableOperator& op, const Grid& input, double tolerance,
                               const GradCheckOptions& options = {});

// Random input in [0, 1) for a check; redraws while any kink argument lies
// within 1e-6 of zero.
Grid sample_check_input(TrainableOperator& op, int width, int height, std::uint64_t seed);

// Wraps an operator and multiplies the analytic gradient of every parameter
// whose name contains `match` by `factor`. Used to confirm that the checker
// catches a broken backward pass.
class FaultInjectingOperator : public TrainableOperator {
 public:
  FaultInjectingOperator(TrainableOperator& inner, std::string match, double factor)
      : inner_(inner), match_(std::move(match)), factor_(factor) {}

  std::string name() const override { return inner_.name() + " (fault: " + match_ + ")"; }
  const ParamVector& params() const override { return inner_.params(); }
  void set_params(const ParamVector& p) override { inner_.set_params(p); }
  bool frozen() const override { return inner_.frozen(); }
  Grid forward(const Grid& x) override { return inner_.forward(x); }
  OperatorGrads backward(const Grid& upstream) override;
  std::vector<std::uint8_t> kink_signature() const override { return inner_.kink_signature(); }
  double kink_margin() const override { return inner_.kink_margin(); }

 private:
  TrainableOperator& inner_;
  std::string match_;
  double factor_;
};

}  // namespace n2c

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "n2c/gradcheck.hpp"

namespace n2c {

enum class CheckTarget { kBilateral, kDomainNet, kAll };
CheckTarget check_target_from_string(const std::string& s);  // ConfigError

inline constexpr double kBilateralTolerance = 1e-4;
inline constexpr double kDomainNetTolerance = 1e-3;

struct SuiteOptions {
  CheckTarget target = CheckTarget::kAll;
  std::uint64_t seed = 0;
  // Non-empty: scale the analytic gradient of matching parameters by
  // fault_factor before comparing.
  std::string fault;
  double fault_factor = 1.5;
};

// Image shapes used per operator. Network shapes are multiples of 2^depth.
std::vector<std::pair<int, int>> bilateral_check_shapes();
std::vector<std::pair<int, int>> domain_net_check_shapes();

// Fresh random instances of the 3-layer filter stack and the default network,
// checked on every shape. One report per (operator, shape).
std::vector<GradCheckReport> run_gradcheck_suite(const SuiteOptions& options);

}  // namespace n2c

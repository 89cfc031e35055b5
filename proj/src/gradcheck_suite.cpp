#include "n2c/gradcheck_suite.hpp"

#include "n2c/bilateral.hpp"
#include "n2c/domain_net.hpp"
#include "n2c/errors.hpp"
#include "n2c/rng.hpp"

namespace n2c {

CheckTarget check_target_from_string(const std::string& s) {
  if (s == "bilateral") return CheckTarget::kBilateral;
  if (s == "domain_net") return CheckTarget::kDomainNet;
  if (s == "all") return CheckTarget::kAll;
  throw ConfigError("unknown gradcheck target '" + s + "'; valid targets: bilateral, domain_net, all");
}

std::vector<std::pair<int, int>> bilateral_check_shapes() { return {{17, 13}, {16, 16}, {24, 9}}; }
std::vector<std::pair<int, int>> domain_net_check_shapes() { return {{8, 8}, {16, 16}, {20, 12}}; }

namespace {

GradCheckReport check_one(TrainableOperator& op, int w, int h, double tol, const SuiteOptions& o,
                          GradCheckOptions go) {
  const Grid x = sample_check_input(op, w, h, derive_seed(o.seed, {stream::kGradCheck, 2, std::uint64_t(w), std::uint64_t(h)}));
  go.seed = derive_seed(o.seed, {stream::kGradCheck, 3, std::uint64_t(w), std::uint64_t(h)});
  go.focus = o.fault;
  GradCheckReport r;
  if (o.fault.empty()) {
    r = gradient_check(op, x, tol, go);
  } else {
    FaultInjectingOperator faulty(op, o.fault, o.fault_factor);
    r = gradient_check(faulty, x, tol, go);
  }
  r.op_name += " " + std::to_string(w) + "x" + std::to_string(h);
  return r;
}

}  // namespace

std::vector<GradCheckReport> run_gradcheck_suite(const SuiteOptions& o) {
  std::vector<GradCheckReport> out;
  if (o.target != CheckTarget::kDomainNet) {
    Rng rng(derive_seed(o.seed, {stream::kGradCheck, 10}));
    BilateralStackParams p;
    for (int l = 0; l < 3; ++l)
      p.layers.push_back(BilateralLayerParams::from_sigmas(rng.uniform(0.8, 2.5), rng.uniform(0.8, 2.5),
                                                           rng.uniform(0.1, 0.5)));
    for (auto [w, h] : bilateral_check_shapes()) {
      BilateralStackOperator op(p);
      GradCheckOptions go;
      // The range kernel has large higher derivatives in the input, so the
      // bilateral check uses a smaller central-difference step.
      go.h = 1e-5;
      out.push_back(check_one(op, w, h, kBilateralTolerance, o, go));
    }
  }
  if (o.target != CheckTarget::kBilateral) {
    DomainNetParams p = net_init(NetConfig{}, derive_seed(o.seed, {stream::kGradCheck, 11}));
    // Nonzero biases so their gradients are exercised away from the init.
    Rng rng(derive_seed(o.seed, {stream::kGradCheck, 12}));
    for (std::size_t i = 0; i < p.flat.size(); ++i)
      if (p.flat.names[i].find(".bias") != std::string::npos) p.flat.values[i] = rng.uniform(-0.1, 0.1);
    for (auto [w, h] : domain_net_check_shapes()) {
      DomainNetOperator op(p);
      GradCheckOptions go;
      go.max_params = 200;
      go.max_inputs = 32;
      out.push_back(check_one(op, w, h, kDomainNetTolerance, o, go));
    }
  }
  return out;
}

}  // namespace n2c

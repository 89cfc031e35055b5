#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "n2c/domain_net.hpp"
#include "n2c/errors.hpp"
#include "n2c/gradcheck.hpp"
#include "n2c/gradcheck_suite.hpp"

using namespace n2c;
using namespace n2c::test;

namespace {

// Weights + biases of a k x k convolution.
std::size_t conv(std::size_t in, std::size_t out, std::size_t k) { return in * out * k * k + out; }

// Parameter count written out level by level.
std::size_t hand_count(std::size_t f, int depth) {
  std::size_t n = 0, in = 1;
  std::vector<std::size_t> widths;
  for (int l = 0; l < depth; ++l) {
    const std::size_t w = f << l;
    n += conv(in, w, 3) + conv(w, w, 3);
    widths.push_back(w);
    in = w;
  }
  n += conv(in, in, 3) + conv(in, in, 3);  // bottleneck keeps the deepest width
  for (int l = depth - 1; l >= 0; --l) {
    const std::size_t w = widths[static_cast<std::size_t>(l)];
    n += conv(in + w, w, 3) + conv(w, w, 3);
    in = w;
  }
  return n + conv(in, 1, 1);
}

DomainNetParams random_net(std::uint64_t seed) {
  DomainNetParams p = net_init(NetConfig{}, seed);
  Rng rng(seed + 1000);
  for (std::size_t i = 0; i < p.flat.size(); ++i)
    if (p.flat.names[i].find(".bias") != std::string::npos) p.flat.values[i] = rng.uniform(-0.1, 0.1);
  return p;
}

}  // namespace

TEST_CASE("parameter count matches the architecture") {
  CHECK(hand_count(8, 2) == 18065);
  CHECK(net_param_count(NetConfig{8, 2, 3}) == 18065);
  CHECK(net_param_count(NetConfig{4, 1, 3}) == hand_count(4, 1));
  CHECK(net_param_count(NetConfig{16, 4, 3}) == hand_count(16, 4));
  std::size_t manifest_sum = 0;
  for (const auto& t : net_manifest(NetConfig{})) manifest_sum += t.count();
  CHECK(manifest_sum == 18065);
  CHECK(net_init(NetConfig{}, 1).flat.size() == 18065);
  const auto m = net_manifest(NetConfig{});
  CHECK(m.front().name == "enc0.conv1.weight");
  CHECK(m.front().dims == std::vector<int>{8, 1, 3, 3});
  CHECK(m.back().name == "head.bias");
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(net_init(NetConfig{3, 2, 3}, 1), ConfigError);
  CHECK_THROWS_AS(net_init(NetConfig{8, 0, 3}, 1), ConfigError);
  CHECK_THROWS_AS(net_init(NetConfig{8, 2, 5}, 1), ConfigError);
}

TEST_CASE("init is deterministic, fan-in scaled and float32 exact") {
  const auto a = net_init(NetConfig{}, 5);
  CHECK(a == net_init(NetConfig{}, 5));
  CHECK(a != net_init(NetConfig{}, 6));
  for (std::size_t i = 0; i < a.flat.size(); ++i) {
    const double v = a.flat.values[i];
    CHECK(static_cast<double>(static_cast<float>(v)) == v);
    if (a.flat.names[i].find(".bias") != std::string::npos) CHECK(v == 0.0);
  }
  // enc0.conv1 has fan-in 9.
  const double bound = std::sqrt(6.0 / 9.0);
  for (std::size_t i = 0; i < 72; ++i) CHECK(std::abs(a.flat.values[i]) <= bound);
}

TEST_CASE("zero parameters give a zero output") {
  auto p = net_init(NetConfig{}, 1);
  for (double& v : p.flat.values) v = 0.0;
  const Grid y = net_forward(random_grid(16, 16, 2), p).first;
  CHECK(grid_min(y) == 0.0);
  CHECK(grid_max(y) == 0.0);
}

TEST_CASE("forward is deterministic and shape preserving") {
  const auto p = net_init(NetConfig{}, 3);
  const Grid x = random_grid(20, 12, 4);
  const Grid a = net_forward(x, p).first;
  CHECK(a == net_forward(x, p).first);
  CHECK(a.width == 20);
  CHECK(a.height == 12);
}

TEST_CASE("indivisible input size is a contract error suggesting padding") {
  const auto p = net_init(NetConfig{}, 3);
  try {
    net_forward(random_grid(17, 16, 1), p);
    FAIL("expected a contract error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("pad") != std::string::npos);
  }
}

TEST_CASE("every sampled parameter influences the output") {
  // With random init some ReLU channels are dead for a given input, so wiring
  // is probed with positive weights and biases where every unit is active.
  auto p = net_init(NetConfig{}, 7);
  Rng init(11);
  for (double& v : p.flat.values) v = init.uniform(0.01, 0.1);
  const Grid x = random_grid(16, 16, 8, 0.1, 1.0);
  const Grid base = net_forward(x, p).first;
  Rng rng(9);
  int unchanged = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t i = rng.below(p.flat.size());
    auto q = p;
    q.flat.values[i] += 1e-2;
    if (net_forward(x, q).first == base) {
      ++unchanged;
      MESSAGE("no effect: " << p.flat.names[i]);
    }
  }
  CHECK(unchanged == 0);
}

TEST_CASE("backward: zero upstream, shapes, and contract errors") {
  const auto p = random_net(2);
  const Grid x = random_grid(16, 8, 3);
  auto [y, trace] = net_forward(x, p);
  auto [gp, gi] = net_backward(trace, Grid(16, 8));
  CHECK(gp.size() == p.flat.size());
  CHECK(gp.names == p.flat.names);
  for (double v : gp.values) CHECK(v == 0.0);
  CHECK(gi.width == 16);
  CHECK(gi.height == 8);
  CHECK(grid_max(gi) == 0.0);
  CHECK(grid_min(gi) == 0.0);
  CHECK_THROWS_AS(net_backward(trace, Grid(8, 16)), ContractError);
}

TEST_CASE("gradients match finite differences on 5 seeds and 3 shapes") {
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    for (auto [w, h] : domain_net_check_shapes()) {
      DomainNetOperator op(random_net(seed));
      const Grid x = sample_check_input(op, w, h, seed);
      GradCheckOptions o;
      o.max_params = 200;
      o.max_inputs = 32;
      o.seed = seed;
      const auto r = gradient_check(op, x, 1e-3, o);
      INFO("seed " << seed << " shape " << w << "x" << h);
      CHECK(r.passed);
      CHECK(r.params.size() == 200);
      // Inputs next to a ReLU or max-pool kink are skipped by the checker.
      CHECK(r.inputs.size() >= 8);
    }
}

TEST_CASE("gradient check catches a corrupted network gradient") {
  DomainNetOperator op(random_net(1));
  FaultInjectingOperator faulty(op, "dec0.conv2.weight", 1.5);
  const Grid x = sample_check_input(op, 16, 16, 1);
  GradCheckOptions o;
  o.max_params = 50;
  o.max_inputs = 4;
  o.focus = "dec0.conv2.weight";
  const auto r = gradient_check(faulty, x, 1e-3, o);
  CHECK_FALSE(r.passed);
  CHECK(r.worst_param.find("dec0.conv2.weight") != std::string::npos);
}

TEST_CASE("freezing keeps outputs and input gradients, blocks updates") {
  const auto p = random_net(4);
  const Grid x = random_grid(16, 16, 5);
  const Grid up = random_grid(16, 16, 6, -1, 1);
  DomainNetOperator live(p);
  FrozenNet frozen = freeze(p);
  CHECK(frozen.frozen());
  CHECK(frozen.forward(x) == live.forward(x));
  CHECK(frozen.grad_input(up) == live.backward(up).input);
  CHECK(frozen.backward(up).params.size() == 0);
  CHECK_THROWS_AS(frozen.set_params(p.flat), ContractError);
  AdamState s = AdamState::for_params(p.flat, 1e-3);
  CHECK_THROWS_AS(adam_step(frozen, p.flat.zeros_like(), s), ContractError);
  CHECK(frozen.net() == p);
}

TEST_CASE("shifting the input by 2^depth shifts the interior output") {
  const auto p = random_net(11);
  const int n = 96, shift = 4, margin = 28;
  const Grid x = random_grid(n, n, 12);
  Grid xs(n, n);
  for (int y = 0; y < n; ++y)
    for (int i = 0; i < n; ++i) xs.at(i, y) = x.at(std::max(0, i - shift), y);
  const Grid a = net_forward(x, p).first;
  const Grid b = net_forward(xs, p).first;
  double worst = 0.0;
  for (int y = margin; y < n - margin; ++y)
    for (int i = margin + shift; i < n - margin; ++i) worst = std::max(worst, std::abs(b.at(i, y) - a.at(i - shift, y)));
  CHECK(worst < 1e-5);
}

TEST_CASE("copy-on-write keeps a trace valid after set_params") {
  const auto p = random_net(3);
  DomainNetOperator op(p);
  const Grid x = random_grid(8, 8, 1);
  const Grid up = random_grid(8, 8, 2, -1, 1);
  op.forward(x);
  const auto before = op.backward(up);
  op.set_params(p.flat.zeros_like());
  CHECK(op.backward(up).params == before.params);
}

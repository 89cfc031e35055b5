#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "n2c/bilateral.hpp"
#include "n2c/errors.hpp"
#include "n2c/gradcheck.hpp"
#include "n2c/optim.hpp"
#include "n2c/training.hpp"

using namespace n2c;
using namespace n2c::test;

static ParamVector single(double v) { return ParamVector{{v}, {"p"}}; }

TEST_CASE("ParamVector validation") {
  ParamVector p{{1.0, 2.0}, {"a", "b"}};
  p.validate();
  CHECK_THROWS_AS((ParamVector{{1.0}, {"a", "b"}}.validate()), ContractError);
  CHECK_THROWS_AS((ParamVector{{1.0, 2.0}, {"a", "a"}}.validate()), ContractError);
  CHECK_THROWS_AS((ParamVector{{NAN}, {"a"}}.validate()), NumericalError);
  CHECK(p.zeros_like().values == std::vector<double>{0.0, 0.0});
  CHECK(p.zeros_like().names == p.names);
}

TEST_CASE("adam first step matches the hand-evaluated update") {
  const ParamVector p = single(1.0);
  const AdamState s = AdamState::for_params(p, 1e-2);
  auto [next, state] = adam_step(p, single(0.5), s);
  // m_hat = 0.5, v_hat = 0.25
  const double expected = 1.0 - 1e-2 * (0.5 / (std::sqrt(0.25) + 1e-8));
  CHECK(next.values[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(next.values[0] == doctest::Approx(0.99).epsilon(1e-7));
  CHECK(state.step_count == 1);
  CHECK(s.step_count == 0);  // input untouched
}

TEST_CASE("adam zero gradient is the identity for any state") {
  ParamVector p{{0.3, -2.0, 5.0}, {"a", "b", "c"}};
  AdamState s = AdamState::for_params(p, 0.1);
  // Build up non-trivial moments first.
  for (int i = 0; i < 5; ++i) std::tie(p, s) = adam_step(p, ParamVector{{1.0, -0.5, 0.25}, p.names}, s);
  auto [next, state] = adam_step(p, p.zeros_like(), s);
  CHECK(next == p);
  CHECK(state.step_count == s.step_count + 1);
  CHECK(state.first_moment[0] == doctest::Approx(0.9 * s.first_moment[0]));
}

TEST_CASE("adam moments accumulate") {
  const ParamVector p = single(1.0);
  const AdamState s = AdamState::for_params(p, 1e-2);
  auto [p1, s1] = adam_step(p, single(0.5), s);
  auto [p2, s2] = adam_step(p1, single(0.5), s1);
  auto [q, t] = adam_step(p, single(1.0), s);
  CHECK(p2.values[0] != q.values[0]);
  CHECK(s2.step_count == 2);
  CHECK(t.step_count == 1);
}

TEST_CASE("adam is deterministic") {
  const ParamVector p{{0.1, 0.2}, {"a", "b"}};
  const AdamState s = AdamState::for_params(p, 1e-3);
  const ParamVector g{{0.7, -0.3}, {"a", "b"}};
  CHECK(adam_step(p, g, s) == adam_step(p, g, s));
}

TEST_CASE("adam errors") {
  const ParamVector p{{0.1, 0.2}, {"a", "b"}};
  const AdamState s = AdamState::for_params(p, 1e-3);
  CHECK_THROWS_AS(adam_step(p, single(1.0), s), ContractError);
  try {
    adam_step(p, ParamVector{{0.0, NAN}, {"a", "b"}}, s);
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  AdamState bad = s;
  bad.beta1 = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = s;
  bad.lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("finite differences") {
  auto sq = [](const ParamVector& p) { return p.values[0] * p.values[0]; };
  CHECK(finite_diff_gradient(sq, single(3.0), 1e-4).values[0] == doctest::Approx(6.0).epsilon(1e-7));
  auto cst = [](const ParamVector&) { return 4.2; };
  const auto g = finite_diff_gradient(cst, ParamVector{{1.0, 2.0}, {"a", "b"}}, 1e-3);
  CHECK(g.values == std::vector<double>{0.0, 0.0});
  auto bad = [](const ParamVector& p) { return p.values[0] > 3.0 ? NAN : 1.0; };
  CHECK_THROWS_AS(finite_diff_gradient(bad, single(3.0), 1e-3), NumericalError);
  CHECK_THROWS_AS(finite_diff_gradient(sq, single(3.0), 0.0), ConfigError);
}

TEST_CASE("finite differences of an MSE through the filter stack match the analytic gradient") {
  const Grid x = random_grid(16, 16, 21);
  const Grid target = random_grid(16, 16, 22);
  BilateralStackParams params;
  for (int l = 0; l < 3; ++l) params.layers.push_back(BilateralLayerParams::from_sigmas(1.2 + 0.3 * l, 1.0 + 0.2 * l, 0.2 + 0.1 * l));
  auto [out, trace] = stack_forward(x, params);
  const auto windows = trace.windows;
  auto [loss, g] = mse_loss(out, target);
  const ParamVector analytic = stack_backward(trace, g).first;
  auto f = [&](const ParamVector& p) {
    return mse_loss(stack_forward(x, BilateralStackParams::from_params(p), windows).first, target).first;
  };
  const ParamVector numeric = finite_diff_gradient(f, params.to_params(), 1e-3, true);
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    INFO(analytic.names[i]);
    CHECK(relative_error(analytic.values[i], numeric.values[i]) < 1e-4);
  }
}

TEST_CASE("relative error definition") {
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(relative_error(0.0, 0.0) == 0.0);
  CHECK(relative_error(1e-9, 0.0) == doctest::Approx(0.1));
}

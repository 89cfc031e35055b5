#include "n2c/optim.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "n2c/errors.hpp"

namespace n2c {

void ParamVector::validate() const {
  if (values.size() != names.size())
    throw ContractError("parameter vector has " + std::to_string(values.size()) + " values but " +
                        std::to_string(names.size()) + " names");
  std::unordered_set<std::string> seen;
  for (const auto& n : names)
    if (!seen.insert(n).second) throw ContractError("duplicate parameter name '" + n + "'");
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i])) throw NumericalError("parameter '" + names[i] + "' is not finite");
}

ParamVector ParamVector::zeros_like() const {
  return ParamVector{std::vector<double>(values.size(), 0.0), names};
}

AdamState AdamState::for_params(const ParamVector& p, double lr) {
  AdamState s;
  s.first_moment.assign(p.size(), 0.0);
  s.second_moment.assign(p.size(), 0.0);
  s.lr = lr;
  return s;
}

void AdamState::validate() const {
  if (!(lr > 0.0)) throw ConfigError("Adam lr must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("Adam beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("Adam beta2 must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be > 0");
  if (step_count < 0) throw ContractError("Adam step_count must be >= 0");
  if (first_moment.size() != second_moment.size()) throw ContractError("Adam moment accumulators differ in size");
}

std::pair<ParamVector, AdamState> adam_step(const ParamVector& params, const ParamVector& grads,
                                            const AdamState& state) {
  state.validate();
  if (grads.size() != params.size() || state.first_moment.size() != params.size())
    throw ContractError("adam_step shape mismatch: params " + std::to_string(params.size()) + ", grads " +
                        std::to_string(grads.size()) + ", state " + std::to_string(state.first_moment.size()));
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads.values[i]))
      throw NumericalError("non-finite gradient for parameter '" + params.names[i] + "'");

  ParamVector out = params;
  AdamState next = state;
  next.step_count = state.step_count + 1;
  const double t = static_cast<double>(next.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads.values[i];
    double& m = next.first_moment[i];
    double& v = next.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g * g;
    if (g == 0.0) continue;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    out.values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
  return {std::move(out), std::move(next)};
}

ParamVector finite_diff_gradient(const ScalarFunction& f, const ParamVector& params, double h,
                                 bool scale_by_magnitude) {
  if (!(h > 0.0)) throw ConfigError("finite difference step h must be > 0");
  ParamVector grad = params.zeros_like();
  ParamVector probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double p = params.values[i];
    const double step = scale_by_magnitude ? h * std::max(1.0, std::abs(p)) : h;
    probe.values[i] = p + step;
    const double fp = f(probe);
    probe.values[i] = p - step;
    const double fm = f(probe);
    probe.values[i] = p;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericalError("objective is not finite around parameter '" + params.names[i] + "'");
    grad.values[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

}  // namespace n2c

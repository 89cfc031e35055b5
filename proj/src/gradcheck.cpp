#include "n2c/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "n2c/errors.hpp"
#include "n2c/rng.hpp"

namespace n2c {

void adam_step(TrainableOperator& op, const ParamVector& grads, AdamState& state) {
  if (op.frozen()) throw ContractError("cannot apply a parameter update to frozen operator '" + op.name() + "'");
  auto [next, next_state] = adam_step(op.params(), grads, state);
  op.set_params(next);
  state = std::move(next_state);
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

namespace {

double weighted_sum(const Grid& out, const Grid& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += r.v[i] * out.v[i];
  return s;
}

// Order in which coordinates are visited: all of them, or a seeded shuffle
// when only a sample is checked.
std::vector<std::size_t> visit_order(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit == 0 || limit >= n) return idx;
  for (std::size_t i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);
  return idx;
}

}  // namespace

GradCheckReport gradient_check(TrainableOperator& op, const Grid& input, double tolerance,
                               const GradCheckOptions& options) {
  GradCheckReport report;
  report.op_name = op.name();
  report.tolerance = tolerance;

  Rng rng(derive_seed(options.seed, {stream::kGradCheck}));
  Grid weights(input.width, input.height);
  for (double& w : weights.v) w = rng.uniform(-1.0, 1.0);

  const ParamVector base = op.params();
  op.forward(input);
  const auto base_signature = op.kink_signature();
  const OperatorGrads analytic = op.backward(weights);

  // Returns false when the probe crossed a kink.
  auto probe = [&](const ParamVector& p, const Grid& x, double& value) {
    if (!op.frozen()) op.set_params(p);
    value = weighted_sum(op.forward(x), weights);
    return op.kink_signature() == base_signature;
  };
  auto step_for = [&](double v) { return options.h * std::max(1.0, std::abs(v)); };

  if (!op.frozen() && !analytic.params.values.empty()) {
    ParamVector p = base;
    const std::size_t want = options.max_params == 0 ? base.size() : std::min(options.max_params, base.size());
    auto order = visit_order(base.size(), options.max_params, rng);
    if (!options.focus.empty())
      std::stable_partition(order.begin(), order.end(), [&](std::size_t i) {
        return base.names[i].find(options.focus) != std::string::npos;
      });
    for (std::size_t i : order) {
      if (report.params.size() >= want) break;
      const double h = step_for(base.values[i]);
      double fp = 0.0, fm = 0.0;
      p.values[i] = base.values[i] + h;
      const bool ok_p = probe(p, input, fp);
      p.values[i] = base.values[i] - h;
      const bool ok_m = probe(p, input, fm);
      p.values[i] = base.values[i];
      if (!ok_p || !ok_m) {
        ++report.kink_skipped;
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * h);
      report.params.push_back({base.names[i], analytic.params.values[i], numeric,
                               relative_error(analytic.params.values[i], numeric)});
    }
    op.set_params(base);
  }

  {
    Grid x = input;
    const std::size_t want = options.max_inputs == 0 ? input.size() : std::min(options.max_inputs, input.size());
    for (std::size_t i : visit_order(input.size(), options.max_inputs, rng)) {
      if (report.inputs.size() >= want) break;
      const double h = step_for(input.v[i]);
      double fp = 0.0, fm = 0.0;
      x.v[i] = input.v[i] + h;
      const bool ok_p = probe(base, x, fp);
      x.v[i] = input.v[i] - h;
      const bool ok_m = probe(base, x, fm);
      x.v[i] = input.v[i];
      if (!ok_p || !ok_m) {
        ++report.kink_skipped;
        continue;
      }
      const double numeric = (fp - fm) / (2.0 * h);
      const int px = static_cast<int>(i % static_cast<std::size_t>(input.width));
      const int py = static_cast<int>(i / static_cast<std::size_t>(input.width));
      report.inputs.push_back({"input[" + std::to_string(px) + "," + std::to_string(py) + "]", analytic.input.v[i],
                               numeric, relative_error(analytic.input.v[i], numeric)});
    }
  }
  if (!op.frozen()) op.set_params(base);
  op.forward(input);

  for (const auto& e : report.params)
    if (e.rel_error >= report.max_param_error) {
      report.max_param_error = e.rel_error;
      report.worst_param = e.name;
    }
  for (const auto& e : report.inputs)
    if (e.rel_error >= report.max_input_error) {
      report.max_input_error = e.rel_error;
      report.worst_input = e.name;
    }
  const bool finite = std::isfinite(report.max_param_error) && std::isfinite(report.max_input_error);
  report.passed = finite && report.max_param_error <= tolerance && report.max_input_error <= tolerance;
  return report;
}

Grid sample_check_input(TrainableOperator& op, int width, int height, std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(derive_seed(seed, {stream::kGradCheck, 1, attempt}));
    Grid x(width, height);
    for (double& v : x.v) v = rng.uniform();
    op.forward(x);
    if (op.kink_margin() >= 1e-6 || attempt >= 64) return x;
  }
}

OperatorGrads FaultInjectingOperator::backward(const Grid& upstream) {
  OperatorGrads g = inner_.backward(upstream);
  for (std::size_t i = 0; i < g.params.size(); ++i)
    if (g.params.names[i].find(match_) != std::string::npos) g.params.values[i] *= factor_;
  return g;
}

void GradCheckReport::print(std::ostream& out) const {
  char line[256];
  out << "gradient check: " << op_name << " (tolerance " << tolerance << ")\n";
  std::snprintf(line, sizeof line, "  %-28s %16s %16s %12s\n", "parameter", "analytic", "numeric", "rel_error");
  out << line;
  for (const auto& e : params) {
    std::snprintf(line, sizeof line, "  %-28s %16.9e %16.9e %12.3e%s\n", e.name.c_str(), e.analytic, e.numeric,
                  e.rel_error, e.rel_error > tolerance ? "  FAIL" : "");
    out << line;
  }
  std::snprintf(line, sizeof line, "  max parameter error %.3e (%s)\n", max_param_error, worst_param.c_str());
  out << line;
  std::snprintf(line, sizeof line, "  max input error     %.3e (%s) over %zu pixels\n", max_input_error,
                worst_input.c_str(), inputs.size());
  out << line;
  if (kink_skipped > 0) out << "  skipped " << kink_skipped << " coordinates at activation kinks\n";
  out << "  result: " << (passed ? "PASS" : "FAIL") << "\n";
}

}  // namespace n2c

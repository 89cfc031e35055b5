#include "n2c/bilateral.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "n2c/errors.hpp"
#include "n2c/parallel.hpp"

namespace n2c {

double softplus(double u) {
  if (u > 30.0) return u;
  if (u < -30.0) return std::exp(u);  // log1p(e) == e to double precision here
  return std::log1p(std::exp(u));
}

double softplus_inverse(double s) {
  if (!(s > 0.0)) throw ConfigError("softplus_inverse needs a positive value");
  return s > 30.0 ? s : std::log(std::expm1(s));
}

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

BilateralLayerParams BilateralLayerParams::from_sigmas(double sigma_sx, double sigma_sy, double sigma_r) {
  return {softplus_inverse(sigma_sx), softplus_inverse(sigma_sy), softplus_inverse(sigma_r)};
}

BilateralStackParams BilateralStackParams::initial(int depth) {
  if (depth < 1) throw ConfigError("filter stack depth must be >= 1");
  return {std::vector<BilateralLayerParams>(static_cast<std::size_t>(depth), BilateralLayerParams::initial())};
}

ParamVector BilateralStackParams::to_params() const {
  ParamVector p;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    p.values.insert(p.values.end(), {layers[i].raw_sigma_sx, layers[i].raw_sigma_sy, layers[i].raw_sigma_r});
    p.names.insert(p.names.end(), {prefix + "sigma_sx", prefix + "sigma_sy", prefix + "sigma_r"});
  }
  return p;
}

BilateralStackParams BilateralStackParams::from_params(const ParamVector& p) {
  if (p.size() == 0 || p.size() % 3 != 0)
    throw ContractError("filter stack parameter vector must hold 3 values per layer, got " + std::to_string(p.size()));
  BilateralStackParams s;
  for (std::size_t i = 0; i < p.size(); i += 3) s.layers.push_back({p.values[i], p.values[i + 1], p.values[i + 2]});
  return s;
}

void FilterWindow::validate() const {
  if (radius_x < 1 || radius_y < 1) throw ConfigError("filter window radius must be >= 1");
}

FilterWindow window_for(const BilateralLayerParams& p) {
  auto radius = [](double sigma) {
    const double r = std::ceil(3.0 * sigma);
    return static_cast<int>(std::clamp(r, 1.0, static_cast<double>(kMaxWindowRadius)));
  };
  return {radius(p.sigma_sx()), radius(p.sigma_sy()), BorderPolicy::kClampToEdge};
}

namespace {

// Rows per tile in the backward pass; fixed so that partial sums are reduced
// in the same order for any thread count.
constexpr int kTileRows = 16;

struct Kernel {
  int rx, ry;
  double sx, sy, sr;
  double inv_2sr2;
  std::vector<double> spatial;  // (2ry+1) x (2rx+1)

  Kernel(const BilateralLayerParams& p, const FilterWindow& w)
      : rx(w.radius_x), ry(w.radius_y), sx(p.sigma_sx()), sy(p.sigma_sy()), sr(p.sigma_r()) {
    inv_2sr2 = 1.0 / (2.0 * sr * sr);
    spatial.resize(static_cast<std::size_t>(2 * rx + 1) * (2 * ry + 1));
    for (int dy = -ry; dy <= ry; ++dy)
      for (int dx = -rx; dx <= rx; ++dx)
        spatial[idx(dx, dy)] = std::exp(-(dx * dx) / (2.0 * sx * sx) - (dy * dy) / (2.0 * sy * sy));
  }
  std::size_t idx(int dx, int dy) const { return static_cast<std::size_t>(dy + ry) * (2 * rx + 1) + (dx + rx); }
};

void check_input(const Grid& x, const FilterWindow& window) {
  window.validate();
  if (x.width <= 0 || x.height <= 0 || x.size() != static_cast<std::size_t>(x.width) * x.height)
    throw ContractError("bilateral filter input has an invalid shape");
  if (!grid_all_finite(x)) throw DataError("bilateral filter input contains non-finite values");
}

// Per-pixel weighted mean and normalizer.
void pixel_mean(const Grid& x, const Kernel& k, int px, int py, double& mean, double& alpha) {
  const double xk = x.at(px, py);
  double num = 0.0, den = 0.0;
  for (int dy = -k.ry; dy <= k.ry; ++dy) {
    const int ny = std::clamp(py + dy, 0, x.height - 1);
    const double* row = x.v.data() + static_cast<std::size_t>(ny) * x.width;
    const double* sw = k.spatial.data() + k.idx(-k.rx, dy);
    for (int dx = -k.rx; dx <= k.rx; ++dx) {
      const double xn = row[std::clamp(px + dx, 0, x.width - 1)];
      const double d = xk - xn;
      const double w = sw[dx + k.rx] * std::exp(-d * d * k.inv_2sr2);
      num += w * xn;
      den += w;
    }
  }
  alpha = den;
  mean = num / den;
}

}  // namespace

Grid bf_forward(const Grid& x, const BilateralLayerParams& params, const FilterWindow& window) {
  check_input(x, window);
  const Kernel k(params, window);
  Grid out(x.width, x.height);
  parallel_for(static_cast<std::size_t>(x.height), [&](std::size_t row) {
    const int py = static_cast<int>(row);
    for (int px = 0; px < x.width; ++px) {
      double alpha;
      pixel_mean(x, k, px, py, out.at(px, py), alpha);
    }
  });
  return out;
}

BilateralLayerGrads bf_backward(const Grid& x, const BilateralLayerParams& params, const FilterWindow& window,
                                const Grid& upstream) {
  check_input(x, window);
  if (!upstream.same_shape(x)) throw ContractError("upstream gradient shape does not match the filter input");
  if (!grid_all_finite(upstream)) throw NumericalError("upstream gradient contains non-finite values");

  const Kernel k(params, window);
  const int tiles = (x.height + kTileRows - 1) / kTileRows;
  struct Partial {
    Grid grad;
    double dsx = 0.0, dsy = 0.0, dsr = 0.0;
  };
  std::vector<Partial> partials(static_cast<std::size_t>(tiles));
  const double inv_sr2 = 1.0 / (k.sr * k.sr);
  const double inv_sx3 = 1.0 / (k.sx * k.sx * k.sx);
  const double inv_sy3 = 1.0 / (k.sy * k.sy * k.sy);
  const double inv_sr3 = 1.0 / (k.sr * k.sr * k.sr);

  parallel_for(partials.size(), [&](std::size_t t) {
    Partial& part = partials[t];
    part.grad = Grid(x.width, x.height);
    const int y0 = static_cast<int>(t) * kTileRows;
    const int y1 = std::min(x.height, y0 + kTileRows);
    for (int py = y0; py < y1; ++py)
      for (int px = 0; px < x.width; ++px) {
        const double g = upstream.at(px, py);
        if (g == 0.0) continue;
        double mean, alpha;
        pixel_mean(x, k, px, py, mean, alpha);
        const double c = g / alpha;
        const double xk = x.at(px, py);
        double self = 0.0;
        for (int dy = -k.ry; dy <= k.ry; ++dy) {
          const int ny = std::clamp(py + dy, 0, x.height - 1);
          for (int dx = -k.rx; dx <= k.rx; ++dx) {
            const int nx = std::clamp(px + dx, 0, x.width - 1);
            const double xn = x.at(nx, ny);
            const double d = xk - xn;
            const double w = k.spatial[k.idx(dx, dy)] * std::exp(-d * d * k.inv_2sr2);
            const double cwdiff = c * w * (xn - mean);
            part.dsx += cwdiff * (dx * dx) * inv_sx3;
            part.dsy += cwdiff * (dy * dy) * inv_sy3;
            part.dsr += cwdiff * d * d * inv_sr3;
            const double range_term = cwdiff * d * inv_sr2;
            part.grad.at(nx, ny) += c * w + range_term;
            self -= range_term;
          }
        }
        part.grad.at(px, py) += self;
      }
  });

  BilateralLayerGrads out;
  out.input = Grid(x.width, x.height);
  double dsx = 0.0, dsy = 0.0, dsr = 0.0;
  for (const Partial& part : partials) {
    for (std::size_t i = 0; i < out.input.size(); ++i) out.input.v[i] += part.grad.v[i];
    dsx += part.dsx;
    dsy += part.dsy;
    dsr += part.dsr;
  }
  out.raw_sigma_sx = dsx * sigmoid(params.raw_sigma_sx);
  out.raw_sigma_sy = dsy * sigmoid(params.raw_sigma_sy);
  out.raw_sigma_r = dsr * sigmoid(params.raw_sigma_r);
  return out;
}

std::pair<Grid, StackTrace> stack_forward(const Grid& x, const BilateralStackParams& params,
                                          std::optional<std::vector<FilterWindow>> windows) {
  if (params.layers.empty()) throw ContractError("filter stack has no layers");
  if (windows && windows->size() != params.layers.size())
    throw ContractError("filter stack needs one window per layer");
  StackTrace trace;
  trace.params = params;
  trace.out_width = x.width;
  trace.out_height = x.height;
  Grid cur = x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const FilterWindow w = windows ? (*windows)[i] : window_for(params.layers[i]);
    trace.windows.push_back(w);
    Grid next = bf_forward(cur, params.layers[i], w);
    trace.layer_inputs.push_back(std::move(cur));
    cur = std::move(next);
  }
  return {std::move(cur), std::move(trace)};
}

std::pair<ParamVector, Grid> stack_backward(const StackTrace& trace, const Grid& upstream) {
  const std::size_t n = trace.params.layers.size();
  if (n == 0 || trace.layer_inputs.size() != n || trace.windows.size() != n)
    throw ContractError("filter stack trace does not match its parameters");
  if (upstream.width != trace.out_width || upstream.height != trace.out_height)
    throw ContractError("upstream gradient shape does not match the stack output");
  ParamVector grads = trace.params.to_params().zeros_like();
  Grid g = upstream;
  for (std::size_t i = n; i-- > 0;) {
    BilateralLayerGrads lg = bf_backward(trace.layer_inputs[i], trace.params.layers[i], trace.windows[i], g);
    grads.values[3 * i] = lg.raw_sigma_sx;
    grads.values[3 * i + 1] = lg.raw_sigma_sy;
    grads.values[3 * i + 2] = lg.raw_sigma_r;
    g = std::move(lg.input);
  }
  return {std::move(grads), std::move(g)};
}

BilateralStackOperator::BilateralStackOperator(BilateralStackParams params)
    : stack_(std::move(params)), flat_(stack_.to_params()) {
  for (const auto& l : stack_.layers) windows_.push_back(window_for(l));
}

void BilateralStackOperator::set_params(const ParamVector& p) {
  if (p.size() != flat_.size()) throw ContractError("filter stack parameter count mismatch");
  stack_ = BilateralStackParams::from_params(p);
  flat_.values = p.values;
}

Grid BilateralStackOperator::forward(const Grid& x) {
  auto [out, trace] = stack_forward(x, stack_, windows_);
  trace_ = std::move(trace);
  return out;
}

OperatorGrads BilateralStackOperator::backward(const Grid& upstream) {
  if (!trace_) throw ContractError("backward called before forward");
  auto [pg, ig] = stack_backward(*trace_, upstream);
  return {std::move(pg), std::move(ig)};
}

}  // namespace n2c

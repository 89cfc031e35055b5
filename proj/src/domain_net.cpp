#include "n2c/domain_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "n2c/errors.hpp"
#include "n2c/parallel.hpp"
#include "n2c/rng.hpp"

namespace n2c {
namespace {

struct ConvSpec {
  std::string name;
  int in = 0;
  int out = 0;
  int k = 0;
  bool relu = true;
  std::size_t w_offset = 0;
  std::size_t b_offset = 0;
};

// Convolutions in forward (and parameter) order.
std::vector<ConvSpec> conv_layers(const NetConfig& c) {
  std::vector<ConvSpec> layers;
  auto add = [&](std::string name, int in, int out, int k, bool relu) {
    layers.push_back({std::move(name), in, out, k, relu, 0, 0});
  };
  auto width = [&](int level) { return c.base_features << std::min(level, c.depth - 1); };
  int ch = 1;
  for (int l = 0; l < c.depth; ++l) {
    const std::string p = "enc" + std::to_string(l);
    add(p + ".conv1", ch, width(l), c.kernel_size, true);
    add(p + ".conv2", width(l), width(l), c.kernel_size, true);
    ch = width(l);
  }
  add("bottleneck.conv1", ch, width(c.depth), c.kernel_size, true);
  add("bottleneck.conv2", width(c.depth), width(c.depth), c.kernel_size, true);
  ch = width(c.depth);
  for (int l = c.depth - 1; l >= 0; --l) {
    const std::string p = "dec" + std::to_string(l);
    add(p + ".conv1", ch + width(l), width(l), c.kernel_size, true);
    add(p + ".conv2", width(l), width(l), c.kernel_size, true);
    ch = width(l);
  }
  add("head", ch, 1, 1, false);
  std::size_t off = 0;
  for (auto& l : layers) {
    l.w_offset = off;
    off += static_cast<std::size_t>(l.out) * l.in * l.k * l.k;
    l.b_offset = off;
    off += static_cast<std::size_t>(l.out);
  }
  return layers;
}

void conv_forward(const Tensor& in, const double* weights, const double* bias, const ConvSpec& s, Tensor& out) {
  out = Tensor(s.out, in.height, in.width);
  const int pad = s.k / 2;
  const int h = in.height, w = in.width;
  parallel_for(static_cast<std::size_t>(s.out), [&](std::size_t co_idx) {
    const int co = static_cast<int>(co_idx);
    double* o = out.channel(co);
    std::fill(o, o + out.plane(), bias[co]);
    for (int ci = 0; ci < s.in; ++ci) {
      const double* src = in.channel(ci);
      const double* wk = weights + (static_cast<std::size_t>(co) * s.in + ci) * s.k * s.k;
      for (int ky = 0; ky < s.k; ++ky)
        for (int kx = 0; kx < s.k; ++kx) {
          const double wv = wk[ky * s.k + kx];
          if (wv == 0.0) continue;
          const int oy = ky - pad, ox = kx - pad;
          const int y0 = std::max(0, -oy), y1 = std::min(h, h - oy);
          const int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
          for (int y = y0; y < y1; ++y) {
            double* orow = o + static_cast<std::size_t>(y) * w;
            const double* irow = src + static_cast<std::size_t>(y + oy) * w + ox;
            for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
          }
        }
    }
  });
}

// grad_out is the gradient w.r.t. the pre-activation output.
void conv_backward(const Tensor& in, const double* weights, const ConvSpec& s, const Tensor& grad_out,
                   double* grad_w, double* grad_b, Tensor& grad_in) {
  const int pad = s.k / 2;
  const int h = in.height, w = in.width;
  if (grad_w != nullptr) {
    parallel_for(static_cast<std::size_t>(s.out), [&](std::size_t co_idx) {
      const int co = static_cast<int>(co_idx);
      const double* g = grad_out.channel(co);
      double bsum = 0.0;
      for (std::size_t i = 0; i < grad_out.plane(); ++i) bsum += g[i];
      grad_b[co] += bsum;
      for (int ci = 0; ci < s.in; ++ci) {
        const double* src = in.channel(ci);
        double* gw = grad_w + (static_cast<std::size_t>(co) * s.in + ci) * s.k * s.k;
        for (int ky = 0; ky < s.k; ++ky)
          for (int kx = 0; kx < s.k; ++kx) {
            const int oy = ky - pad, ox = kx - pad;
            const int y0 = std::max(0, -oy), y1 = std::min(h, h - oy);
            const int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
            double acc = 0.0;
            for (int y = y0; y < y1; ++y) {
              const double* grow = g + static_cast<std::size_t>(y) * w;
              const double* irow = src + static_cast<std::size_t>(y + oy) * w + ox;
              for (int x = x0; x < x1; ++x) acc += grow[x] * irow[x];
            }
            gw[ky * s.k + kx] += acc;
          }
      }
    });
  }
  grad_in = Tensor(s.in, h, w);
  parallel_for(static_cast<std::size_t>(s.in), [&](std::size_t ci_idx) {
    const int ci = static_cast<int>(ci_idx);
    double* gi = grad_in.channel(ci);
    for (int co = 0; co < s.out; ++co) {
      const double* g = grad_out.channel(co);
      const double* wk = weights + (static_cast<std::size_t>(co) * s.in + ci) * s.k * s.k;
      for (int ky = 0; ky < s.k; ++ky)
        for (int kx = 0; kx < s.k; ++kx) {
          const double wv = wk[ky * s.k + kx];
          if (wv == 0.0) continue;
          const int oy = ky - pad, ox = kx - pad;
          const int y0 = std::max(0, -oy), y1 = std::min(h, h - oy);
          const int x0 = std::max(0, -ox), x1 = std::min(w, w - ox);
          for (int y = y0; y < y1; ++y) {
            const double* grow = g + static_cast<std::size_t>(y) * w;
            double* irow = gi + static_cast<std::size_t>(y + oy) * w + ox;
            for (int x = x0; x < x1; ++x) irow[x] += wv * grow[x];
          }
        }
    }
  });
}

Tensor relu(const Tensor& t) {
  Tensor r = t;
  for (double& x : r.v) x = x > 0.0 ? x : 0.0;
  return r;
}

void relu_backward(const Tensor& pre, Tensor& grad) {
  for (std::size_t i = 0; i < grad.v.size(); ++i)
    if (!(pre.v[i] > 0.0)) grad.v[i] = 0.0;
}

Tensor avg_pool(const Tensor& t) {
  Tensor o(t.channels, t.height / 2, t.width / 2);
  for (int c = 0; c < t.channels; ++c) {
    const double* s = t.channel(c);
    double* d = o.channel(c);
    for (int y = 0; y < o.height; ++y)
      for (int x = 0; x < o.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(2 * y) * t.width + 2 * x;
        d[static_cast<std::size_t>(y) * o.width + x] = 0.25 * (s[i] + s[i + 1] + s[i + t.width] + s[i + t.width + 1]);
      }
  }
  return o;
}

Tensor avg_pool_backward(const Tensor& g, int h, int w) {
  Tensor o(g.channels, h, w);
  for (int c = 0; c < g.channels; ++c) {
    const double* s = g.channel(c);
    double* d = o.channel(c);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) d[static_cast<std::size_t>(y) * w + x] = 0.25 * s[static_cast<std::size_t>(y / 2) * g.width + x / 2];
  }
  return o;
}

Tensor upsample(const Tensor& t) {
  Tensor o(t.channels, t.height * 2, t.width * 2);
  for (int c = 0; c < t.channels; ++c) {
    const double* s = t.channel(c);
    double* d = o.channel(c);
    for (int y = 0; y < o.height; ++y)
      for (int x = 0; x < o.width; ++x) d[static_cast<std::size_t>(y) * o.width + x] = s[static_cast<std::size_t>(y / 2) * t.width + x / 2];
  }
  return o;
}

Tensor upsample_backward(const Tensor& g) {
  Tensor o(g.channels, g.height / 2, g.width / 2);
  for (int c = 0; c < g.channels; ++c) {
    const double* s = g.channel(c);
    double* d = o.channel(c);
    for (int y = 0; y < g.height; ++y)
      for (int x = 0; x < g.width; ++x) d[static_cast<std::size_t>(y / 2) * o.width + x / 2] += s[static_cast<std::size_t>(y) * g.width + x];
  }
  return o;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor o(a.channels + b.channels, a.height, a.width);
  std::copy(a.v.begin(), a.v.end(), o.v.begin());
  std::copy(b.v.begin(), b.v.end(), o.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()));
  return o;
}

std::pair<Tensor, Tensor> split(const Tensor& t, int first) {
  Tensor a(first, t.height, t.width), b(t.channels - first, t.height, t.width);
  std::copy(t.v.begin(), t.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()), a.v.begin());
  std::copy(t.v.begin() + static_cast<std::ptrdiff_t>(a.v.size()), t.v.end(), b.v.begin());
  return {std::move(a), std::move(b)};
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

}  // namespace

void NetConfig::validate() const {
  if (base_features < 4) throw ConfigError("base_features must be >= 4, got " + std::to_string(base_features));
  if (depth < 1) throw ConfigError("depth must be >= 1, got " + std::to_string(depth));
  if (kernel_size != 3) throw ConfigError("kernel_size must be 3, got " + std::to_string(kernel_size));
  if (depth > 6) throw ConfigError("depth must be <= 6, got " + std::to_string(depth));
}

std::size_t TensorSpec::count() const {
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

std::vector<TensorSpec> net_manifest(const NetConfig& config) {
  config.validate();
  std::vector<TensorSpec> m;
  for (const auto& l : conv_layers(config)) {
    m.push_back({l.name + ".weight", {l.out, l.in, l.k, l.k}});
    m.push_back({l.name + ".bias", {l.out}});
  }
  return m;
}

std::size_t net_param_count(const NetConfig& config) {
  std::size_t n = 0;
  for (const auto& t : net_manifest(config)) n += t.count();
  return n;
}

void DomainNetParams::validate() const {
  config.validate();
  if (manifest != net_manifest(config)) throw ContractError("domain net manifest does not match its config");
  if (flat.size() != net_param_count(config) || flat.names.size() != flat.values.size())
    throw ContractError("domain net parameter count " + std::to_string(flat.size()) + " does not match manifest " +
                        std::to_string(net_param_count(config)));
}

void quantize_to_float(ParamVector& p) {
  for (double& v : p.values) v = static_cast<double>(static_cast<float>(v));
}

DomainNetParams net_init(const NetConfig& config, std::uint64_t seed) {
  config.validate();
  DomainNetParams p;
  p.config = config;
  p.manifest = net_manifest(config);
  Rng rng(derive_seed(seed, {stream::kNetInit}));
  for (const auto& t : p.manifest) {
    const bool is_weight = t.dims.size() == 4;
    const double fan_in = is_weight ? static_cast<double>(t.dims[1]) * t.dims[2] * t.dims[3] : 1.0;
    const double bound = std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < t.count(); ++i) {
      p.flat.values.push_back(is_weight ? rng.uniform(-bound, bound) : 0.0);
      p.flat.names.push_back(t.name + "[" + std::to_string(i) + "]");
    }
  }
  quantize_to_float(p.flat);
  return p;
}

std::vector<std::uint8_t> NetTrace::relu_signature() const {
  std::vector<std::uint8_t> sig;
  const auto layers = conv_layers(params->config);
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].relu)
      for (double x : conv_outputs[i].v) sig.push_back(x > 0.0 ? 1 : 0);
  return sig;
}

double NetTrace::relu_margin() const {
  double m = std::numeric_limits<double>::infinity();
  const auto layers = conv_layers(params->config);
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].relu)
      for (double x : conv_outputs[i].v) m = std::min(m, std::abs(x));
  return m;
}

std::pair<Grid, NetTrace> net_forward(const Grid& x, std::shared_ptr<const DomainNetParams> params) {
  const NetConfig& cfg = params->config;
  const int mult = 1 << cfg.depth;
  if (x.width % mult != 0 || x.height % mult != 0)
    throw ContractError("domain net input " + std::to_string(x.width) + "x" + std::to_string(x.height) +
                        " is not divisible by 2^depth = " + std::to_string(mult) + "; pad the image first");
  if (params->flat.size() != net_param_count(cfg)) throw ContractError("domain net parameter count mismatch");
  if (!grid_all_finite(x)) throw DataError("domain net input contains non-finite values");

  const auto layers = conv_layers(cfg);
  const double* w = params->flat.values.data();
  NetTrace trace;
  trace.params = params;
  trace.width = x.width;
  trace.height = x.height;
  trace.conv_inputs.resize(layers.size());
  trace.conv_outputs.resize(layers.size());

  std::size_t li = 0;
  auto conv = [&](const Tensor& in) {
    const ConvSpec& s = layers[li];
    trace.conv_inputs[li] = in;
    conv_forward(in, w + s.w_offset, w + s.b_offset, s, trace.conv_outputs[li]);
    Tensor out = s.relu ? relu(trace.conv_outputs[li]) : trace.conv_outputs[li];
    ++li;
    return out;
  };

  Tensor t(1, x.height, x.width);
  std::copy(x.v.begin(), x.v.end(), t.v.begin());
  std::vector<Tensor> skips;
  for (int l = 0; l < cfg.depth; ++l) {
    t = conv(t);
    t = conv(t);
    skips.push_back(t);
    t = avg_pool(t);
  }
  t = conv(t);
  t = conv(t);
  for (int l = cfg.depth - 1; l >= 0; --l) {
    t = concat(upsample(t), skips[static_cast<std::size_t>(l)]);
    t = conv(t);
    t = conv(t);
  }
  t = conv(t);

  Grid out(x.width, x.height);
  std::copy(t.v.begin(), t.v.end(), out.v.begin());
  return {std::move(out), std::move(trace)};
}

std::pair<Grid, NetTrace> net_forward(const Grid& x, const DomainNetParams& params) {
  return net_forward(x, std::make_shared<const DomainNetParams>(params));
}

std::pair<ParamVector, Grid> net_backward(const NetTrace& trace, const Grid& upstream, bool want_params) {
  if (!trace.params) throw ContractError("domain net trace is empty");
  if (upstream.width != trace.width || upstream.height != trace.height)
    throw ContractError("upstream gradient shape does not match the domain net output");
  if (!grid_all_finite(upstream)) throw NumericalError("upstream gradient contains non-finite values");
  const NetConfig& cfg = trace.params->config;
  const auto layers = conv_layers(cfg);
  if (trace.conv_inputs.size() != layers.size()) throw ContractError("domain net trace does not match its config");

  ParamVector grads;
  if (want_params) grads = trace.params->flat.zeros_like();
  const double* w = trace.params->flat.values.data();

  std::size_t li = layers.size();
  // Backward through one convolution; g is the gradient w.r.t. its activated output.
  auto conv_back = [&](Tensor g) {
    --li;
    const ConvSpec& s = layers[li];
    if (s.relu) relu_backward(trace.conv_outputs[li], g);
    Tensor gin;
    conv_backward(trace.conv_inputs[li], w + s.w_offset, s, g, want_params ? grads.values.data() + s.w_offset : nullptr,
                  want_params ? grads.values.data() + s.b_offset : nullptr, gin);
    return gin;
  };

  Tensor g(1, trace.height, trace.width);
  std::copy(upstream.v.begin(), upstream.v.end(), g.v.begin());
  g = conv_back(std::move(g));

  std::vector<Tensor> skip_grads(static_cast<std::size_t>(cfg.depth));
  for (int l = 0; l < cfg.depth; ++l) {
    g = conv_back(std::move(g));
    g = conv_back(std::move(g));
    const int up_channels = g.channels - trace.conv_outputs[2 * static_cast<std::size_t>(l) + 1].channels;
    auto [gu, gs] = split(g, up_channels);
    skip_grads[static_cast<std::size_t>(l)] = std::move(gs);
    g = upsample_backward(gu);
  }
  g = conv_back(std::move(g));
  g = conv_back(std::move(g));
  for (int l = cfg.depth - 1; l >= 0; --l) {
    const Tensor& skip_pre = trace.conv_outputs[2 * static_cast<std::size_t>(l) + 1];
    Tensor ge = avg_pool_backward(g, skip_pre.height, skip_pre.width);
    add_into(ge, skip_grads[static_cast<std::size_t>(l)]);
    g = conv_back(std::move(ge));
    g = conv_back(std::move(g));
  }

  Grid gin(trace.width, trace.height);
  std::copy(g.v.begin(), g.v.end(), gin.v.begin());
  return {std::move(grads), std::move(gin)};
}

DomainNetOperator::DomainNetOperator(DomainNetParams params)
    : params_(std::make_shared<DomainNetParams>(std::move(params))) {}

void DomainNetOperator::set_params(const ParamVector& p) {
  if (p.size() != params_->flat.size()) throw ContractError("domain net parameter count mismatch");
  // Copy-on-write: an outstanding trace keeps the parameters it was built with.
  auto next = std::make_shared<DomainNetParams>(*params_);
  next->flat.values = p.values;
  params_ = std::move(next);
}

Grid DomainNetOperator::forward(const Grid& x) {
  auto [out, trace] = net_forward(x, std::shared_ptr<const DomainNetParams>(params_));
  trace_ = std::move(trace);
  return out;
}

OperatorGrads DomainNetOperator::backward(const Grid& upstream) {
  if (!trace_) throw ContractError("backward called before forward");
  auto [pg, ig] = net_backward(*trace_, upstream);
  return {std::move(pg), std::move(ig)};
}

std::vector<std::uint8_t> DomainNetOperator::kink_signature() const {
  return trace_ ? trace_->relu_signature() : std::vector<std::uint8_t>{};
}

double DomainNetOperator::kink_margin() const {
  return trace_ ? trace_->relu_margin() : std::numeric_limits<double>::infinity();
}

FrozenNet::FrozenNet(DomainNetParams params) : params_(std::make_shared<const DomainNetParams>(std::move(params))) {}

void FrozenNet::set_params(const ParamVector&) {
  throw ContractError("parameters of a frozen domain net cannot be updated");
}

Grid FrozenNet::forward(const Grid& x) {
  auto [out, trace] = net_forward(x, params_);
  trace_ = std::move(trace);
  return out;
}

Grid FrozenNet::grad_input(const Grid& upstream) const {
  if (!trace_) throw ContractError("grad_input called before forward");
  return net_backward(*trace_, upstream, false).second;
}

OperatorGrads FrozenNet::backward(const Grid& upstream) { return {ParamVector{}, grad_input(upstream)}; }

std::vector<std::uint8_t> FrozenNet::kink_signature() const {
  return trace_ ? trace_->relu_signature() : std::vector<std::uint8_t>{};
}

double FrozenNet::kink_margin() const {
  return trace_ ? trace_->relu_margin() : std::numeric_limits<double>::infinity();
}

FrozenNet freeze(const DomainNetParams& params) {
  params.validate();
  return FrozenNet(params);
}

}  // namespace n2c

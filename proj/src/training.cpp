#include "n2c/training.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>

#include <json.hpp>

#include "n2c/config.hpp"
#include "n2c/errors.hpp"
#include "n2c/rng.hpp"

namespace n2c {

namespace {

constexpr std::array<std::pair<Scheme, std::string_view>, 6> kSchemes = {{
    {Scheme::kN2cBfs, "n2c_bfs"},
    {Scheme::kN2cNet, "n2c_net"},
    {Scheme::kN2vBfs, "n2v_bfs"},
    {Scheme::kN2NeighborBfs, "n2neighbor_bfs"},
    {Scheme::kN2nDirect, "n2n_direct"},
    {Scheme::kBfOnlyCrossContrast, "bf_only_crosscontrast"},
}};

// Seed of the fixed sample used when a slice's objective is evaluated
// without updating (validation and initial/final training loss).
constexpr std::uint64_t kEvalEpoch = 0xffffffffULL;

}  // namespace

std::string_view to_string(Scheme s) {
  for (const auto& [k, name] : kSchemes)
    if (k == s) return name;
  return "unknown";
}

std::vector<std::string_view> scheme_names() {
  std::vector<std::string_view> out;
  for (const auto& e : kSchemes) out.push_back(e.second);
  return out;
}

Scheme scheme_from_string(std::string_view s) {
  for (const auto& [k, name] : kSchemes)
    if (name == s) return k;
  std::string valid;
  for (const auto& e : kSchemes) valid += (valid.empty() ? "" : ", ") + std::string(e.second);
  throw ConfigError("unknown scheme '" + std::string(s) + "'; valid schemes: " + valid);
}

TrainConfig TrainConfig::desk_scale(Scheme scheme) {
  TrainConfig c;
  c.scheme = scheme;
  c.lr = 1e-3;
  c.filter_lr = 1e-2;
  c.max_epochs = 150;
  c.patience = 10;
  return c;
}

bool TrainConfig::cross_contrast() const {
  return scheme == Scheme::kN2cBfs || scheme == Scheme::kN2cNet || scheme == Scheme::kN2nDirect ||
         scheme == Scheme::kBfOnlyCrossContrast;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  if (!(filter_lr > 0.0)) throw ConfigError("filter_lr must be > 0");
  if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (cross_contrast() && input_contrast == target_contrast)
    throw ConfigError("input and target contrast must differ for scheme " + std::string(to_string(scheme)));
  if (!(n2v_mask_fraction > 0.0 && n2v_mask_fraction < 0.5))
    throw ConfigError("n2v_mask_fraction must lie in (0, 0.5)");
  if (n2v_replace_radius < 1) throw ConfigError("n2v_replace_radius must be >= 1");
  if (neighbor_offset < 0) throw ConfigError("neighbor_offset must be >= 0");
  if (n_val_slices < 1) throw ConfigError("n_val_slices must be >= 1");
  if (n_test_slices < 0) throw ConfigError("n_test_slices must be >= 0");
  if (stack_depth < 1) throw ConfigError("stack_depth must be >= 1");
  net.validate();
  MetricConfig m = metrics;
  m.data_range = 1.0;
  m.validate();
}

std::pair<double, Grid> mse_loss(const Grid& pred, const Grid& target) {
  if (!pred.same_shape(target) || pred.size() == 0) throw ContractError("mse_loss shape mismatch");
  Grid grad(pred.width, pred.height);
  const double n = static_cast<double>(pred.size());
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.v[i] - target.v[i];
    s += d * d;
    grad.v[i] = 2.0 * d / n;
  }
  return {s / n, std::move(grad)};
}

SliceSplit split_slices(int n_slices, const TrainConfig& cfg) {
  const int n_train = n_slices - cfg.n_val_slices - cfg.n_test_slices;
  if (n_train < 2)
    throw DataError("volume has " + std::to_string(n_slices) + " slices; need >= 2 training slices besides " +
                    std::to_string(cfg.n_val_slices) + " validation and " + std::to_string(cfg.n_test_slices) +
                    " test slices");
  SliceSplit s;
  for (int i = 0; i < n_slices; ++i) {
    if (i < n_train)
      s.train.push_back(i);
    else if (i < n_train + cfg.n_val_slices)
      s.val.push_back(i);
    else
      s.test.push_back(i);
  }
  return s;
}

BlindSpotSample blind_spot_mask(const Grid& noisy, double fraction, int radius, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 0.5)) throw ConfigError("n2v_mask_fraction must lie in (0, 0.5)");
  if (radius < 1) throw ConfigError("n2v_replace_radius must be >= 1");
  Rng rng(seed);
  const std::size_t n = noisy.size();
  const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  // Partial Fisher-Yates: the first m entries are a uniform sample without replacement.
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  BlindSpotSample out;
  out.masked.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(out.masked.begin(), out.masked.end());
  out.input = noisy;
  const int span = 2 * radius + 1;
  for (std::size_t p : out.masked) {
    const int x = static_cast<int>(p % static_cast<std::size_t>(noisy.width));
    const int y = static_cast<int>(p / static_cast<std::size_t>(noisy.width));
    // Redraw until the clamped neighbour is a different pixel.
    int nx = x, ny = y;
    while (nx == x && ny == y) {
      nx = std::clamp(x + static_cast<int>(rng.below(static_cast<std::uint64_t>(span))) - radius, 0, noisy.width - 1);
      ny = std::clamp(y + static_cast<int>(rng.below(static_cast<std::uint64_t>(span))) - radius, 0, noisy.height - 1);
    }
    out.input.v[p] = noisy.at(nx, ny);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bundle

const BilateralStackParams& ModelBundle::filter_stack() const {
  if (!filter) throw ContractError("model of scheme " + std::string(to_string(scheme)) + " has no filter stack");
  return *filter;
}

const DomainNetParams& ModelBundle::denoiser_network() const {
  if (!denoiser_net)
    throw ContractError("model of scheme " + std::string(to_string(scheme)) + " has no network denoiser");
  return *denoiser_net;
}

const DomainNetParams& ModelBundle::translator_network() const {
  if (!translator)
    throw ContractError("model of scheme " + std::string(to_string(scheme)) + " has no domain translator");
  return *translator;
}

void ModelBundle::validate() const {
  bool want_filter = false, want_net = false, want_translator = false;
  switch (scheme) {
    case Scheme::kN2cBfs:
      want_filter = want_translator = true;
      break;
    case Scheme::kN2cNet:
      want_net = want_translator = true;
      break;
    case Scheme::kN2vBfs:
    case Scheme::kN2NeighborBfs:
    case Scheme::kBfOnlyCrossContrast:
      want_filter = true;
      break;
    case Scheme::kN2nDirect:
      want_net = true;
      break;
  }
  const std::string s(to_string(scheme));
  if (filter.has_value() != want_filter)
    throw ContractError("scheme " + s + (want_filter ? " requires" : " must not carry") + " a filter stack");
  if (denoiser_net.has_value() != want_net)
    throw ContractError("scheme " + s + (want_net ? " requires" : " must not carry") + " a network denoiser");
  if (translator.has_value() != want_translator)
    throw ContractError("scheme " + s + (want_translator ? " requires" : " must not carry") + " a domain translator");
  if (filter && filter->layers.empty()) throw ContractError("filter stack has no layers");
  if (denoiser_net) denoiser_net->validate();
  if (translator) translator->validate();
}

Grid ModelBundle::denoise(const Grid& x) const {
  if (filter) return stack_forward(x, *filter).first;
  return net_forward(x, denoiser_network()).first;
}

Image ModelBundle::denoise(const Image& img) const {
  img.validate();
  return Image::from_grid(denoise(img.to_grid()), img.contrast, img.realization_id);
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

using Objective = std::function<double(int slice, std::uint64_t sample_seed, bool update)>;

struct StageHooks {
  Objective objective;
  std::function<void()> save_best;
  std::function<void()> restore_best;
};

double mean_objective(const Objective& f, const std::vector<int>& slices, const TrainConfig& cfg) {
  double s = 0.0;
  for (int i : slices) s += f(i, derive_seed(cfg.seed, {stream::kMasking, kEvalEpoch, static_cast<std::uint64_t>(i)}), false);
  return s / static_cast<double>(slices.size());
}

StageReport run_stage(const std::string& name, const TrainConfig& cfg, const SliceSplit& split,
                      const StageHooks& hooks) {
  StageReport r;
  r.name = name;
  r.initial_train_loss = mean_objective(hooks.objective, split.train, cfg);
  r.initial_val_loss = mean_objective(hooks.objective, split.val, cfg);
  if (!std::isfinite(r.initial_train_loss) || !std::isfinite(r.initial_val_loss))
    throw NumericalError(name + ": initial loss is not finite");
  r.best_val_loss = r.initial_val_loss;
  r.best_epoch = 0;
  r.stop_reason = cfg.max_epochs == 0 ? "no_epochs" : "max_epochs";
  hooks.save_best();

  std::vector<int> order = split.train;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng shuffle(derive_seed(cfg.seed, {stream::kShuffle, static_cast<std::uint64_t>(epoch)}));
    order = split.train;
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[shuffle.below(i + 1)]);

    double train_sum = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const auto seed = derive_seed(cfg.seed, {stream::kMasking, static_cast<std::uint64_t>(epoch), step});
      train_sum += hooks.objective(order[step], seed, true);
    }
    EpochRecord rec{epoch, train_sum / static_cast<double>(order.size()), mean_objective(hooks.objective, split.val, cfg)};
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss))
      throw NumericalError(name + ": loss diverged at epoch " + std::to_string(epoch));
    r.epochs.push_back(rec);
    r.stop_epoch = epoch;
    if (rec.val_loss < r.best_val_loss) {
      r.best_val_loss = rec.val_loss;
      r.best_epoch = epoch;
      hooks.save_best();
    } else if (epoch - r.best_epoch >= cfg.patience) {
      r.stop_reason = "early_stop";
      break;
    }
  }
  hooks.restore_best();
  r.final_train_loss = mean_objective(hooks.objective, split.train, cfg);
  return r;
}

Grid noisy_grid(const MultiContrastVolume& data, int slice, Contrast c, int realization = 0) {
  return data.slices[static_cast<std::size_t>(slice)].noisy(c, realization).to_grid();
}

void check_volume(const MultiContrastVolume& data, const TrainConfig& cfg) {
  cfg.validate();
  data.validate();
  for (std::size_t i = 0; i < data.slices.size(); ++i) {
    if (data.slices[i].noisy(cfg.input_contrast).empty())
      throw DataError("slice " + std::to_string(i) + " has no noisy " + std::string(to_string(cfg.input_contrast)) +
                      " image");
    if (cfg.cross_contrast() && data.slices[i].noisy(cfg.target_contrast).empty())
      throw DataError("slice " + std::to_string(i) + " lacks the second contrast " +
                      std::string(to_string(cfg.target_contrast)) + " needed by scheme " +
                      std::string(to_string(cfg.scheme)));
  }
}

// Trainable state for one run. Parameters and their Adam states are updated
// in place by the objectives below.
struct FilterSlot {
  BilateralStackParams params;
  AdamState adam;
  BilateralStackParams best;

  FilterSlot(int depth, double lr) : params(BilateralStackParams::initial(depth)) {
    adam = AdamState::for_params(params.to_params(), lr);
    best = params;
  }
  void step(const ParamVector& grads) {
    auto [next, state] = adam_step(params.to_params(), grads, adam);
    params = BilateralStackParams::from_params(next);
    adam = std::move(state);
  }
};

struct NetSlot {
  std::shared_ptr<const DomainNetParams> params;
  AdamState adam;
  std::shared_ptr<const DomainNetParams> best;

  NetSlot(DomainNetParams p, double lr) {
    adam = AdamState::for_params(p.flat, lr);
    params = std::make_shared<const DomainNetParams>(std::move(p));
    best = params;
  }
  void step(const ParamVector& grads) {
    auto [next, state] = adam_step(params->flat, grads, adam);
    quantize_to_float(next);
    auto updated = std::make_shared<DomainNetParams>(*params);
    updated->flat = std::move(next);
    params = std::move(updated);
    adam = std::move(state);
  }
};

TrainReport finish_report(const TrainConfig& cfg, std::vector<StageReport> stages,
                          std::chrono::steady_clock::time_point start) {
  TrainReport report;
  report.config = cfg;
  report.stages = std::move(stages);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

int neighbor_slice(int slice, int offset, int n_slices) {
  if (slice + offset < n_slices) return slice + offset;
  return slice - offset;
}

// Joint filter + translator stage shared by n2c_bfs and stage 1 of n2c_net.
StageReport train_joint(const MultiContrastVolume& data, const TrainConfig& cfg, const SliceSplit& split,
                        FilterSlot& filter, NetSlot& net) {
  StageHooks hooks;
  hooks.objective = [&](int slice, std::uint64_t, bool update) {
    const Grid x = noisy_grid(data, slice, cfg.input_contrast);
    const Grid target = noisy_grid(data, slice, cfg.target_contrast);
    auto [denoised, ftrace] = stack_forward(x, filter.params);
    auto [pred, ntrace] = net_forward(denoised, net.params);
    auto [loss, g] = mse_loss(pred, target);
    if (update) {
      auto [net_grads, g_denoised] = net_backward(ntrace, g);
      auto [filter_grads, g_input] = stack_backward(ftrace, g_denoised);
      filter.step(filter_grads);
      net.step(net_grads);
    }
    return loss;
  };
  hooks.save_best = [&] {
    filter.best = filter.params;
    net.best = net.params;
  };
  hooks.restore_best = [&] {
    filter.params = filter.best;
    net.params = net.best;
  };
  return run_stage("joint", cfg, split, hooks);
}

}  // namespace

void evaluate_bundle(const ModelBundle& bundle, const MultiContrastVolume& data, const TrainConfig& cfg,
                     TrainReport& report) {
  report.has_metrics = false;
  report.test_metrics.clear();
  if (!data.has_clean) return;
  const SliceSplit split = split_slices(static_cast<int>(data.slices.size()), cfg);
  if (split.test.empty()) return;
  MetricConfig mc = cfg.metrics;
  mc.data_range = data.clean_max(cfg.input_contrast);
  report.data_range = mc.data_range;
  for (int i : split.test) {
    const auto& s = data.slices[static_cast<std::size_t>(i)];
    const Grid clean = s.clean(cfg.input_contrast).to_grid();
    const Grid noisy = s.noisy(cfg.input_contrast, 0).to_grid();
    const Grid denoised = bundle.denoise(noisy);
    report.test_metrics.push_back({i, psnr(noisy, clean, mc), ssim(noisy, clean, mc), psnr(denoised, clean, mc),
                                   ssim(denoised, clean, mc), grid_mean(noisy), grid_mean(denoised)});
  }
  auto summarize = [&](double SliceMetrics::*field) {
    MetricSummary m;
    const double n = static_cast<double>(report.test_metrics.size());
    for (const auto& t : report.test_metrics) m.mean += t.*field;
    m.mean /= n;
    for (const auto& t : report.test_metrics) m.std += (t.*field - m.mean) * (t.*field - m.mean);
    m.std = std::sqrt(m.std / n);
    return m;
  };
  report.psnr_noisy = summarize(&SliceMetrics::psnr_noisy);
  report.ssim_noisy = summarize(&SliceMetrics::ssim_noisy);
  report.psnr_denoised = summarize(&SliceMetrics::psnr_denoised);
  report.ssim_denoised = summarize(&SliceMetrics::ssim_denoised);
  report.has_metrics = true;
}

TrainResult train_n2c_known(const MultiContrastVolume& data, const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  check_volume(data, cfg);
  const SliceSplit split = split_slices(static_cast<int>(data.slices.size()), cfg);
  FilterSlot filter(cfg.stack_depth, cfg.filter_lr);
  NetSlot net(net_init(cfg.net, derive_seed(cfg.seed, {stream::kNetInit, 0})), cfg.lr);
  StageReport stage = train_joint(data, cfg, split, filter, net);

  ModelBundle bundle;
  bundle.scheme = Scheme::kN2cBfs;
  bundle.seed = cfg.seed;
  bundle.input_contrast = cfg.input_contrast;
  bundle.target_contrast = cfg.target_contrast;
  bundle.filter = filter.params;
  bundle.translator = *net.params;
  TrainConfig resolved = cfg;
  resolved.scheme = Scheme::kN2cBfs;
  TrainReport report = finish_report(resolved, {std::move(stage)}, start);
  evaluate_bundle(bundle, data, resolved, report);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(bundle), std::move(report)};
}

TrainResult train_n2c_network(const MultiContrastVolume& data, const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  check_volume(data, cfg);
  const SliceSplit split = split_slices(static_cast<int>(data.slices.size()), cfg);

  FilterSlot filter(cfg.stack_depth, cfg.filter_lr);
  NetSlot translator_slot(net_init(cfg.net, derive_seed(cfg.seed, {stream::kNetInit, 0})), cfg.lr);
  StageReport stage1 = train_joint(data, cfg, split, filter, translator_slot);
  stage1.name = "translator";

  FrozenNet translator = freeze(*translator_slot.params);
  NetSlot denoiser(net_init(cfg.net, derive_seed(cfg.seed, {stream::kNetInit, 1})), cfg.lr);
  StageHooks hooks;
  hooks.objective = [&](int slice, std::uint64_t, bool update) {
    const Grid x = noisy_grid(data, slice, cfg.input_contrast);
    const Grid target = noisy_grid(data, slice, cfg.target_contrast);
    auto [denoised, dtrace] = net_forward(x, denoiser.params);
    const Grid pred = translator.forward(denoised);
    auto [loss, g] = mse_loss(pred, target);
    if (update) {
      const Grid g_denoised = translator.grad_input(g);
      denoiser.step(net_backward(dtrace, g_denoised).first);
    }
    return loss;
  };
  hooks.save_best = [&] { denoiser.best = denoiser.params; };
  hooks.restore_best = [&] { denoiser.params = denoiser.best; };
  StageReport stage2 = run_stage("denoiser", cfg, split, hooks);

  ModelBundle bundle;
  bundle.scheme = Scheme::kN2cNet;
  bundle.seed = cfg.seed;
  bundle.input_contrast = cfg.input_contrast;
  bundle.target_contrast = cfg.target_contrast;
  bundle.denoiser_net = *denoiser.params;
  bundle.translator = translator.net();
  TrainConfig resolved = cfg;
  resolved.scheme = Scheme::kN2cNet;
  TrainReport report = finish_report(resolved, {std::move(stage1), std::move(stage2)}, start);
  evaluate_bundle(bundle, data, resolved, report);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(bundle), std::move(report)};
}

namespace {

// Shared driver for the schemes that train only a filter stack.
TrainResult train_filter_only(const MultiContrastVolume& data, const TrainConfig& cfg, Scheme scheme,
                              const std::string& stage_name,
                              const std::function<double(FilterSlot&, int, std::uint64_t, bool)>& objective) {
  const auto start = std::chrono::steady_clock::now();
  const SliceSplit split = split_slices(static_cast<int>(data.slices.size()), cfg);
  FilterSlot filter(cfg.stack_depth, cfg.filter_lr);
  StageHooks hooks;
  hooks.objective = [&](int slice, std::uint64_t seed, bool update) { return objective(filter, slice, seed, update); };
  hooks.save_best = [&] { filter.best = filter.params; };
  hooks.restore_best = [&] { filter.params = filter.best; };
  StageReport stage = run_stage(stage_name, cfg, split, hooks);

  ModelBundle bundle;
  bundle.scheme = scheme;
  bundle.seed = cfg.seed;
  bundle.input_contrast = cfg.input_contrast;
  bundle.target_contrast = cfg.target_contrast;
  bundle.filter = filter.params;
  TrainConfig resolved = cfg;
  resolved.scheme = scheme;
  TrainReport report = finish_report(resolved, {std::move(stage)}, start);
  evaluate_bundle(bundle, data, resolved, report);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(bundle), std::move(report)};
}

}  // namespace

TrainResult train_n2v(const MultiContrastVolume& data, const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.scheme = Scheme::kN2vBfs;
  check_volume(data, c);
  return train_filter_only(data, c, Scheme::kN2vBfs, "blind_spot",
                           [&](FilterSlot& filter, int slice, std::uint64_t seed, bool update) {
    const Grid x = noisy_grid(data, slice, c.input_contrast);
    const BlindSpotSample sample = blind_spot_mask(x, c.n2v_mask_fraction, c.n2v_replace_radius, seed);
    auto [pred, trace] = stack_forward(sample.input, filter.params);
    Grid g(x.width, x.height);
    const double m = static_cast<double>(sample.masked.size());
    double loss = 0.0;
    for (std::size_t p : sample.masked) {
      const double d = pred.v[p] - x.v[p];
      loss += d * d;
      g.v[p] = 2.0 * d / m;
    }
    if (update) filter.step(stack_backward(trace, g).first);
    return loss / m;
  });
}

TrainResult train_n2neighbor(const MultiContrastVolume& data, const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.scheme = Scheme::kN2NeighborBfs;
  check_volume(data, c);
  const int n = static_cast<int>(data.slices.size());
  if (c.neighbor_offset >= n)
    throw DataError("neighbor_offset " + std::to_string(c.neighbor_offset) + " needs at least " +
                    std::to_string(c.neighbor_offset + 1) + " slices, volume has " + std::to_string(n));
  if (c.neighbor_offset == 0)
    for (const auto& s : data.slices)
      if (s.noisy(c.input_contrast).size() < 2)
        throw DataError("neighbor_offset 0 needs two noisy realizations per slice");
  return train_filter_only(data, c, Scheme::kN2NeighborBfs, "neighbor",
                           [&](FilterSlot& filter, int slice, std::uint64_t, bool update) {
    const Grid x = noisy_grid(data, slice, c.input_contrast);
    const Grid target = c.neighbor_offset == 0 ? noisy_grid(data, slice, c.input_contrast, 1)
                                               : noisy_grid(data, neighbor_slice(slice, c.neighbor_offset, n),
                                                            c.input_contrast);
    auto [pred, trace] = stack_forward(x, filter.params);
    auto [loss, g] = mse_loss(pred, target);
    if (update) filter.step(stack_backward(trace, g).first);
    return loss;
  });
}

TrainResult train_ablations(const MultiContrastVolume& data, const TrainConfig& cfg) {
  check_volume(data, cfg);
  if (cfg.scheme == Scheme::kBfOnlyCrossContrast) {
    return train_filter_only(data, cfg, Scheme::kBfOnlyCrossContrast, "filter_cross_contrast",
                             [&](FilterSlot& filter, int slice, std::uint64_t, bool update) {
      const Grid x = noisy_grid(data, slice, cfg.input_contrast);
      const Grid target = noisy_grid(data, slice, cfg.target_contrast);
      auto [pred, trace] = stack_forward(x, filter.params);
      auto [loss, g] = mse_loss(pred, target);
      if (update) filter.step(stack_backward(trace, g).first);
      return loss;
    });
  }
  if (cfg.scheme != Scheme::kN2nDirect)
    throw ConfigError("train_ablations expects scheme n2n_direct or bf_only_crosscontrast");

  const auto start = std::chrono::steady_clock::now();
  const SliceSplit split = split_slices(static_cast<int>(data.slices.size()), cfg);
  NetSlot net(net_init(cfg.net, derive_seed(cfg.seed, {stream::kNetInit, 0})), cfg.lr);
  StageHooks hooks;
  hooks.objective = [&](int slice, std::uint64_t, bool update) {
    const Grid x = noisy_grid(data, slice, cfg.input_contrast);
    const Grid target = noisy_grid(data, slice, cfg.target_contrast);
    auto [pred, trace] = net_forward(x, net.params);
    auto [loss, g] = mse_loss(pred, target);
    if (update) net.step(net_backward(trace, g).first);
    return loss;
  };
  hooks.save_best = [&] { net.best = net.params; };
  hooks.restore_best = [&] { net.params = net.best; };
  StageReport stage = run_stage("direct", cfg, split, hooks);

  ModelBundle bundle;
  bundle.scheme = Scheme::kN2nDirect;
  bundle.seed = cfg.seed;
  bundle.input_contrast = cfg.input_contrast;
  bundle.target_contrast = cfg.target_contrast;
  bundle.denoiser_net = *net.params;
  TrainReport report = finish_report(cfg, {std::move(stage)}, start);
  evaluate_bundle(bundle, data, cfg, report);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(bundle), std::move(report)};
}

TrainResult train(const MultiContrastVolume& data, const TrainConfig& cfg) {
  switch (cfg.scheme) {
    case Scheme::kN2cBfs:
      return train_n2c_known(data, cfg);
    case Scheme::kN2cNet:
      return train_n2c_network(data, cfg);
    case Scheme::kN2vBfs:
      return train_n2v(data, cfg);
    case Scheme::kN2NeighborBfs:
      return train_n2neighbor(data, cfg);
    case Scheme::kN2nDirect:
    case Scheme::kBfOnlyCrossContrast:
      return train_ablations(data, cfg);
  }
  throw ConfigError("unhandled scheme");
}

// ---------------------------------------------------------------------------
// Report

std::string TrainReport::to_json(bool include_timing) const {
  using nlohmann::ordered_json;
  ordered_json j;
  j["scheme"] = std::string(to_string(config.scheme));
  ordered_json cfg = ordered_json::object();
  const KeyValueConfig kv = to_key_values(config);
  for (const auto& [k, v] : kv.entries()) cfg[k] = v;
  j["config"] = cfg;
  j["adam"] = {{"beta1", 0.9}, {"beta2", 0.999}, {"epsilon", 1e-8}};
  ordered_json stage_list = ordered_json::array();
  for (const auto& s : stages) {
    ordered_json js;
    js["name"] = s.name;
    js["initial_train_loss"] = s.initial_train_loss;
    js["initial_val_loss"] = s.initial_val_loss;
    ordered_json ep = ordered_json::array();
    for (const auto& e : s.epochs) ep.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
    js["epochs"] = ep;
    js["best_epoch"] = s.best_epoch;
    js["best_val_loss"] = s.best_val_loss;
    js["final_train_loss"] = s.final_train_loss;
    js["stop_epoch"] = s.stop_epoch;
    js["stop_reason"] = s.stop_reason;
    stage_list.push_back(js);
  }
  j["stages"] = stage_list;
  if (has_metrics) {
    ordered_json m;
    m["data_range"] = data_range;
    m["ssim"] = {{"window", config.metrics.ssim_window},
                 {"k1", config.metrics.ssim_k1},
                 {"k2", config.metrics.ssim_k2},
                 {"gaussian_sigma", config.metrics.ssim_gaussian_sigma}};
    auto summary = [](const MetricSummary& s) { return ordered_json{{"mean", s.mean}, {"std", s.std}}; };
    m["psnr_noisy"] = summary(psnr_noisy);
    m["ssim_noisy"] = summary(ssim_noisy);
    m["psnr_denoised"] = summary(psnr_denoised);
    m["ssim_denoised"] = summary(ssim_denoised);
    ordered_json per = ordered_json::array();
    for (const auto& t : test_metrics)
      per.push_back({{"slice", t.slice},
                     {"psnr_noisy", t.psnr_noisy},
                     {"ssim_noisy", t.ssim_noisy},
                     {"psnr_denoised", t.psnr_denoised},
                     {"ssim_denoised", t.ssim_denoised},
                     {"mean_noisy", t.mean_noisy},
                     {"mean_denoised", t.mean_denoised}});
    m["test_slices"] = per;
    j["metrics"] = m;
  } else {
    j["metrics"] = nullptr;
  }
  if (include_timing) j["wall_seconds"] = wall_seconds;
  return j.dump(2);
}

}  // namespace n2c

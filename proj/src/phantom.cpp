#include "n2c/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "n2c/errors.hpp"
#include "n2c/noise.hpp"
#include "n2c/parallel.hpp"
#include "n2c/rng.hpp"

namespace n2c {
namespace {

constexpr double kMinMapDifference = 0.1;
constexpr double kGammaB = 0.7;

struct Ellipse {
  int label;
  double cx, cy;  // centre at the middle slice
  double rx, ry;
  double angle;
  double vx, vy;  // centre drift per slice
  double vr;      // radius drift per slice
};

std::vector<Ellipse> draw_ellipses(const PhantomConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {stream::kGeometry}));
  const double s = cfg.size;
  const double drift = cfg.max_drift_px;
  // Boundary displacement per slice is bounded by |v| + |vr| <= 0.96 * drift.
  auto draw_motion = [&](Ellipse& e) {
    e.vx = rng.uniform(-0.5, 0.5) * drift;
    e.vy = rng.uniform(-0.5, 0.5) * drift;
    e.vr = rng.uniform(-0.25, 0.25) * drift;
  };

  std::vector<Ellipse> shapes;
  Ellipse body{1, s / 2 + rng.uniform(-0.03, 0.03) * s, s / 2 + rng.uniform(-0.03, 0.03) * s,
               rng.uniform(0.38, 0.44) * s, rng.uniform(0.32, 0.40) * s, rng.uniform(0.0, std::numbers::pi), 0, 0, 0};
  draw_motion(body);
  body.vx *= 0.25;
  body.vy *= 0.25;
  shapes.push_back(body);

  // Every inner label is painted by two ellipses for more edge content.
  for (int pass = 0; pass < 2; ++pass)
    for (int label = 2; label < cfg.n_regions; ++label) {
      Ellipse e{};
      e.label = label;
      const double r = rng.uniform(0.0, 0.55);
      const double t = rng.uniform(0.0, 2.0 * std::numbers::pi);
      e.cx = body.cx + r * body.rx * std::cos(t);
      e.cy = body.cy + r * body.ry * std::sin(t);
      e.rx = rng.uniform(0.07, 0.18) * s;
      e.ry = rng.uniform(0.07, 0.18) * s;
      e.angle = rng.uniform(0.0, std::numbers::pi);
      draw_motion(e);
      shapes.push_back(e);
    }
  return shapes;
}

bool inside(const Ellipse& e, double offset, double x, double y) {
  const double cx = e.cx + e.vx * offset;
  const double cy = e.cy + e.vy * offset;
  const double rx = std::max(1.0, e.rx + e.vr * offset);
  const double ry = std::max(1.0, e.ry + e.vr * offset);
  const double c = std::cos(e.angle), sn = std::sin(e.angle);
  const double dx = x - cx, dy = y - cy;
  const double u = c * dx + sn * dy;
  const double v = -sn * dx + c * dy;
  return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
}

std::vector<int> labels_for(const PhantomConfig& cfg, const std::vector<Ellipse>& shapes, int slice) {
  const double offset = slice - 0.5 * (cfg.n_slices - 1);
  std::vector<int> labels(static_cast<std::size_t>(cfg.size) * cfg.size, 0);
  for (int y = 0; y < cfg.size; ++y)
    for (int x = 0; x < cfg.size; ++x) {
      int l = 0;
      for (const auto& e : shapes)
        if (inside(e, offset, x + 0.5, y + 0.5)) l = e.label;
      labels[static_cast<std::size_t>(y) * cfg.size + x] = l;
    }
  return labels;
}

double max_difference(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

ContrastMaps draw_maps(const PhantomConfig& cfg, std::uint64_t seed) {
  ContrastMaps maps;
  Rng rng(derive_seed(seed, {stream::kIntensities}));
  const int n = cfg.n_regions;
  const int inner = n - 1;

  // Contrast A: background 0, foreground levels separated by at least 0.08.
  std::vector<double> levels(inner);
  const double min_gap = std::min(0.08, 0.8 / inner);
  for (int attempt = 0;; ++attempt) {
    for (double& l : levels) l = rng.uniform(0.15, 1.0);
    std::vector<double> sorted = levels;
    std::sort(sorted.begin(), sorted.end());
    bool ok = true;
    for (int i = 1; i < inner; ++i) ok = ok && (sorted[i] - sorted[i - 1] >= min_gap);
    if (ok) break;
    if (attempt > 1000) {
      for (int i = 0; i < inner; ++i) levels[i] = 0.15 + 0.85 * (i + 1) / inner;
      break;
    }
  }
  const double top = *std::max_element(levels.begin(), levels.end());
  maps.a.assign(n, 0.0);
  for (int i = 0; i < inner; ++i) maps.a[i + 1] = levels[i] / top;

  // Contrast B: a shuffled reassignment of the A levels with a gamma curve.
  std::vector<int> perm(inner);
  std::iota(perm.begin(), perm.end(), 0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (int i = inner - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    maps.b.assign(n, 0.0);
    for (int i = 0; i < inner; ++i) maps.b[i + 1] = std::pow(maps.a[perm[i] + 1], kGammaB);
    if (max_difference(maps.a, maps.b) > kMinMapDifference) break;
  }
  return maps;
}

}  // namespace

std::string_view to_string(NoiseKind k) { return k == NoiseKind::kIid ? "iid_gaussian" : "correlated_gaussian"; }

NoiseKind noise_kind_from_string(std::string_view s) {
  if (s == "iid_gaussian" || s == "iid") return NoiseKind::kIid;
  if (s == "correlated_gaussian" || s == "correlated") return NoiseKind::kCorrelated;
  throw ConfigError("noise_kind must be iid_gaussian or correlated_gaussian, got '" + std::string(s) + "'");
}

void PhantomConfig::validate() const {
  if (size < 16) throw ConfigError("size must be >= 16, got " + std::to_string(size));
  if (n_slices < 1) throw ConfigError("n_slices must be >= 1, got " + std::to_string(n_slices));
  if (n_regions < 2) throw ConfigError("n_regions must be >= 2, got " + std::to_string(n_regions));
  if (!(noise_rel_std > 0.0) || !std::isfinite(noise_rel_std))
    throw ConfigError("noise_rel_std must be > 0, got " + std::to_string(noise_rel_std));
  if (noise_kind == NoiseKind::kCorrelated && !(corr_sigma > 0.0))
    throw ConfigError("corr_sigma must be > 0 for correlated noise, got " + std::to_string(corr_sigma));
  if (!(max_drift_px >= 0.0 && max_drift_px <= 2.0))
    throw ConfigError("max_drift_px must lie in [0, 2], got " + std::to_string(max_drift_px));
  if (n_realizations < 1) throw ConfigError("n_realizations must be >= 1, got " + std::to_string(n_realizations));
  if (contrast_map_a.empty() != contrast_map_b.empty())
    throw ConfigError("contrast_map_a and contrast_map_b must both be given or both be omitted");
  if (!contrast_map_a.empty()) {
    if (static_cast<int>(contrast_map_a.size()) != n_regions || static_cast<int>(contrast_map_b.size()) != n_regions)
      throw ConfigError("contrast maps must have n_regions = " + std::to_string(n_regions) + " entries");
    for (const auto* m : {&contrast_map_a, &contrast_map_b})
      for (double v : *m)
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("contrast map intensities must lie in [0, 1]");
    if (!(max_difference(contrast_map_a, contrast_map_b) > kMinMapDifference))
      throw ConfigError("contrast_map_a and contrast_map_b must differ by > 0.1 in at least one region");
  }
}

const Image& PhantomSlice::noisy(Contrast c, int realization) const {
  const auto& list = noisy(c);
  if (realization < 0 || realization >= static_cast<int>(list.size()))
    throw DataError("slice has no noisy realization " + std::to_string(realization) + " of contrast " +
                    std::string(to_string(c)));
  return list[static_cast<std::size_t>(realization)];
}

namespace {
const Image* first_image(const MultiContrastVolume& v) {
  if (v.slices.empty()) return nullptr;
  const auto& s = v.slices.front();
  if (!s.noisy_a.empty()) return &s.noisy_a.front();
  if (!s.noisy_b.empty()) return &s.noisy_b.front();
  return v.has_clean ? &s.clean_a : nullptr;
}
}  // namespace

int MultiContrastVolume::width() const {
  const Image* img = first_image(*this);
  return img ? img->width : 0;
}
int MultiContrastVolume::height() const {
  const Image* img = first_image(*this);
  return img ? img->height : 0;
}

double MultiContrastVolume::clean_max(Contrast c) const {
  if (!has_clean) throw DataError("volume carries no clean images");
  double m = 0.0;
  for (const auto& s : slices) {
    if (s.clean(c).size() == 0) throw DataError("volume has no clean " + std::string(to_string(c)) + " images");
    m = std::max(m, static_cast<double>(s.clean(c).max_value()));
  }
  return m;
}

void MultiContrastVolume::validate() const {
  if (slices.empty()) throw DataError("volume has no slices");
  const int w = width(), h = height();
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const auto& s = slices[i];
    auto check = [&](const Image& img, const char* what) {
      img.validate();
      if (img.width != w || img.height != h)
        throw DataError("slice " + std::to_string(i) + " " + what + " has shape " + std::to_string(img.width) + "x" +
                        std::to_string(img.height) + ", expected " + std::to_string(w) + "x" + std::to_string(h));
    };
    // Imported volumes may carry a single contrast; clean images are then
    // required only for the contrasts that have noisy acquisitions.
    if (has_clean) {
      if (!s.noisy_a.empty() || s.noisy_b.empty()) check(s.clean_a, "clean_A");
      if (!s.noisy_b.empty()) check(s.clean_b, "clean_B");
    }
    for (Contrast c : {Contrast::A, Contrast::B}) {
      std::vector<int> ids;
      for (const auto& n : s.noisy(c)) {
        check(n, "noisy");
        ids.push_back(n.realization_id);
      }
      std::sort(ids.begin(), ids.end());
      if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw DataError("slice " + std::to_string(i) + " has duplicate realization ids");
    }
  }
}

std::vector<PhantomShape> phantom_shapes(const PhantomConfig& config, std::uint64_t seed, int slice) {
  config.validate();
  const double offset = slice - 0.5 * (config.n_slices - 1);
  std::vector<PhantomShape> out;
  for (const auto& e : draw_ellipses(config, seed))
    out.push_back({e.label, e.cx + e.vx * offset, e.cy + e.vy * offset, std::max(1.0, e.rx + e.vr * offset),
                   std::max(1.0, e.ry + e.vr * offset), e.angle});
  return out;
}

std::vector<int> phantom_labels(const PhantomConfig& config, std::uint64_t seed, int slice) {
  config.validate();
  return labels_for(config, draw_ellipses(config, seed), slice);
}

ContrastMaps phantom_contrast_maps(const PhantomConfig& config, std::uint64_t seed) {
  config.validate();
  if (!config.contrast_map_a.empty()) return {config.contrast_map_a, config.contrast_map_b};
  return draw_maps(config, seed);
}

MultiContrastVolume generate_phantom(const PhantomConfig& config, std::uint64_t seed) {
  config.validate();
  const auto shapes = draw_ellipses(config, seed);
  const ContrastMaps maps = phantom_contrast_maps(config, seed);

  MultiContrastVolume vol;
  vol.seed = seed;
  vol.slices.resize(static_cast<std::size_t>(config.n_slices));
  parallel_for(vol.slices.size(), [&](std::size_t i) {
    const auto labels = labels_for(config, shapes, static_cast<int>(i));
    auto& s = vol.slices[i];
    s.clean_a = Image(config.size, config.size, Contrast::A);
    s.clean_b = Image(config.size, config.size, Contrast::B);
    for (std::size_t p = 0; p < labels.size(); ++p) {
      s.clean_a.data[p] = static_cast<float>(maps.a[labels[p]]);
      s.clean_b.data[p] = static_cast<float>(maps.b[labels[p]]);
    }
  });

  const double std_a = config.noise_rel_std * vol.clean_max(Contrast::A);
  const double std_b = config.noise_rel_std * vol.clean_max(Contrast::B);
  parallel_for(vol.slices.size(), [&](std::size_t i) {
    auto& s = vol.slices[i];
    for (Contrast c : {Contrast::A, Contrast::B}) {
      auto& list = c == Contrast::A ? s.noisy_a : s.noisy_b;
      const double sd = c == Contrast::A ? std_a : std_b;
      for (int r = 0; r < config.n_realizations; ++r) {
        const auto ns = derive_seed(seed, {stream::kNoise, i, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(r)});
        Image noisy = config.noise_kind == NoiseKind::kIid ? add_gaussian_noise_abs(s.clean(c), sd, ns)
                                                           : add_correlated_noise_abs(s.clean(c), sd, config.corr_sigma, ns);
        noisy.realization_id = r;
        list.push_back(std::move(noisy));
      }
    }
  });
  return vol;
}

}  // namespace n2c

#include "n2c/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <regex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "n2c/config.hpp"
#include "n2c/errors.hpp"
#include "n2c/gradcheck_suite.hpp"
#include "n2c/image_io.hpp"
#include "n2c/metrics.hpp"
#include "n2c/model_io.hpp"
#include "n2c/training.hpp"

namespace n2c {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string clean_file_name(int slice, Contrast c) {
  std::ostringstream s;
  s << "slice" << std::setw(2) << std::setfill('0') << slice << '_' << to_string(c) << ".n2c";
  return s.str();
}

std::string noisy_file_name(int slice, Contrast c, int realization) {
  std::ostringstream s;
  s << "slice" << std::setw(2) << std::setfill('0') << slice << '_' << to_string(c) << "_r" << realization << ".n2c";
  return s.str();
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory '" + dir.string() + "'");
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

ordered_json kv_json(const KeyValueConfig& kv) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : kv.entries()) j[k] = v;
  return j;
}

// Run manifest: written before the work starts and completed afterwards.
struct RunManifest {
  ordered_json j;
  fs::path path;

  RunManifest(const std::string& command, const KeyValueConfig& config, std::uint64_t seed, ordered_json inputs,
              ordered_json outputs, fs::path where)
      : path(std::move(where)) {
    j["tool"] = "n2c";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["config"] = kv_json(config);
    j["inputs"] = std::move(inputs);
    j["outputs"] = std::move(outputs);
    j["started"] = utc_now();
    j["finished"] = nullptr;
    write_text(path, j.dump(2) + "\n");
  }
  void finish(const ordered_json& extra = ordered_json::object()) {
    for (const auto& [k, v] : extra.items()) j[k] = v;
    j["finished"] = utc_now();
    write_text(path, j.dump(2) + "\n");
  }
};

// Config and inputs recorded by an earlier run.
struct LoadedManifest {
  KeyValueConfig config;
  ordered_json inputs;
};

LoadedManifest load_manifest(const fs::path& path, const std::string& command) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest '" + path.string() + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object() || j.value("command", "") != command || !j.contains("config") || !j["config"].is_object())
    throw ConfigError("'" + path.string() + "' is not a " + command + " manifest");
  LoadedManifest m;
  for (const auto& [k, v] : j["config"].items()) {
    if (!v.is_string()) throw ConfigError("manifest config value for '" + k + "' must be a string");
    m.config.set(k, v.get<std::string>());
  }
  m.inputs = j.value("inputs", ordered_json::object());
  return m;
}

// ---------------------------------------------------------------------------

struct ParsedName {
  int slice = 0;
  Contrast contrast = Contrast::A;
  int realization = -1;  // -1 for clean files
};

std::optional<ParsedName> parse_file_name(const std::string& name) {
  static const std::regex re(R"(slice(\d+)_([AB])(?:_r(\d+))?\.n2c)");
  std::smatch m;
  if (!std::regex_match(name, m, re)) return std::nullopt;
  ParsedName p;
  p.slice = std::stoi(m[1].str());
  p.contrast = contrast_from_string(m[2].str());
  p.realization = m[3].matched ? std::stoi(m[3].str()) : -1;
  return p;
}

std::vector<fs::path> sorted_files(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".n2c") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

Image read_checked(const fs::path& path, const ParsedName& p) {
  Image img = read_image(path);
  if (img.contrast != p.contrast)
    throw DataError("'" + path.string() + "' carries contrast " + std::string(to_string(img.contrast)) +
                    " but its name says " + std::string(to_string(p.contrast)));
  if (p.realization >= 0 && img.realization_id != p.realization)
    throw DataError("'" + path.string() + "' carries realization " + std::to_string(img.realization_id) +
                    " but its name says " + std::to_string(p.realization));
  return img;
}

}  // namespace

std::size_t write_volume(const MultiContrastVolume& vol, const fs::path& dir) {
  ensure_dir(dir / "noisy");
  if (vol.has_clean) ensure_dir(dir / "clean");
  std::size_t n = 0;
  for (std::size_t i = 0; i < vol.slices.size(); ++i) {
    const auto& s = vol.slices[i];
    for (Contrast c : {Contrast::A, Contrast::B}) {
      if (vol.has_clean && s.clean(c).size() > 0) {
        write_image(s.clean(c), dir / "clean" / clean_file_name(static_cast<int>(i), c));
        ++n;
      }
      for (const auto& img : s.noisy(c)) {
        write_image(img, dir / "noisy" / noisy_file_name(static_cast<int>(i), c, img.realization_id));
        ++n;
      }
    }
  }
  return n;
}

MultiContrastVolume load_volume(const fs::path& dir) {
  if (!fs::is_directory(dir / "noisy")) throw DataError("'" + dir.string() + "' has no noisy/ directory");
  std::map<int, PhantomSlice> slices;
  for (const auto& path : sorted_files(dir / "noisy")) {
    const auto p = parse_file_name(path.filename().string());
    if (!p || p->realization < 0) throw DataError("unexpected file in noisy/: '" + path.filename().string() + "'");
    auto& list = p->contrast == Contrast::A ? slices[p->slice].noisy_a : slices[p->slice].noisy_b;
    list.push_back(read_checked(path, *p));
  }
  if (slices.empty()) throw DataError("'" + (dir / "noisy").string() + "' holds no images");
  if (slices.begin()->first != 0 || slices.rbegin()->first != static_cast<int>(slices.size()) - 1)
    throw DataError("slice indices in '" + dir.string() + "' are not contiguous from 0");

  bool has_clean = fs::is_directory(dir / "clean");
  if (has_clean) {
    for (const auto& path : sorted_files(dir / "clean")) {
      const auto p = parse_file_name(path.filename().string());
      if (!p || p->realization >= 0) throw DataError("unexpected file in clean/: '" + path.filename().string() + "'");
      auto it = slices.find(p->slice);
      if (it == slices.end()) throw DataError("clean image '" + path.filename().string() + "' has no noisy partner");
      (p->contrast == Contrast::A ? it->second.clean_a : it->second.clean_b) = read_checked(path, *p);
    }
  }
  MultiContrastVolume vol;
  for (auto& [i, s] : slices) {
    for (auto* list : {&s.noisy_a, &s.noisy_b}) {
      std::sort(list->begin(), list->end(),
                [](const Image& a, const Image& b) { return a.realization_id < b.realization_id; });
      for (std::size_t r = 0; r < list->size(); ++r)
        if ((*list)[r].realization_id != static_cast<int>(r))
          throw DataError("slice " + std::to_string(i) + " realizations are not numbered 0..n-1");
    }
    if ((!s.noisy_a.empty() && s.clean_a.size() == 0) || (!s.noisy_b.empty() && s.clean_b.size() == 0))
      has_clean = false;
    vol.slices.push_back(std::move(s));
  }
  vol.has_clean = has_clean;
  vol.validate();
  return vol;
}

namespace {

// ---------------------------------------------------------------------------
// Commands

struct GenerateArgs {
  std::string config, manifest, out;
  std::map<std::string, std::string> overrides;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  KeyValueConfig kv;
  if (!a.manifest.empty()) {
    kv = load_manifest(a.manifest, "generate").config;
  } else if (!a.config.empty()) {
    kv = KeyValueConfig::load(a.config);
  } else {
    kv = to_key_values(GenerateSettings{});
  }
  for (const auto& [k, v] : a.overrides) kv.set(k, v);
  const GenerateSettings settings = generate_settings_from(kv);
  const KeyValueConfig resolved = to_key_values(settings);

  const fs::path dir = fs::absolute(a.out);
  ensure_dir(dir);
  RunManifest manifest("generate", resolved, settings.seed, ordered_json::object(),
                       {{"clean", (dir / "clean").string()}, {"noisy", (dir / "noisy").string()}},
                       dir / "manifest.json");
  const MultiContrastVolume vol = generate_phantom(settings.phantom, settings.seed);
  const std::size_t n = write_volume(vol, dir);
  manifest.finish({{"files", n}});
  out << "wrote " << n << " images to " << dir.string() << "\n";
  return 0;
}

struct TrainArgs {
  std::string scheme, data, config, manifest, out;
  std::map<std::string, std::string> overrides;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  KeyValueConfig kv;
  std::string data = a.data;
  if (!a.manifest.empty()) {
    LoadedManifest m = load_manifest(a.manifest, "train");
    kv = m.config;
    if (data.empty() && m.inputs.contains("data") && m.inputs["data"].is_string()) data = m.inputs["data"].get<std::string>();
  } else if (!a.config.empty()) {
    kv = KeyValueConfig::load(a.config);
  }
  if (!a.scheme.empty()) kv.set("scheme", a.scheme);
  for (const auto& [k, v] : a.overrides) kv.set(k, v);
  if (!kv.has("scheme")) throw ConfigError("missing config key 'scheme' (use --scheme)");
  if (data.empty()) throw ConfigError("no data directory given (use --data)");

  const TrainConfig cfg = train_config_from(kv, TrainConfig::desk_scale(scheme_from_string(kv.get("scheme"))));
  cfg.validate();
  const KeyValueConfig resolved = to_key_values(cfg);

  const fs::path dir = fs::absolute(a.out);
  ensure_dir(dir);
  RunManifest manifest("train", resolved, cfg.seed, {{"data", fs::absolute(data).string()}},
                       {{"model", (dir / "model.n2cm").string()}, {"report", (dir / "report.json").string()}},
                       dir / "manifest.json");
  const MultiContrastVolume vol = load_volume(data);
  auto [bundle, report] = train(vol, cfg);
  write_model(bundle, dir / "model.n2cm");
  write_text(dir / "report.json", report.to_json(false) + "\n");
  manifest.finish({{"wall_seconds", report.wall_seconds}});

  for (const auto& s : report.stages) {
    for (const auto& e : s.epochs)
      out << s.name << " epoch " << e.epoch << " train " << e.train_loss << " val " << e.val_loss << "\n";
    out << s.name << ": initial train loss " << s.initial_train_loss << ", final " << s.final_train_loss
        << ", best epoch " << s.best_epoch << ", " << s.stop_reason << "\n";
  }
  if (report.has_metrics)
    out << "test PSNR " << report.psnr_noisy.mean << " -> " << report.psnr_denoised.mean << " dB, SSIM "
        << report.ssim_noisy.mean << " -> " << report.ssim_denoised.mean << "\n";
  return 0;
}

int cmd_denoise(const std::string& model_path, const std::vector<std::string>& inputs, const std::string& out_dir,
                std::ostream& out) {
  const ModelBundle bundle = read_model(fs::path(model_path));
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (auto& f : sorted_files(in)) files.push_back(f);
    } else {
      files.emplace_back(in);
    }
  }
  if (files.empty()) throw ConfigError("no input images");
  const fs::path dir(out_dir);
  ensure_dir(dir);
  int multiple = 1;
  if (bundle.denoiser_net) multiple = 1 << bundle.denoiser_net->config.depth;
  for (const auto& f : files) {
    const Image img = read_image(f);
    if (img.contrast != bundle.input_contrast)
      throw DataError("'" + f.string() + "' has contrast " + std::string(to_string(img.contrast)) +
                      " but the model denoises contrast " + std::string(to_string(bundle.input_contrast)));
    if (img.width % multiple != 0 || img.height % multiple != 0)
      throw DataError("'" + f.string() + "' is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                      "; this model needs sides divisible by " + std::to_string(multiple));
    write_image(bundle.denoise(img), dir / f.filename());
  }
  out << "denoised " << files.size() << " images into " << dir.string() << "\n";
  return 0;
}

std::string csv_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

struct EvaluateArgs {
  std::string pred, clean, out, method = "pred";
  int realization = 0;
  std::optional<double> data_range;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  using Key = std::pair<Contrast, int>;
  std::map<Key, fs::path> preds, cleans;
  for (const auto& f : sorted_files(a.pred)) {
    const auto p = parse_file_name(f.filename().string());
    if (!p) throw DataError("unexpected file in prediction directory: '" + f.filename().string() + "'");
    if (p->realization >= 0 && p->realization != a.realization) continue;
    if (!preds.emplace(Key{p->contrast, p->slice}, f).second)
      throw DataError("two predictions for slice " + std::to_string(p->slice) + " contrast " +
                      std::string(to_string(p->contrast)));
  }
  for (const auto& f : sorted_files(a.clean)) {
    const auto p = parse_file_name(f.filename().string());
    if (!p || p->realization >= 0) throw DataError("unexpected file in clean directory: '" + f.filename().string() + "'");
    cleans.emplace(Key{p->contrast, p->slice}, f);
  }
  std::vector<std::string> orphans;
  for (const auto& [k, f] : preds)
    if (!cleans.count(k)) orphans.push_back(f.string());
  for (const auto& [k, f] : cleans)
    if (!preds.count(k)) orphans.push_back(f.string());
  if (!orphans.empty()) {
    std::string msg = "unmatched files:";
    for (const auto& o : orphans) msg += "\n  " + o;
    throw DataError(msg);
  }
  if (preds.empty()) throw DataError("no images to evaluate");

  std::map<Key, Image> clean_imgs;
  std::map<Contrast, double> range;
  for (const auto& [k, f] : cleans) {
    Image img = read_image(f);
    range[k.first] = std::max(range[k.first], static_cast<double>(img.max_value()));
    clean_imgs.emplace(k, std::move(img));
  }
  const bool both = range.size() > 1;

  std::ostringstream csv;
  csv << "slice_index,method,psnr_db,ssim\n";
  std::map<std::string, std::vector<std::pair<double, double>>> per_method;
  for (const auto& [k, f] : preds) {
    const Image pred = read_image(f);
    const Image& ref = clean_imgs.at(k);
    if (pred.width != ref.width || pred.height != ref.height)
      throw DataError("'" + f.string() + "' and its clean image differ in size");
    MetricConfig mc;
    mc.data_range = a.data_range.value_or(range[k.first]);
    mc.validate();
    const std::string method = both ? a.method + "[" + std::string(to_string(k.first)) + "]" : a.method;
    const double p = psnr(pred.to_grid(), ref.to_grid(), mc);
    const double s = ssim(pred.to_grid(), ref.to_grid(), mc);
    per_method[method].push_back({p, s});
    csv << k.second << ',' << method << ',' << csv_number(p) << ',' << csv_number(s) << "\n";
  }
  for (const auto& [method, rows] : per_method) {
    const double n = static_cast<double>(rows.size());
    double mp = 0, ms = 0;
    for (auto [p, s] : rows) mp += p, ms += s;
    mp /= n, ms /= n;
    double vp = 0, vs = 0;
    for (auto [p, s] : rows) {
      vp += std::isinf(p) ? 0.0 : (p - mp) * (p - mp);
      vs += (s - ms) * (s - ms);
    }
    const double sp = std::isinf(mp) ? 0.0 : std::sqrt(vp / n);
    csv << "mean," << method << ',' << csv_number(mp) << ',' << csv_number(ms) << "\n";
    csv << "std," << method << ',' << csv_number(sp) << ',' << csv_number(std::sqrt(vs / n)) << "\n";
  }
  if (a.out.empty() || a.out == "-") {
    out << csv.str();
  } else {
    write_text(a.out, csv.str());
    out << "wrote " << preds.size() << " rows to " << a.out << "\n";
  }
  return 0;
}

int cmd_gradcheck(const std::string& target, std::uint64_t seed, const std::string& fault, std::ostream& out) {
  SuiteOptions o;
  o.target = check_target_from_string(target);
  o.seed = seed;
  o.fault = fault;
  bool ok = true;
  for (const auto& r : run_gradcheck_suite(o)) {
    r.print(out);
    ok = ok && r.passed;
  }
  out << (ok ? "all gradient checks passed\n" : "gradient check FAILED\n");
  return ok ? 0 : static_cast<int>(ExitCode::kNumerical);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised multi-contrast denoising toolkit", "n2c"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic multi-contrast phantom");
  g->add_option("--config", gen.config, "key = value config file (all required keys)")->check(CLI::ExistingFile);
  g->add_option("--manifest", gen.manifest, "Reproduce the run recorded in this manifest")->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output directory")->required();
  for (const auto& key : generate_keys()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    g->add_option_function<std::string>(flag, [&gen, key](const std::string& v) { gen.overrides[key] = v; },
                                        "Override '" + key + "'");
  }

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one scheme on a data directory");
  std::string scheme_help = "Scheme:";
  for (auto s : scheme_names()) scheme_help += " " + std::string(s);
  t->add_option("--scheme", tr.scheme, scheme_help);
  t->add_option("--data", tr.data, "Data directory written by 'generate'");
  t->add_option("--config", tr.config, "key = value config file")->check(CLI::ExistingFile);
  t->add_option("--manifest", tr.manifest, "Reproduce the run recorded in this manifest")->check(CLI::ExistingFile);
  t->add_option("--out", tr.out, "Output directory")->required();
  for (const auto& key : train_keys()) {
    if (key == "scheme") continue;
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    t->add_option_function<std::string>(flag, [&tr, key](const std::string& v) { tr.overrides[key] = v; },
                                        "Override '" + key + "'");
  }

  std::string model_path, denoise_out;
  std::vector<std::string> denoise_inputs;
  auto* d = app.add_subcommand("denoise", "Apply a trained denoiser to images");
  d->add_option("--model", model_path, "Model file")->required();
  d->add_option("--out", denoise_out, "Output directory")->required();
  d->add_option("inputs", denoise_inputs, "Image files or directories")->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "PSNR/SSIM of predictions against clean images");
  e->add_option("--pred", ev.pred, "Directory of predicted images")->required()->check(CLI::ExistingDirectory);
  e->add_option("--clean", ev.clean, "Directory of clean images")->required()->check(CLI::ExistingDirectory);
  e->add_option("--out", ev.out, "CSV path ('-' for stdout)");
  e->add_option("--method", ev.method, "Method label for the CSV");
  e->add_option("--realization", ev.realization, "Realization used when predictions carry an _r suffix");
  e->add_option("--data-range", ev.data_range, "PSNR/SSIM data range (default: clean maximum per contrast)");

  std::string target = "all", fault;
  std::uint64_t check_seed = 0;
  auto* c = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  c->add_option("--target", target, "bilateral, domain_net or all");
  c->add_option("--seed", check_seed, "Seed of the random instances");
  c->add_option("--inject-fault", fault, "Scale analytic gradients of parameters matching this name by 1.5");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (*g) return cmd_generate(gen, out);
    if (*t) return cmd_train(tr, out);
    if (*d) return cmd_denoise(model_path, denoise_inputs, denoise_out, out);
    if (*e) return cmd_evaluate(ev, out);
    if (*c) return cmd_gradcheck(target, check_seed, fault, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return static_cast<int>(ex.exit_code());
  } catch (const fs::filesystem_error& ex) {
    err << "error: " << ex.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kConfig);
}

}  // namespace n2c

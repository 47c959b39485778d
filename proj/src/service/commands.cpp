#include "pyrexpose/commands.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "pyrexpose/checkpoint.hpp"
#include "pyrexpose/error.hpp"
#include "pyrexpose/image_io.hpp"
#include "pyrexpose/imaging.hpp"
#include "pyrexpose/infer.hpp"

namespace pyrexpose {

namespace fs = std::filesystem;
using nlohmann::json;

std::string ev_file_name(const std::string& stem, float ev) {
  const double rounded = std::round(static_cast<double>(ev) * 10.0) / 10.0;
  return fmt::format("{}_ev{:+.1f}.png", stem, rounded == 0.0 ? 0.0 : rounded);
}

void SynthOptions::validate() const {
  if (evs.empty()) throw ConfigError("synth: at least one EV is required");
  for (float ev : evs) {
    if (!std::isfinite(ev) || std::abs(ev) > 10.0f) throw ConfigError("synth: EVs must be finite and within +-10");
  }
  std::vector<std::string> names;
  for (float ev : evs) names.push_back(ev_file_name("x", ev));
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
    throw ConfigError("synth: EVs must be distinct at one decimal");
  }
  if (val_fraction < 0.0 || test_fraction < 0.0 || val_fraction + test_fraction > 1.0) {
    throw ConfigError("synth: split fractions must be non-negative and sum to at most 1");
  }
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

DatasetManifest synthesize_dataset(const fs::path& source_dir, const fs::path& output_dir, const fs::path& manifest_path,
                                   const SynthOptions& options) {
  options.validate();
  const std::vector<fs::path> sources = list_pngs(source_dir);
  if (sources.empty()) throw InvalidInput("synth: no PNG images in " + source_dir.string());
  fs::create_directories(output_dir);
  const fs::path manifest_dir = fs::absolute(manifest_path).parent_path();
  fs::create_directories(manifest_dir);

  // Splits are assigned per source from a seeded shuffle so that every
  // rendering of a scene lands in the same split.
  std::vector<Split> split(sources.size(), Split::kTrain);
  std::vector<std::size_t> order(sources.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::round(options.val_fraction * static_cast<double>(sources.size())));
  const auto n_test = static_cast<std::size_t>(std::round(options.test_fraction * static_cast<double>(sources.size())));
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k < n_val) split[order[k]] = Split::kVal;
    else if (k < n_val + n_test) split[order[k]] = Split::kTest;
  }

  DatasetManifest manifest;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const Image src = load_image(sources[i]);
    const std::string stem = sources[i].stem().string();
    for (float ev : options.evs) {
      const fs::path out = output_dir / ev_file_name(stem, ev);
      save_image(apply_relative_ev(src, ev), out);
      manifest.entries.push_back({fs::proximate(fs::absolute(out), manifest_dir),
                                  fs::proximate(fs::absolute(sources[i]), manifest_dir), ev, split[i]});
    }
    spdlog::debug("synth: {} -> {} renderings", sources[i].string(), options.evs.size());
  }
  save_manifest(manifest, manifest_path);
  return manifest;
}

std::vector<fs::path> dump_pyramid(const Image& img, int levels, const fs::path& dir) {
  const Pyramid p = laplacian_decompose(img, levels);
  fs::create_directories(dir);
  std::vector<fs::path> out;
  for (int l = 0; l < p.n(); ++l) {
    Image level = p.levels[static_cast<std::size_t>(l)];
    if (l + 1 < p.n()) {
      for (float& v : level.data()) v += 0.5f;
    }
    const fs::path path = dir / fmt::format("level_{}.png", l + 1);
    save_image(level.clamped(), path);
    out.push_back(path);
  }
  return out;
}

namespace {

struct Mean {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    sum += v;
    ++n;
  }
  json value() const { return n ? json(sum / static_cast<double>(n)) : json(nullptr); }
};

json psnr_json(double v) { return std::isinf(v) ? json("inf") : json(v); }

}  // namespace

json evaluate_manifest(const DatasetManifest& manifest, const fs::path& checkpoint, const EvalOptions& options) {
  const std::vector<ManifestEntry> entries = manifest.select(options.split);
  if (entries.empty()) throw InvalidInput("eval: manifest has no " + to_string(options.split) + " entries");
  if (options.max_dim < 1) throw ConfigError("eval: max_dim must be >= 1");
  const Checkpoint ck = load_checkpoint(checkpoint);
  const Model<float> model = model_from_checkpoint<float>(ck);
  const ScaleVector scales = options.scales.value_or(ck.config.scale_defaults);
  if (scales.size() != ck.config.levels) {
    throw ConfigError(fmt::format("eval: {} scales for a {}-level model", scales.size(), ck.config.levels));
  }
  scales.validate();

  json images = json::array();
  Mean psnr, ssim, niqe, pi, in_psnr, in_ssim;
  std::size_t infinite = 0;
  std::map<float, Mean> psnr_by_ev;
  for (const ManifestEntry& e : entries) {
    const Image input = load_image(e.input_path);
    const Image target = load_image(e.target_path);
    const Image out = correct(input, model, scales, options.max_dim);
    const MetricsReport r = evaluate(out, target, options.niqe, options.ma);
    const double base = pyrexpose::psnr(input, target);
    const double base_ssim = pyrexpose::ssim(input, target);

    json rec = r.to_json();
    rec["input_path"] = e.input_path.string();
    rec["target_path"] = e.target_path.string();
    rec["relative_ev"] = e.relative_ev;
    rec["input_psnr"] = psnr_json(base);
    rec["input_ssim"] = base_ssim;
    images.push_back(rec);

    if (std::isinf(r.psnr)) {
      ++infinite;
    } else {
      psnr.add(r.psnr);
      psnr_by_ev[e.relative_ev].add(r.psnr);
    }
    if (!std::isinf(base)) in_psnr.add(base);
    ssim.add(r.ssim);
    in_ssim.add(base_ssim);
    if (r.niqe) niqe.add(*r.niqe);
    if (r.pi) pi.add(*r.pi);
    spdlog::info("eval {}: psnr {} ssim {:.4f}", e.input_path.filename().string(), rec["psnr"].dump(), r.ssim);
  }

  json by_ev = json::object();
  for (const auto& [ev, m] : psnr_by_ev) by_ev[fmt::format("{:+.1f}", ev)] = m.value();
  return {{"split", to_string(options.split)},
          {"checkpoint", checkpoint.string()},
          {"scales", scales.s},
          {"images", images},
          {"aggregate",
           {{"count", entries.size()},
            {"psnr", psnr.value()},
            {"ssim", ssim.value()},
            {"niqe", niqe.value()},
            {"pi", pi.value()},
            {"infinite_psnr", infinite},
            {"input_psnr", in_psnr.value()},
            {"input_ssim", in_ssim.value()},
            {"psnr_by_ev", by_ev}}}};
}

}  // namespace pyrexpose

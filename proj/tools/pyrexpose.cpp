// pyrexpose command-line tool: dataset synthesis, pyramid dumps, training,
// single-image correction, evaluation and the HTTP service.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "pyrexpose/checkpoint.hpp"
#include "pyrexpose/commands.hpp"
#include "pyrexpose/error.hpp"
#include "pyrexpose/image_io.hpp"
#include "pyrexpose/imaging.hpp"
#include "pyrexpose/infer.hpp"
#include "pyrexpose/service.hpp"
#include "pyrexpose/trainer.hpp"

namespace fs = std::filesystem;
using namespace pyrexpose;

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("pyrexpose");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  const char* env = std::getenv("PYREXPOSE_LOG");
  spdlog::level::level_enum level = spdlog::level::info;
  if (env && *env) {
    level = spdlog::level::from_str(env);
    // from_str maps unknown names to "off"; only accept that when asked for.
    if (level == spdlog::level::off && std::string(env) != "off") level = spdlog::level::info;
  }
  spdlog::set_level(level);
}

std::optional<ScaleVector> scales_from(const std::vector<float>& v) {
  if (v.empty()) return std::nullopt;
  ScaleVector s{v};
  try {
    s.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("--scales: ") + e.what());
  }
  return s;
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError(path.string() + ": cannot write");
  out << j.dump(2) << '\n';
}

struct SynthArgs {
  fs::path source, output, manifest;
  std::vector<float> evs = kDefaultSynthEvs;
  double val_fraction = 0.0, test_fraction = 0.0;
  std::uint64_t seed = 0;
  int procedural = 0;
  int size = 128;
};

int run_synth(const SynthArgs& a) {
  SynthOptions opt{a.evs, a.val_fraction, a.test_fraction, a.seed};
  opt.validate();
  if (a.procedural < 0 || a.size < 8) throw ConfigError("synth: --procedural must be >= 0 and --size >= 8");
  if (a.procedural > 0) {
    fs::create_directories(a.source);
    for (int i = 0; i < a.procedural; ++i) {
      const auto seed = a.seed * 1000003u + static_cast<std::uint64_t>(i);
      save_image(synthetic_scene(a.size, a.size, seed), a.source / fmt::format("scene_{:04d}.png", i));
    }
    spdlog::info("wrote {} procedural scenes to {}", a.procedural, a.source.string());
  }
  const DatasetManifest m = synthesize_dataset(a.source, a.output, a.manifest, opt);
  spdlog::info("wrote {} manifest entries to {}", m.entries.size(), a.manifest.string());
  return 0;
}

struct PyramidArgs {
  fs::path input, dump;
  int levels = 4;
};

int run_pyramid(const PyramidArgs& a) {
  if (a.levels < 1) throw ConfigError("pyramid: --levels must be >= 1");
  const Image img = load_image(a.input);
  if (!pyramid_compatible(img.height(), img.width(), a.levels)) {
    throw InvalidInput(fmt::format("pyramid: {}x{} is not divisible by 2^{}", img.width(), img.height(), a.levels - 1));
  }
  for (const auto& p : dump_pyramid(img, a.levels, a.dump)) spdlog::info("wrote {}", p.string());
  return 0;
}

struct TrainArgs {
  fs::path config;
  bool resume = false;
  std::optional<std::uint64_t> seed;
  std::int64_t max_steps = 0;
};

int run_train(const TrainArgs& a) {
  TrainRun run = TrainRun::load(a.config);
  if (a.seed) run.seed = *a.seed;
  if (a.max_steps < 0) throw ConfigError("train: --max-steps must be >= 0");
  run.validate();
  TrainOptions opt;
  opt.resume = a.resume;
  opt.max_total_steps = a.max_steps;
  opt.on_log = [](const nlohmann::json& line) {
    if (line.contains("train_psnr")) {
      spdlog::info("stage {} epoch {} step {}: train PSNR {:.2f} dB", line["stage"].get<int>(), line["epoch"].get<int>(),
                   line["step"].get<std::int64_t>(), line["train_psnr"].get<double>());
    } else {
      spdlog::debug("{}", line.dump());
    }
  };
  const TrainResult r = train(run, opt);
  spdlog::info("finished after {} steps; checkpoint {}", r.steps, r.checkpoint_path.string());
  return 0;
}

struct CorrectArgs {
  fs::path input, output, checkpoint;
  std::vector<float> scales;
  int max_dim = kDefaultMaxDim;
};

int run_correct(const CorrectArgs& a) {
  if (a.max_dim < 1) throw ConfigError("correct: --max-dim must be >= 1");
  const auto requested = scales_from(a.scales);
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const ScaleVector s = requested.value_or(ck.config.scale_defaults);
  if (s.size() != ck.config.levels) {
    throw ConfigError(fmt::format("correct: {} scales given for a {}-level model", s.size(), ck.config.levels));
  }
  const Image img = load_image(a.input);
  CorrectTimings t;
  const Image out = correct(img, model_from_checkpoint<float>(ck), s, a.max_dim, &t);
  save_image(out, a.output);
  spdlog::info("{}x{} corrected in {:.1f} ms (network {:.1f} ms, bgu {:.1f} ms{})", img.width(), img.height(),
               t.total_ms, t.network_ms, t.bgu_ms, t.used_bgu ? "" : ", direct");
  return 0;
}

struct EvalArgs {
  fs::path manifest, checkpoint, report;
  std::string split = "test";
  std::vector<float> scales;
  int max_dim = kDefaultMaxDim;
  fs::path niqe_model, niqe_pristine, niqe_save;
  std::optional<double> ma;
};

int run_eval(const EvalArgs& a) {
  EvalOptions opt;
  opt.split = split_from_string(a.split);
  opt.scales = scales_from(a.scales);
  opt.max_dim = a.max_dim;
  opt.ma = a.ma;
  if (!a.niqe_model.empty() && !a.niqe_pristine.empty()) {
    throw ConfigError("eval: give either --niqe-model or --niqe-pristine, not both");
  }
  const DatasetManifest manifest = load_manifest(a.manifest);
  std::optional<NiqeModel> niqe;
  if (!a.niqe_model.empty()) {
    niqe = NiqeModel::load(a.niqe_model);
  } else if (!a.niqe_pristine.empty()) {
    std::vector<Image> pristine;
    for (const auto& p : list_pngs(a.niqe_pristine)) pristine.push_back(load_image(p));
    niqe = niqe_fit(pristine);
    if (!a.niqe_save.empty()) niqe->save(a.niqe_save);
    spdlog::info("fitted NIQE model on {} images", pristine.size());
  }
  if (niqe) opt.niqe = &*niqe;
  const nlohmann::json report = evaluate_manifest(manifest, a.checkpoint, opt);
  write_json(report, a.report);
  const auto& agg = report.at("aggregate");
  spdlog::info("{} images: PSNR {} (input {}), SSIM {}", agg.at("count").get<int>(), agg.at("psnr").dump(),
               agg.at("input_psnr").dump(), agg.at("ssim").dump());
  return 0;
}

struct ServeArgs {
  ServiceConfig config;
  std::vector<float> scales;
};

int run_serve(ServeArgs a) {
  a.config.default_scales = scales_from(a.scales);
  a.config.validate();
  serve(a.config);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Multi-scale exposure correction: training, inference, evaluation and serving."};
  app.name("pyrexpose");
  app.require_subcommand(1);
  app.set_version_flag("--version", "pyrexpose 0.1.0");
  int code = 0;

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Render over/under-exposed inputs and write a manifest");
  c_synth->add_option("--source", synth.source, "Directory of well-exposed PNG images")->required();
  c_synth->add_option("--output", synth.output, "Directory for rendered inputs")->required();
  c_synth->add_option("--manifest", synth.manifest, "Manifest JSON to write")->required();
  c_synth->add_option("--evs", synth.evs, "Relative EVs, comma separated")->delimiter(',');
  c_synth->add_option("--val-fraction", synth.val_fraction, "Share of sources assigned to VAL");
  c_synth->add_option("--test-fraction", synth.test_fraction, "Share of sources assigned to TEST");
  c_synth->add_option("--seed", synth.seed, "Seed for split assignment and procedural scenes (default 0)");
  c_synth->add_option("--procedural", synth.procedural, "First write this many procedural scenes into --source");
  c_synth->add_option("--size", synth.size, "Side length of procedural scenes");
  c_synth->callback([&] { code = run_synth(synth); });

  PyramidArgs pyr;
  auto* c_pyr = app.add_subcommand("pyramid", "Write the Laplacian pyramid levels of an image");
  c_pyr->add_option("--input", pyr.input, "Input PNG")->required();
  c_pyr->add_option("--levels", pyr.levels, "Number of levels");
  c_pyr->add_option("--dump", pyr.dump, "Output directory")->required();
  c_pyr->callback([&] { code = run_pyramid(pyr); });

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model from a run configuration");
  c_train->add_option("--config", tr.config, "Run configuration JSON")->required();
  c_train->add_flag("--resume", tr.resume, "Continue from the latest checkpoint in the output directory");
  c_train->add_option("--seed", tr.seed, "Overrides the configuration seed (default 0)");
  c_train->add_option("--max-steps", tr.max_steps, "Stop after this many optimizer steps in total");
  c_train->callback([&] { code = run_train(tr); });

  CorrectArgs cor;
  auto* c_cor = app.add_subcommand("correct", "Correct the exposure of one image");
  c_cor->add_option("--input", cor.input, "Input PNG")->required();
  c_cor->add_option("--output", cor.output, "Output PNG")->required();
  c_cor->add_option("--checkpoint", cor.checkpoint, "Model checkpoint")->required();
  c_cor->add_option("--scales", cor.scales, "Per-level scale vector, comma separated")->delimiter(',');
  c_cor->add_option("--max-dim", cor.max_dim, "Largest side processed by the network before guided upsampling");
  c_cor->callback([&] { code = run_correct(cor); });

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Score a checkpoint on a manifest split");
  c_eval->add_option("--manifest", ev.manifest, "Dataset manifest")->required();
  c_eval->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
  c_eval->add_option("--report", ev.report, "Report JSON to write")->required();
  c_eval->add_option("--split", ev.split, "train, val or test");
  c_eval->add_option("--scales", ev.scales, "Per-level scale vector, comma separated")->delimiter(',');
  c_eval->add_option("--max-dim", ev.max_dim, "Largest side processed by the network");
  c_eval->add_option("--niqe-model", ev.niqe_model, "Fitted NIQE model JSON");
  c_eval->add_option("--niqe-pristine", ev.niqe_pristine, "Fit a NIQE model on the PNGs in this directory");
  c_eval->add_option("--niqe-save", ev.niqe_save, "Where to save a model fitted with --niqe-pristine");
  c_eval->add_option("--ma", ev.ma, "Externally computed Ma score; enables the perceptual index");
  c_eval->callback([&] { code = run_eval(ev); });

  ServeArgs sv;
  auto* c_serve = app.add_subcommand("serve", "Serve the /v1 correction API over HTTP");
  c_serve->add_option("--checkpoint", sv.config.checkpoint, "Model checkpoint")->required();
  c_serve->add_option("--host", sv.config.host, "Bind address");
  c_serve->add_option("--port", sv.config.port, "Port; 0 picks a free one");
  c_serve->add_option("--max-upload-bytes", sv.config.max_upload_bytes, "Largest accepted request body");
  c_serve->add_option("--scales", sv.scales, "Default scale vector, comma separated")->delimiter(',');
  c_serve->add_option("--max-dim", sv.config.max_dim, "Largest side processed by the network");
  c_serve->add_option("--threads", sv.config.threads, "Worker threads");
  c_serve->callback([&] { code = run_serve(sv); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "pyrexpose: error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "pyrexpose: error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidInput& e) {
    std::cerr << "pyrexpose: error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pyrexpose: error: " << e.what() << '\n';
    return 1;
  }
  return code;
}

#include "pyrexpose/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "pyrexpose/autodiff/ops.hpp"
#include "pyrexpose/error.hpp"
#include "pyrexpose/image_io.hpp"
#include "pyrexpose/manifest.hpp"
#include "pyrexpose/metrics.hpp"
#include "pyrexpose/pyramid.hpp"
#include "pyrexpose/tensor_image.hpp"

namespace pyrexpose {

namespace fs = std::filesystem;
using nlohmann::json;

StageConfig StageConfig::full_stage1() {
  StageConfig s;
  s.patch_size = 128;
  s.epochs = 40;
  s.batch_size = 32;
  s.decay_every_epochs = 20;
  return s;
}

StageConfig StageConfig::full_stage2() {
  StageConfig s;
  s.patch_size = 256;
  s.epochs = 30;
  s.batch_size = 8;
  s.decay_every_epochs = 10;
  s.adversarial_from_epoch = 16;
  return s;
}

StageConfig StageConfig::full_stage3() {
  StageConfig s;
  s.patch_size = 512;
  s.epochs = 20;
  s.batch_size = 4;
  s.decay_every_epochs = 5;
  s.adversarial_from_epoch = 1;
  return s;
}

void StageConfig::validate(int levels) const {
  const int multiple = 1 << (levels - 1);
  if (patch_size < 1 || patch_size % multiple != 0) {
    throw ConfigError("stage: patch size " + std::to_string(patch_size) + " is not a positive multiple of " +
                      std::to_string(multiple));
  }
  if (epochs < 1) throw ConfigError("stage: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("stage: batch size must be >= 1");
  if (!(lr_main > 0.0) || !(lr_disc > 0.0)) throw ConfigError("stage: learning rates must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) throw ConfigError("stage: decay factor must be in (0,1]");
  if (decay_every_epochs < 1) throw ConfigError("stage: decay_every_epochs must be >= 1");
  if (adversarial_from_epoch == 0 || adversarial_from_epoch < -1) {
    throw ConfigError("stage: adversarial_from_epoch must be -1 or a 1-based epoch");
  }
  if (patches_per_image < 1) throw ConfigError("stage: patches_per_image must be >= 1");
  if (max_steps < 0) throw ConfigError("stage: max_steps must be >= 0");
}

json StageConfig::to_json() const {
  return {{"patch_size", patch_size},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"lr_main", lr_main},
          {"lr_disc", lr_disc},
          {"lr_decay_factor", lr_decay_factor},
          {"decay_every_epochs", decay_every_epochs},
          {"adversarial_from_epoch", adversarial_from_epoch},
          {"patches_per_image", patches_per_image},
          {"max_steps", max_steps}};
}

StageConfig StageConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("stage: expected a JSON object");
  StageConfig s;
  try {
    s.patch_size = j.value("patch_size", s.patch_size);
    s.epochs = j.value("epochs", s.epochs);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.lr_main = j.value("lr_main", s.lr_main);
    s.lr_disc = j.value("lr_disc", s.lr_disc);
    s.lr_decay_factor = j.value("lr_decay_factor", s.lr_decay_factor);
    s.decay_every_epochs = j.value("decay_every_epochs", s.decay_every_epochs);
    s.adversarial_from_epoch = j.value("adversarial_from_epoch", s.adversarial_from_epoch);
    s.patches_per_image = j.value("patches_per_image", s.patches_per_image);
    s.max_steps = j.value("max_steps", s.max_steps);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("stage: ") + e.what());
  }
  return s;
}

std::vector<StageConfig> TrainRun::full_stages() {
  return {StageConfig::full_stage1(), StageConfig::full_stage2(), StageConfig::full_stage3()};
}

std::vector<StageConfig> TrainRun::desk_stages() {
  StageConfig a;
  a.patch_size = 64;
  a.epochs = 30;
  a.batch_size = 8;
  a.decay_every_epochs = 15;
  a.patches_per_image = 4;
  StageConfig b;
  b.patch_size = 128;
  b.epochs = 10;
  b.batch_size = 4;
  b.decay_every_epochs = 5;
  b.adversarial_from_epoch = 6;
  b.patches_per_image = 2;
  return {a, b};
}

void TrainRun::validate() const {
  model_config.validate();
  if (stages.empty()) throw ConfigError("train: at least one stage is required");
  for (const auto& s : stages) s.validate(model_config.levels);
  PatchSpec spec = patch_filter;
  spec.size = stages.front().patch_size;
  spec.validate(model_config.levels);
  if (!(adv_loss_multiplier >= 0.0) || !std::isfinite(adv_loss_multiplier)) {
    throw ConfigError("train: adv_loss_multiplier must be finite and >= 0");
  }
  if (checkpoint_every_epochs < 1) throw ConfigError("train: checkpoint_every_epochs must be >= 1");
  if (output_dir.empty()) throw ConfigError("train: output_dir is required");
}

json TrainRun::to_json() const {
  json stages_json = json::array();
  for (const auto& s : stages) stages_json.push_back(s.to_json());
  return {{"stages", stages_json},
          {"seed", seed},
          {"manifest", manifest.string()},
          {"model", model_config.to_json()},
          {"output_dir", output_dir.string()},
          {"use_pyramid_loss", use_pyramid_loss},
          {"adv_loss_multiplier", adv_loss_multiplier},
          {"patch_filter",
           {{"min_mean_intensity", patch_filter.min_mean_intensity},
            {"max_mean_intensity", patch_filter.max_mean_intensity},
            {"min_mean_gradient", patch_filter.min_mean_gradient},
            {"flip_probability", patch_filter.flip_probability}}},
          {"checkpoint_every_epochs", checkpoint_every_epochs}};
}

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

TrainRun TrainRun::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("train: config must be a JSON object");
  TrainRun r;
  try {
    if (j.contains("model")) {
      const json& m = j.at("model");
      if (m.is_string()) {
        const std::string name = m.get<std::string>();
        if (name == "full") r.model_config = ModelConfig::full();
        else if (name == "desk") r.model_config = ModelConfig::desk();
        else if (name == "tiny") r.model_config = ModelConfig::tiny();
        else throw ConfigError("train: unknown model preset '" + name + "'");
      } else {
        r.model_config = ModelConfig::from_json(m);
      }
    }
    if (!j.contains("stages")) throw ConfigError("train: missing 'stages'");
    const json& st = j.at("stages");
    if (st.is_string()) {
      const std::string name = st.get<std::string>();
      if (name == "full") r.stages = full_stages();
      else if (name == "desk") r.stages = desk_stages();
      else throw ConfigError("train: unknown stage preset '" + name + "'");
    } else if (st.is_array()) {
      for (const auto& s : st) r.stages.push_back(StageConfig::from_json(s));
    } else {
      throw ConfigError("train: 'stages' must be a preset name or an array");
    }
    r.seed = j.value("seed", std::uint64_t{0});
    r.manifest = resolve(j.value("manifest", std::string{}), base_dir);
    r.output_dir = resolve(j.value("output_dir", std::string{}), base_dir);
    r.use_pyramid_loss = j.value("use_pyramid_loss", true);
    r.adv_loss_multiplier = j.value("adv_loss_multiplier", 1.0);
    r.checkpoint_every_epochs = j.value("checkpoint_every_epochs", 1);
    if (j.contains("patch_filter")) {
      const json& pf = j.at("patch_filter");
      r.patch_filter.min_mean_intensity = pf.value("min_mean_intensity", r.patch_filter.min_mean_intensity);
      r.patch_filter.max_mean_intensity = pf.value("max_mean_intensity", r.patch_filter.max_mean_intensity);
      r.patch_filter.min_mean_gradient = pf.value("min_mean_gradient", r.patch_filter.min_mean_gradient);
      r.patch_filter.flip_probability = pf.value("flip_probability", r.patch_filter.flip_probability);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  return r;
}

TrainRun TrainRun::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open training config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("training config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

LearningRates decay_lr(const StageConfig& stage, int completed_epoch) {
  const int d = std::max(1, stage.decay_every_epochs);
  const int reached = std::clamp(completed_epoch, 0, stage.epochs) / d;
  const int possible = (stage.epochs - 1) / d;
  const double f = std::pow(stage.lr_decay_factor, std::min(reached, possible));
  return {stage.lr_main * f, stage.lr_disc * f};
}

std::string to_string(StepMode mode) {
  switch (mode) {
    case StepMode::kGenOnly: return "GEN_ONLY";
    case StepMode::kGen: return "GEN";
    case StepMode::kDisc: return "DISC";
  }
  return "?";
}

namespace {

// Temporarily stops gradients from reaching a parameter set.
class FreezeGuard {
 public:
  explicit FreezeGuard(ad::ParameterSet<float>& params) : params_(params) {
    for (auto& [name, t] : params_) t.set_requires_grad(false);
  }
  ~FreezeGuard() {
    for (auto& [name, t] : params_) t.set_requires_grad(true);
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ad::ParameterSet<float>& params_;
};

std::string index_list(std::span<const std::size_t> indices, std::size_t batch) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < batch; ++i) {
    if (i) os << ',';
    os << (indices.empty() ? i : indices[i]);
  }
  os << ']';
  return os.str();
}

}  // namespace

Trainer::Trainer(const ModelConfig& cfg, std::uint64_t seed, bool use_pyramid_loss, double adv_multiplier)
    : model_(cfg), use_pyramid_loss_(use_pyramid_loss), adv_multiplier_(adv_multiplier), gen_opt_(1e-4),
      disc_opt_(1e-5) {
  cfg.validate();
  model_.initialize(seed);
}

void Trainer::set_learning_rates(const LearningRates& lr) {
  gen_opt_.set_lr(lr.main);
  disc_opt_.set_lr(lr.disc);
}

LossBreakdown Trainer::training_step(std::span<const PatchPair> batch, StepMode mode,
                                     std::span<const std::size_t> indices) {
  if (batch.empty()) throw InvalidInput("training_step: empty batch");
  if (!indices.empty() && indices.size() != batch.size()) {
    throw InvalidInput("training_step: index list does not match the batch size");
  }
  const int n = model_.config.levels;
  const Image& first = batch.front().input;
  if (!pyramid_compatible(first.height(), first.width(), n)) {
    throw InvalidInput("training_step: patch size is not divisible by 2^(levels-1)");
  }

  std::vector<Pyramid> pyrs;
  std::vector<Image> targets;
  for (const PatchPair& p : batch) {
    if (!p.input.same_shape(first) || !p.target.same_shape(first)) {
      throw InvalidInput("training_step: all patches in a batch must share one size");
    }
    pyrs.push_back(laplacian_decompose(p.input, n));
    targets.push_back(p.target);
  }
  const auto levels = pyramid_tensors<float>(std::span<const Pyramid>(pyrs));
  const ad::Tensor<float> target = to_tensor<float>(std::span<const Image>(targets));
  const ScaleVector ones = ScaleVector::ones(n);

  auto fail_if_not_finite = [&](double v, const char* what) {
    if (!std::isfinite(v)) {
      throw TrainingError(std::string("non-finite ") + what + " in " + to_string(mode) + " step on batch " +
                          index_list(indices, batch.size()));
    }
  };

  LossBreakdown lb;
  if (mode == StepMode::kDisc) {
    ad::Graph<float> frozen(false);
    const ad::Tensor<float> y = model_.generator.forward(frozen, levels, ones).y;
    ad::Graph<float> g;
    const ad::Tensor<float> loss = discriminator_loss(g, target, y, model_.discriminator);
    lb.l_disc = loss.item();
    fail_if_not_finite(lb.l_disc, "discriminator loss");
    model_.discriminator.params().zero_grad();
    g.backward(loss);
    disc_opt_.step(model_.discriminator.params());
    return lb;
  }

  ad::Graph<float> g;
  const auto out = model_.generator.forward(g, levels, ones);
  ad::Tensor<float> total = reconstruction_loss(g, out.y, target);
  lb.l_rec = total.item();

  if (use_pyramid_loss_ && n > 1) {
    std::vector<std::vector<Image>> per_sample;
    for (const Image& t : targets) per_sample.push_back(pyramid_loss_targets(t, n));
    std::vector<ad::Tensor<float>> level_targets;
    for (int l = 0; l < n - 1; ++l) {
      std::vector<Image> stack;
      for (const auto& s : per_sample) stack.push_back(s[static_cast<std::size_t>(l)]);
      level_targets.push_back(to_tensor<float>(std::span<const Image>(stack)));
    }
    const ad::Tensor<float> lp = pyramid_loss(g, out.intermediates, level_targets);
    lb.l_pyr = lp.item();
    total = ad::add(g, total, lp);
  }

  // The guard must outlive backward: op closures consult requires_grad then.
  std::optional<FreezeGuard> freeze;
  if (mode == StepMode::kGen) {
    freeze.emplace(model_.discriminator.params());
    const ad::Tensor<float> la = adversarial_generator_loss(g, out.y, model_.discriminator, n, adv_multiplier_);
    lb.l_adv = la.item();
    total = ad::add(g, total, la);
  }
  lb.total = total.item();
  fail_if_not_finite(lb.total, "generator loss");

  model_.generator.params().zero_grad();
  g.backward(total);
  freeze.reset();
  gen_opt_.step(model_.generator.params());

  last_outputs_.clear();
  for (int i = 0; i < out.y.shape().n; ++i) last_outputs_.push_back(to_image(out.y, i).clamped());
  return lb;
}

namespace {

void save_optimizer(const ad::AdamOptimizer<float>& opt, const std::string& prefix, Checkpoint& ck) {
  json steps = json::object();
  for (const auto& [name, st] : opt.states()) {
    const auto count = static_cast<std::uint32_t>(st.m.size());
    ck.tensors.push_back({prefix + "/" + name + "/m", {{count}, std::vector<float>(st.m.begin(), st.m.end())}});
    ck.tensors.push_back({prefix + "/" + name + "/v", {{count}, std::vector<float>(st.v.begin(), st.v.end())}});
    steps[name] = st.t;
  }
  ck.extra[prefix] = {{"lr", opt.lr()}, {"steps", steps}};
}

void load_optimizer(ad::AdamOptimizer<float>& opt, const std::string& prefix, const Checkpoint& ck) {
  if (!ck.extra.contains(prefix)) throw CheckpointError("optimizer state lacks '" + prefix + "'");
  const json& meta = ck.extra.at(prefix);
  opt.set_lr(meta.at("lr").get<double>());
  opt.states().clear();
  for (const auto& [name, t] : meta.at("steps").items()) {
    const CheckpointTensor* m = ck.find(prefix + "/" + name + "/m");
    const CheckpointTensor* v = ck.find(prefix + "/" + name + "/v");
    if (!m || !v) throw CheckpointError("optimizer state for '" + name + "' is incomplete");
    ad::AdamState<float> st;
    st.m.assign(m->data.begin(), m->data.end());
    st.v.assign(v->data.begin(), v->data.end());
    st.t = t.get<std::int64_t>();
    opt.states().emplace(name, std::move(st));
  }
}

}  // namespace

Checkpoint Trainer::optimizer_state() const {
  Checkpoint ck;
  ck.config = model_.config;
  save_optimizer(gen_opt_, "gen", ck);
  save_optimizer(disc_opt_, "disc", ck);
  return ck;
}

void Trainer::restore_optimizer_state(const Checkpoint& state) {
  try {
    load_optimizer(gen_opt_, "gen", state);
    load_optimizer(disc_opt_, "disc", state);
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed optimizer state: ") + e.what());
  }
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

struct Position {
  int stage = 0;  // 0-based
  int epoch = 0;  // last completed epoch of `stage`, 1-based
  std::int64_t step = 0;
  std::int64_t stage_steps = 0;
};

const fs::path kStateFile = "latest.state";
const fs::path kLatestFile = "latest.ckpt";

// Keeps log lines up to and including `step` so a resumed run appends
// exactly what an uninterrupted run would have written.
void truncate_log(const fs::path& log, std::int64_t step) {
  std::ifstream in(log);
  if (!in) return;
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || j.value("step", std::int64_t{0}) > step) break;
    keep.push_back(line);
  }
  in.close();
  std::ofstream out(log, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

}  // namespace

TrainResult train(const TrainRun& run, std::span<const TrainingPair> pairs, const TrainOptions& options) {
  run.validate();
  if (pairs.empty()) throw ConfigError("train: the training set is empty");
  for (const auto& p : pairs) {
    if (!p.input.same_shape(p.target)) throw InvalidInput("train: input and target sizes differ");
  }

  fs::create_directories(run.output_dir);
  const fs::path log_path = run.output_dir / "train_log.jsonl";
  const fs::path ckpt_dir = run.output_dir / "checkpoints";
  fs::create_directories(ckpt_dir);

  Trainer trainer(run.model_config, run.seed, run.use_pyramid_loss, run.adv_loss_multiplier);
  Position pos;
  if (options.resume && fs::exists(ckpt_dir / kLatestFile)) {
    const Checkpoint model_ck = load_checkpoint(ckpt_dir / kLatestFile, run.model_config);
    restore(trainer.model(), model_ck);
    trainer.restore_optimizer_state(load_checkpoint(ckpt_dir / kStateFile));
    pos.stage = model_ck.extra.at("stage").get<int>();
    pos.epoch = model_ck.extra.at("epoch").get<int>();
    pos.step = model_ck.extra.at("step").get<std::int64_t>();
    pos.stage_steps = model_ck.extra.at("stage_steps").get<std::int64_t>();
    truncate_log(log_path, pos.step);
  } else {
    std::ofstream(log_path, std::ios::trunc);
  }
  std::ofstream log(log_path, std::ios::app);

  auto emit = [&](const json& line) {
    log << line.dump() << '\n';
    log.flush();
    if (options.on_log) options.on_log(line);
  };

  auto write_checkpoint = [&](const Position& p, const fs::path& path) {
    const json extra = {{"stage", p.stage}, {"epoch", p.epoch}, {"step", p.step}, {"stage_steps", p.stage_steps}, {"seed", run.seed}};
    save_checkpoint(to_checkpoint(trainer.model(), extra), path);
  };

  TrainResult result;
  result.log_path = log_path;
  bool capped = false;

  for (int si = pos.stage; si < static_cast<int>(run.stages.size()) && !capped; ++si) {
    const StageConfig& stage = run.stages[static_cast<std::size_t>(si)];
    PatchSpec spec = run.patch_filter;
    spec.size = stage.patch_size;
    const bool resumed_stage = si == pos.stage;
    const int first_epoch = resumed_stage ? pos.epoch + 1 : 1;
    if (!resumed_stage) pos.stage_steps = 0;
    std::int64_t& stage_steps = pos.stage_steps;
    auto stage_capped = [&] { return stage.max_steps > 0 && stage_steps >= stage.max_steps; };
    trainer.set_learning_rates(decay_lr(stage, first_epoch - 1));

    for (int epoch = first_epoch; epoch <= stage.epochs && !capped && !stage_capped(); ++epoch) {
      std::vector<PatchPair> patches;
      std::vector<std::size_t> source;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto got = extract_patches(pairs[i].input, pairs[i].target, spec, mix_seed(run.seed, si, epoch, i),
                                   stage.patches_per_image);
        for (auto& p : got) {
          patches.push_back(std::move(p));
          source.push_back(i);
        }
      }
      if (patches.empty()) {
        throw TrainingError("stage " + std::to_string(si) + " epoch " + std::to_string(epoch) +
                            ": no patch passed the intensity/gradient filters");
      }
      std::vector<std::size_t> order(patches.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 shuffle_rng(mix_seed(run.seed, si, epoch, ~std::uint64_t{0}));
      std::shuffle(order.begin(), order.end(), shuffle_rng);

      const bool adversarial = stage.adversarial(epoch);
      double mse_sum = 0.0;
      std::size_t mse_count = 0;
      for (std::size_t b = 0; b < order.size() && !capped; b += static_cast<std::size_t>(stage.batch_size)) {
        const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(stage.batch_size));
        std::vector<PatchPair> batch;
        std::vector<std::size_t> ids;
        for (std::size_t k = b; k < end; ++k) {
          batch.push_back(patches[order[k]]);
          ids.push_back(source[order[k]]);
        }

        LossBreakdown lb;
        if (adversarial) {
          lb.l_disc = trainer.training_step(batch, StepMode::kDisc, ids).l_disc;
          const double l_disc = lb.l_disc;
          lb = trainer.training_step(batch, StepMode::kGen, ids);
          lb.l_disc = l_disc;
        } else {
          lb = trainer.training_step(batch, StepMode::kGenOnly, ids);
        }
        for (std::size_t k = 0; k < batch.size(); ++k) {
          const auto& y = trainer.last_outputs()[k];
          const auto& t = batch[k].target;
          double s = 0.0;
          for (std::size_t q = 0; q < y.size(); ++q) {
            const double d = static_cast<double>(y.data()[q]) - t.data()[q];
            s += d * d;
          }
          mse_sum += s / static_cast<double>(y.size());
          ++mse_count;
        }
        ++pos.step;
        ++stage_steps;
        json line = {{"step", pos.step},     {"stage", si},         {"epoch", epoch},
                     {"l_rec", lb.l_rec},    {"l_pyr", lb.l_pyr},   {"l_adv", lb.l_adv},
                     {"lr", trainer.learning_rates().main}};
        if (adversarial) {
          line["l_disc"] = lb.l_disc;
          line["lr_disc"] = trainer.learning_rates().disc;
        }
        emit(line);
        capped = options.max_total_steps > 0 && pos.step >= options.max_total_steps;
        if (capped || stage_capped()) break;
      }

      const double mse = mse_count ? mse_sum / static_cast<double>(mse_count) : 0.0;
      const double train_psnr = mse > 0.0 ? 10.0 * std::log10(1.0 / mse) : kInfinitePsnr;
      emit({{"step", pos.step}, {"stage", si}, {"epoch", epoch}, {"train_psnr", train_psnr}});
      result.epochs.push_back({si, epoch, pos.step, train_psnr});

      trainer.set_learning_rates(decay_lr(stage, epoch));
      pos.stage = si;
      pos.epoch = epoch;
      const bool last = epoch == stage.epochs || stage_capped() || capped;
      if (epoch % run.checkpoint_every_epochs == 0 || last) {
        write_checkpoint(pos, ckpt_dir / kLatestFile);
        save_checkpoint(trainer.optimizer_state(), ckpt_dir / kStateFile);
      }
    }
    pos.epoch = 0;
  }

  result.steps = pos.step;
  result.final_checkpoint = to_checkpoint(trainer.model(), {{"steps", pos.step}, {"seed", run.seed}});
  result.checkpoint_path = run.output_dir / "final.ckpt";
  save_checkpoint(result.final_checkpoint, result.checkpoint_path);
  return result;
}

TrainResult train(const TrainRun& run, const TrainOptions& options) {
  run.validate();
  if (run.manifest.empty()) throw ConfigError("train: manifest path is required");
  const DatasetManifest manifest = load_manifest(run.manifest);
  const auto entries = manifest.select(Split::kTrain);
  if (entries.empty()) throw ConfigError("train: manifest has no TRAIN entries");
  std::vector<TrainingPair> pairs;
  pairs.reserve(entries.size());
  for (const auto& e : entries) pairs.push_back({load_image(e.input_path), load_image(e.target_path)});
  return train(run, pairs, options);
}

}  // namespace pyrexpose

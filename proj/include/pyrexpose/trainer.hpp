#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pyrexpose/autodiff/adam.hpp"
#include "pyrexpose/checkpoint.hpp"
#include "pyrexpose/image.hpp"
#include "pyrexpose/losses.hpp"
#include "pyrexpose/model.hpp"
#include "pyrexpose/patches.hpp"

namespace pyrexpose {

struct StageConfig {
  int patch_size = 128;
  int epochs = 40;
  int batch_size = 32;
  double lr_main = 1e-4;
  double lr_disc = 1e-5;
  double lr_decay_factor = 0.5;
  int decay_every_epochs = 20;
  /// First (1-based) epoch that alternates discriminator and generator
  /// steps; -1 disables the adversarial term for the whole stage.
  int adversarial_from_epoch = -1;
  /// Patches sampled from every training image each epoch.
  int patches_per_image = 1;
  /// Hard cap on optimizer steps in this stage; 0 means no cap.
  int max_steps = 0;

  static StageConfig full_stage1();
  static StageConfig full_stage2();
  static StageConfig full_stage3();

  void validate(int levels) const;
  bool adversarial(int epoch) const { return adversarial_from_epoch > 0 && epoch >= adversarial_from_epoch; }

  nlohmann::json to_json() const;
  static StageConfig from_json(const nlohmann::json& j);
};

struct TrainRun {
  std::vector<StageConfig> stages;
  std::uint64_t seed = 0;
  std::filesystem::path manifest;
  ModelConfig model_config = ModelConfig::desk();
  std::filesystem::path output_dir;

  bool use_pyramid_loss = true;
  double adv_loss_multiplier = 1.0;
  /// Intensity, gradient and flip settings; the size comes from each stage.
  PatchSpec patch_filter;
  int checkpoint_every_epochs = 1;

  static std::vector<StageConfig> full_stages();
  static std::vector<StageConfig> desk_stages();

  void validate() const;

  nlohmann::json to_json() const;
  // Relative manifest and output paths resolve against `base_dir`.
  static TrainRun from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static TrainRun load(const std::filesystem::path& path);
};

struct LearningRates {
  double main = 1e-4;
  double disc = 1e-5;

  bool operator==(const LearningRates&) const = default;
};

/// Rates in effect after `completed_epoch` (1-based) of `stage` ends: the
/// stage's base rates multiplied by the decay factor once per boundary
/// reached so far. Pure, so re-applying at the same boundary is a no-op.
LearningRates decay_lr(const StageConfig& stage, int completed_epoch);

enum class StepMode { kGenOnly, kGen, kDisc };

std::string to_string(StepMode mode);

/// One generator or discriminator update on a float model.
class Trainer {
 public:
  Trainer(const ModelConfig& cfg, std::uint64_t seed, bool use_pyramid_loss = true, double adv_multiplier = 1.0);

  // `indices` identify the batch members in diagnostics; defaults to
  // positions within the batch.
  LossBreakdown training_step(std::span<const PatchPair> batch, StepMode mode,
                              std::span<const std::size_t> indices = {});

  /// The most recent generator output of a GEN_ONLY or GEN step, clamped.
  const std::vector<Image>& last_outputs() const { return last_outputs_; }

  void set_learning_rates(const LearningRates& lr);
  LearningRates learning_rates() const { return {gen_opt_.lr(), disc_opt_.lr()}; }

  Model<float>& model() { return model_; }
  const Model<float>& model() const { return model_; }

  /// Optimizer moments and step counters as a checkpoint container.
  Checkpoint optimizer_state() const;
  void restore_optimizer_state(const Checkpoint& state);

 private:
  Model<float> model_;
  bool use_pyramid_loss_;
  double adv_multiplier_;
  ad::AdamOptimizer<float> gen_opt_;
  ad::AdamOptimizer<float> disc_opt_;
  std::vector<Image> last_outputs_;
};

struct TrainingPair {
  Image input;
  Image target;
};

struct EpochSummary {
  int stage = 0;
  int epoch = 0;
  std::int64_t step = 0;
  double train_psnr = 0.0;
};

struct TrainResult {
  Checkpoint final_checkpoint;
  std::filesystem::path checkpoint_path;
  std::filesystem::path log_path;
  std::int64_t steps = 0;
  std::vector<EpochSummary> epochs;
};

struct TrainOptions {
  bool resume = false;
  /// Overall cap across stages; 0 means no cap.
  std::int64_t max_total_steps = 0;
  std::function<void(const nlohmann::json&)> on_log;
};

/// Loads the TRAIN split of the run's manifest and trains.
TrainResult train(const TrainRun& run, const TrainOptions& options = {});

// Trains on in-memory pairs. Writes the JSON-lines log, per-epoch
// checkpoints and `final.ckpt` under run.output_dir.
TrainResult train(const TrainRun& run, std::span<const TrainingPair> pairs, const TrainOptions& options = {});

}  // namespace pyrexpose

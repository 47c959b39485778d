#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pyrexpose/manifest.hpp"
#include "pyrexpose/metrics.hpp"
#include "pyrexpose/pyramid.hpp"

namespace pyrexpose {

inline const std::vector<float> kDefaultSynthEvs = {-1.5f, -1.0f, 0.0f, 1.0f, 1.5f};

/// "{stem}_ev{+x.x}.png"; zero is written as +0.0.
std::string ev_file_name(const std::string& stem, float ev);

struct SynthOptions {
  std::vector<float> evs = kDefaultSynthEvs;
  /// Fractions of source images assigned to VAL and TEST; the rest is TRAIN.
  double val_fraction = 0.0;
  double test_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Renders every PNG in `source_dir` at each relative EV into `output_dir`
// and writes a manifest pairing each rendering with its untouched source.
// All renderings of one source share a split.
DatasetManifest synthesize_dataset(const std::filesystem::path& source_dir, const std::filesystem::path& output_dir,
                                   const std::filesystem::path& manifest_path, const SynthOptions& options = {});

/// Writes level_1.png (finest) .. level_n.png. Detail levels are offset by
/// +0.5 so that zero maps to mid-grey; the residual is written as is.
std::vector<std::filesystem::path> dump_pyramid(const Image& img, int levels, const std::filesystem::path& dir);

/// PNG files directly inside `dir`, sorted by name.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

struct EvalOptions {
  Split split = Split::kTest;
  std::optional<ScaleVector> scales;
  int max_dim = 512;
  const NiqeModel* niqe = nullptr;
  std::optional<double> ma;
};

// Corrects every manifest entry of the split and scores it against its
// target. The report holds one record per image plus means over the set;
// identical pairs have infinite PSNR and are counted rather than averaged.
nlohmann::json evaluate_manifest(const DatasetManifest& manifest, const std::filesystem::path& checkpoint,
                                 const EvalOptions& options = {});

}  // namespace pyrexpose

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace pyrexpose {

enum class Split { kTrain, kVal, kTest };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
  std::filesystem::path input_path;
  std::filesystem::path target_path;
  float relative_ev = 0.0f;
  Split split = Split::kTrain;
};

// JSON document {"entries": [{input_path, target_path, relative_ev, split}]}.
// Relative paths resolve against the manifest's directory.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> select(Split split) const;
};

/// With `validate`, every file must exist and each input/target pair must
/// share dimensions.
DatasetManifest load_manifest(const std::filesystem::path& path, bool validate = true);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace pyrexpose

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pyrexpose/model.hpp"

namespace pyrexpose {

// On-disk layout (little endian):
//   "PYRX" | u32 version | u32 metadata length | metadata JSON |
//   records: u32 name length | name | u32 rank | u32 dims[rank] | f32 payload
// The metadata holds {"format_version", "model", "tensor_count", "extra"}.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

struct Checkpoint {
  ModelConfig config;
  nlohmann::json extra = nlohmann::json::object();
  std::vector<std::pair<std::string, CheckpointTensor>> tensors;

  const CheckpointTensor* find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Strict variant: the stored configuration must equal `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

template <typename T>
Checkpoint to_checkpoint(const Model<T>& model, nlohmann::json extra = nlohmann::json::object());

/// Every model parameter must appear exactly once with a matching shape and
/// no unknown tensors may be present.
template <typename T>
void restore(Model<T>& model, const Checkpoint& ckpt);

template <typename T>
Model<T> model_from_checkpoint(const Checkpoint& ckpt) {
  Model<T> m(ckpt.config);
  restore(m, ckpt);
  return m;
}

}  // namespace pyrexpose

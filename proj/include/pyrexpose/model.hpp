#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "pyrexpose/autodiff/parameters.hpp"
#include "pyrexpose/autodiff/tensor.hpp"
#include "pyrexpose/pyramid.hpp"

namespace pyrexpose {

// One encoder-decoder sub-network. `depth` counts pooling steps, so the
// network works at depth + 1 resolutions; channels double per step.
struct SubnetConfig {
  int depth = 3;
  int base_channels = 24;
  int in_channels = 3;
  int out_channels = 3;
  int kernel = 3;

  bool operator==(const SubnetConfig&) const = default;
};

// Stride-2 3x3 conv ladder, global average pooling, dense layer to a single
// pre-sigmoid logit.
struct DiscriminatorConfig {
  int input_size = 256;
  std::vector<int> channels = {16, 32, 64, 128, 256, 256};

  bool operator==(const DiscriminatorConfig&) const = default;
};

struct ModelConfig {
  int levels = 4;
  std::vector<SubnetConfig> subnets;  // coarse to fine
  ScaleVector scale_defaults;
  float leaky_slope = 0.2f;
  DiscriminatorConfig discriminator;

  /// depths [4,3,3,3], base channels [24,24,24,16].
  static ModelConfig full();
  /// depths [4,3,3,3], base channels [8,8,8,8], narrow 64-pixel discriminator.
  static ModelConfig desk();
  /// Base width 2 everywhere; for gradient checks on 8x8 inputs.
  static ModelConfig tiny();

  void validate() const;
  /// Image dimensions must be multiples of this before decomposition.
  int size_multiple() const { return 1 << (levels - 1); }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  bool operator==(const ModelConfig& o) const;
};

struct ParamCounts {
  std::vector<std::int64_t> subnets;    // coarse to fine
  std::vector<std::int64_t> upscalers;  // one per level except the finest
  std::int64_t generator = 0;
  std::int64_t discriminator = 0;
};

/// Closed-form parameter counts for a configuration.
ParamCounts count_params(const ModelConfig& cfg);

// The coarse-to-fine corrector: one sub-network per pyramid level plus a
// trainable 2x2 stride-2 transposed conv after every level but the finest.
template <typename T>
class CorrectorNet {
 public:
  explicit CorrectorNet(const ModelConfig& cfg);

  /// He-normal conv weights, zero biases, upscalers start as nearest-neighbour
  /// replication.
  void initialize(std::uint64_t seed);

  struct Output {
    /// intermediates[i] is Y(i + 2), i.e. Y(2)..Y(n); each is twice the
    /// spatial size of pyramid level i + 2.
    std::vector<ad::Tensor<T>> intermediates;
    ad::Tensor<T> y;
  };

  // levels[l] holds X(l+1) as an (N,3,h,w) tensor, finest first. Every
  // level is multiplied by its scale before entering the network.
  Output forward(ad::Graph<T>& g, const std::vector<ad::Tensor<T>>& levels, const ScaleVector& s) const;

  const ModelConfig& config() const { return cfg_; }
  ad::ParameterSet<T>& params() { return params_; }
  const ad::ParameterSet<T>& params() const { return params_; }

 private:
  ad::Tensor<T> subnet(ad::Graph<T>& g, int index, const ad::Tensor<T>& x) const;

  ModelConfig cfg_;
  ad::ParameterSet<T> params_;
};

template <typename T>
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, float leaky_slope);

  void initialize(std::uint64_t seed);
  /// x: (N,3,S,S) with S = input_size. Returns (N,1,1,1) logits.
  ad::Tensor<T> forward(ad::Graph<T>& g, const ad::Tensor<T>& x) const;

  const DiscriminatorConfig& config() const { return cfg_; }
  ad::ParameterSet<T>& params() { return params_; }
  const ad::ParameterSet<T>& params() const { return params_; }

 private:
  DiscriminatorConfig cfg_;
  T slope_;
  ad::ParameterSet<T> params_;
};

// Generator and discriminator sharing one configuration.
template <typename T>
struct Model {
  explicit Model(const ModelConfig& cfg)
      : config(cfg), generator(cfg), discriminator(cfg.discriminator, cfg.leaky_slope) {}

  void initialize(std::uint64_t seed) {
    generator.initialize(seed);
    discriminator.initialize(seed ^ 0x9e3779b97f4a7c15ULL);
  }

  ModelConfig config;
  CorrectorNet<T> generator;
  Discriminator<T> discriminator;
};

/// Copies parameter values between precisions (names and shapes must match).
template <typename Dst, typename Src>
void copy_parameters(ad::ParameterSet<Dst>& dst, const ad::ParameterSet<Src>& src);

extern template class CorrectorNet<float>;
extern template class CorrectorNet<double>;
extern template class Discriminator<float>;
extern template class Discriminator<double>;

}  // namespace pyrexpose

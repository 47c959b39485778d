#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pyrexpose/image.hpp"

namespace pyrexpose {

struct PatchSpec {
  int size = 128;
  double min_mean_intensity = 0.02;
  double max_mean_intensity = 0.98;
  double min_mean_gradient = 0.06;
  double flip_probability = 0.5;

  /// Throws ConfigError when thresholds are inconsistent or `size` is not a
  /// multiple of 2^(levels-1).
  void validate(int pyramid_levels = 1) const;
};

struct PatchPair {
  Image input;
  Image target;
};

// Samples up to `max_patches` aligned square patches from an input/target
// pair. Candidates whose input fails the intensity or gradient filter are
// discarded; accepted pairs are jointly left-right flipped with
// spec.flip_probability. A pure function of its arguments.
std::vector<PatchPair> extract_patches(const Image& input, const Image& target, const PatchSpec& spec,
                                       std::uint64_t seed, int max_patches = 1, int attempts_per_patch = 8);

bool passes_patch_filter(const Image& input_patch, const PatchSpec& spec);

}  // namespace pyrexpose

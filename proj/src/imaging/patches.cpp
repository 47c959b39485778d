#include "pyrexpose/patches.hpp"

#include <random>
#include <string>

#include "pyrexpose/error.hpp"
#include "pyrexpose/imaging.hpp"

namespace pyrexpose {

void PatchSpec::validate(int pyramid_levels) const {
  if (size < 1) throw ConfigError("patch size must be positive");
  if (!(min_mean_intensity >= 0.0 && min_mean_intensity < max_mean_intensity && max_mean_intensity <= 1.0)) {
    throw ConfigError("patch intensity bounds must satisfy 0 <= min < max <= 1");
  }
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) throw ConfigError("flip probability must be in [0,1]");
  if (pyramid_levels < 1) throw ConfigError("pyramid levels must be >= 1");
  const int multiple = 1 << (pyramid_levels - 1);
  if (size % multiple != 0) {
    throw ConfigError("patch size " + std::to_string(size) + " is not divisible by " + std::to_string(multiple));
  }
}

bool passes_patch_filter(const Image& input_patch, const PatchSpec& spec) {
  const double mean = mean_intensity(input_patch);
  if (!(mean > spec.min_mean_intensity && mean < spec.max_mean_intensity)) return false;
  return mean_gradient_magnitude(input_patch) >= spec.min_mean_gradient;
}

std::vector<PatchPair> extract_patches(const Image& input, const Image& target, const PatchSpec& spec,
                                       std::uint64_t seed, int max_patches, int attempts_per_patch) {
  if (!input.same_shape(target)) throw InvalidInput("extract_patches: input and target sizes differ");
  std::vector<PatchPair> out;
  const int s = spec.size;
  if (input.height() < s || input.width() < s || max_patches <= 0) return out;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> ry(0, input.height() - s);
  std::uniform_int_distribution<int> rx(0, input.width() - s);
  std::bernoulli_distribution flip(spec.flip_probability);

  const int attempts = max_patches * std::max(1, attempts_per_patch);
  for (int a = 0; a < attempts && static_cast<int>(out.size()) < max_patches; ++a) {
    const int y = ry(rng), x = rx(rng);
    const bool do_flip = flip(rng);
    Image in = crop(input, y, x, s, s);
    if (!passes_patch_filter(in, spec)) continue;
    Image tg = crop(target, y, x, s, s);
    if (do_flip) {
      in = flip_horizontal(in);
      tg = flip_horizontal(tg);
    }
    out.push_back({std::move(in), std::move(tg)});
  }
  return out;
}

}  // namespace pyrexpose

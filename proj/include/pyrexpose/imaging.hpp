#pragma once

#include <cstdint>
#include <vector>

#include "pyrexpose/image.hpp"

namespace pyrexpose {

float srgb_to_linear(float v);
float linear_to_srgb(float v);

/// Requires an sRGB-tagged image; returns a linear-tagged one.
Image srgb_to_linear(const Image& img);
/// Requires a linear-tagged image; returns an sRGB-tagged one.
Image linear_to_srgb(const Image& img);

inline constexpr float kMinRelativeEv = -3.0f;
inline constexpr float kMaxRelativeEv = 3.0f;

// Emulates a relative exposure change: linearize, scale by 2^ev, clip to
// [0,1] and re-encode. ev == 0 returns the input unchanged.
Image apply_relative_ev(const Image& img, float ev);

/// Bilinear resampling with half-pixel centers and clamped edges.
Image resize_bilinear(const Image& img, int new_height, int new_width);

/// Dimensions scaled so the larger side equals max_dim (never upscales).
std::pair<int, int> fit_within(int height, int width, int max_dim);

// Patch statistics used by the training-patch filter.
double mean_intensity(const Image& img);
/// Mean over pixels of the luma gradient magnitude, with gx = L(x+1) - L(x-1)
/// and likewise gy (replicated borders).
double mean_gradient_magnitude(const Image& img);

Image crop(const Image& img, int y0, int x0, int height, int width);
Image flip_horizontal(const Image& img);

/// Reflect padding (mirror without repeating the edge) on the bottom and
/// right sides.
Image pad_reflect(const Image& img, int pad_bottom, int pad_right);

/// Deterministic procedural test scene: smooth illumination, soft-edged
/// shapes and multi-octave texture, roughly well exposed.
Image synthetic_scene(int height, int width, std::uint64_t seed);

}  // namespace pyrexpose

#pragma once

#include <vector>

#include "pyrexpose/image.hpp"

namespace pyrexpose {

// Laplacian pyramid, finest level first: levels[0] is X(1) (highest
// frequency band) and levels[n-1] is X(n), the low-frequency residual.
struct Pyramid {
  std::vector<Image> levels;

  int n() const { return static_cast<int>(levels.size()); }
  int base_height() const { return levels.empty() ? 0 : levels.front().height(); }
  int base_width() const { return levels.empty() ? 0 : levels.front().width(); }
};

// Per-level multipliers S(1)..S(n), applied to X(l) before correction.
struct ScaleVector {
  std::vector<float> s;

  int size() const { return static_cast<int>(s.size()); }
  float operator[](int i) const { return s[static_cast<std::size_t>(i)]; }

  static ScaleVector ones(int n);
  /// [1.8, 1.8, 1.8, 1.12] for n = 4; for other depths every detail level
  /// gets 1.8 and the residual 1.12.
  static ScaleVector defaults(int n);
  void validate() const;
};

/// Binomial [1,4,6,4,1]/16 blur (reflect-101 borders) then 2x decimation.
/// Both dimensions must be even.
Image downsample2x(const Image& img);
/// Zero insertion to double size, then the same kernel scaled by two per
/// axis. Constants are preserved.
Image upsample2x(const Image& img);

/// G(1)=img, G(l+1)=downsample2x(G(l)); returns n levels.
std::vector<Image> gaussian_pyramid(const Image& img, int n);

Pyramid laplacian_decompose(const Image& img, int n);
Image laplacian_collapse(const Pyramid& pyr);
Pyramid scale_levels(const Pyramid& pyr, const ScaleVector& s);

/// True when both dimensions are divisible by 2^(n-1).
bool pyramid_compatible(int height, int width, int n);

}  // namespace pyrexpose

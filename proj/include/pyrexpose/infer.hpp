#pragma once

#include <vector>

#include <Eigen/Core>

#include "pyrexpose/checkpoint.hpp"
#include "pyrexpose/image.hpp"
#include "pyrexpose/model.hpp"
#include "pyrexpose/pyramid.hpp"

namespace pyrexpose {

// Spatial x spatial x luma lattice of affine colour transforms. Each cell
// maps [r, g, b, 1] to RGB.
struct BilateralGrid {
  static constexpr int kDefaultX = 22;
  static constexpr int kDefaultY = 22;
  static constexpr int kDefaultLuma = 8;

  using Affine = Eigen::Matrix<double, 3, 4>;

  int size_x = kDefaultX;
  int size_y = kDefaultY;
  int size_luma = kDefaultLuma;
  std::vector<Affine> cells;  // index (z * size_y + y) * size_x + x

  static BilateralGrid identity(int size_x = kDefaultX, int size_y = kDefaultY, int size_luma = kDefaultLuma);

  Affine& cell(int x, int y, int z) { return cells[(static_cast<std::size_t>(z) * size_y + y) * size_x + x]; }
  const Affine& cell(int x, int y, int z) const {
    return cells[(static_cast<std::size_t>(z) * size_y + y) * size_x + x];
  }
  bool all_finite() const;
};

inline constexpr double kBguLambda = 1e-3;

// Per-cell ridge-regularised weighted least squares. Pixels contribute to
// their eight neighbouring cells with trilinear weights over
// (x, y, luma); the ridge pulls every cell towards the global affine fit,
// which is also what an empty cell ends up with.
BilateralGrid bgu_fit(const Image& low_in, const Image& low_out, double lambda = kBguLambda);
BilateralGrid bgu_fit(const Image& low_in, const Image& low_out, int size_x, int size_y, int size_luma,
                      double lambda = kBguLambda);

/// Slices the grid at every pixel's (x, y, luma), applies the interpolated
/// affine map and clamps to [0,1].
Image bgu_apply(const BilateralGrid& grid, const Image& full_in);

inline constexpr int kDefaultMaxDim = 512;

struct CorrectTimings {
  double network_ms = 0.0;
  double bgu_ms = 0.0;
  double total_ms = 0.0;
  bool used_bgu = false;
};

/// Network path at the image's own resolution: reflect-pad to a multiple of
/// 2^(n-1), decompose, scale, forward, crop and clamp.
Image correct_direct(const Image& img, const Model<float>& model, const ScaleVector& s);

// Images whose larger side exceeds max_dim are corrected at a reduced size
// and the result is transferred to full resolution with a bilateral grid.
Image correct(const Image& img, const Model<float>& model, const ScaleVector& s, int max_dim = kDefaultMaxDim,
              CorrectTimings* timings = nullptr);
Image correct(const Image& img, const Checkpoint& checkpoint, const ScaleVector& s, int max_dim = kDefaultMaxDim,
              CorrectTimings* timings = nullptr);

}  // namespace pyrexpose

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "pyrexpose/error.hpp"
#include "pyrexpose/infer.hpp"

namespace pyrexpose {

namespace {

using Mat4 = Eigen::Matrix4d;
using Mat43 = Eigen::Matrix<double, 4, 3>;

struct Corner {
  int i0, i1;
  double w1;  // weight of i1; i0 gets 1 - w1
};

// Cell-centred linear interpolation coordinate for t in [0,1].
Corner locate(double t, int cells) {
  const double u = std::clamp(t * cells - 0.5, 0.0, static_cast<double>(cells - 1));
  const int i0 = std::min(static_cast<int>(u), cells - 1);
  const int i1 = std::min(i0 + 1, cells - 1);
  return {i0, i1, u - i0};
}

double grid_luma(const Image& img, std::size_t p) {
  const std::size_t n = img.plane_size();
  const double l = kLumaR * img.data()[p] + kLumaG * img.data()[n + p] + kLumaB * img.data()[2 * n + p];
  return std::clamp(l, 0.0, 1.0);
}

template <typename F>
void for_each_neighbour(const BilateralGrid& g, int h, int w, int y, int x, double luma, F&& f) {
  const Corner cx = locate((x + 0.5) / w, g.size_x);
  const Corner cy = locate((y + 0.5) / h, g.size_y);
  const Corner cz = locate(luma, g.size_luma);
  for (int dz = 0; dz < 2; ++dz) {
    const int z = dz ? cz.i1 : cz.i0;
    const double wz = dz ? cz.w1 : 1.0 - cz.w1;
    for (int dy = 0; dy < 2; ++dy) {
      const int yy = dy ? cy.i1 : cy.i0;
      const double wy = dy ? cy.w1 : 1.0 - cy.w1;
      for (int dx = 0; dx < 2; ++dx) {
        const int xx = dx ? cx.i1 : cx.i0;
        const double wx = dx ? cx.w1 : 1.0 - cx.w1;
        const double wt = wx * wy * wz;
        if (wt > 0.0) f(xx, yy, z, wt);
      }
    }
  }
}

}  // namespace

BilateralGrid BilateralGrid::identity(int size_x, int size_y, int size_luma) {
  if (size_x < 1 || size_y < 1 || size_luma < 1) throw InvalidInput("bilateral grid dimensions must be positive");
  BilateralGrid g;
  g.size_x = size_x;
  g.size_y = size_y;
  g.size_luma = size_luma;
  g.cells.assign(static_cast<std::size_t>(size_x) * size_y * size_luma, Affine::Identity());
  return g;
}

bool BilateralGrid::all_finite() const {
  return std::all_of(cells.begin(), cells.end(), [](const Affine& a) { return a.allFinite(); });
}

BilateralGrid bgu_fit(const Image& low_in, const Image& low_out, double lambda) {
  return bgu_fit(low_in, low_out, BilateralGrid::kDefaultX, BilateralGrid::kDefaultY, BilateralGrid::kDefaultLuma,
                 lambda);
}

BilateralGrid bgu_fit(const Image& low_in, const Image& low_out, int size_x, int size_y, int size_luma,
                      double lambda) {
  if (!low_in.same_shape(low_out) || low_in.empty()) {
    throw InvalidInput("bgu_fit: input and output must be non-empty and share dimensions");
  }
  if (!(lambda > 0.0)) throw InvalidInput("bgu_fit: lambda must be positive");
  BilateralGrid grid = BilateralGrid::identity(size_x, size_y, size_luma);
  const int h = low_in.height(), w = low_in.width();
  const std::size_t n = low_in.plane_size();
  const std::size_t cells = grid.cells.size();
  std::vector<Mat4> A(cells, Mat4::Zero());
  std::vector<Mat43> B(cells, Mat43::Zero());
  Mat4 A_all = Mat4::Zero();
  Mat43 B_all = Mat43::Zero();

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      const Eigen::Vector4d a(low_in.data()[p], low_in.data()[n + p], low_in.data()[2 * n + p], 1.0);
      const Eigen::RowVector3d b(low_out.data()[p], low_out.data()[n + p], low_out.data()[2 * n + p]);
      const Mat4 aa = a * a.transpose();
      const Mat43 ab = a * b;
      A_all += aa;
      B_all += ab;
      for_each_neighbour(grid, h, w, y, x, grid_luma(low_in, p), [&](int cx, int cy, int cz, double wt) {
        const std::size_t idx = (static_cast<std::size_t>(cz) * size_y + cy) * size_x + cx;
        A[idx] += wt * aa;
        B[idx] += wt * ab;
      });
    }
  }

  // Global fit, itself pulled towards the identity so constant images stay
  // well posed.
  const Mat43 eye = BilateralGrid::Affine::Identity().transpose();
  const Mat43 global_t = (A_all + lambda * Mat4::Identity()).ldlt().solve(B_all + lambda * eye);
  for (std::size_t i = 0; i < cells; ++i) {
    const Mat43 mt = (A[i] + lambda * Mat4::Identity()).ldlt().solve(B[i] + lambda * global_t);
    grid.cells[i] = mt.transpose();
  }
  return grid;
}

Image bgu_apply(const BilateralGrid& grid, const Image& full_in) {
  if (grid.cells.size() != static_cast<std::size_t>(grid.size_x) * grid.size_y * grid.size_luma) {
    throw InvalidInput("bgu_apply: grid cell count does not match its dimensions");
  }
  const int h = full_in.height(), w = full_in.width();
  const std::size_t n = full_in.plane_size();
  Image out(h, w, full_in.space());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      BilateralGrid::Affine m = BilateralGrid::Affine::Zero();
      for_each_neighbour(grid, h, w, y, x, grid_luma(full_in, p),
                         [&](int cx, int cy, int cz, double wt) { m += wt * grid.cell(cx, cy, cz); });
      const Eigen::Vector4d a(full_in.data()[p], full_in.data()[n + p], full_in.data()[2 * n + p], 1.0);
      const Eigen::Vector3d r = m * a;
      for (int c = 0; c < 3; ++c) {
        out.data()[static_cast<std::size_t>(c) * n + p] = static_cast<float>(std::clamp(r[c], 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace pyrexpose

#include "pyrexpose/pyramid.hpp"

#include <array>
#include <cmath>
#include <string>

#include "pyrexpose/border.hpp"
#include "pyrexpose/error.hpp"

namespace pyrexpose {

namespace {

constexpr std::array<float, 5> kTaps = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};

std::string dims(const Image& img) { return std::to_string(img.height()) + "x" + std::to_string(img.width()); }

// 1-D blur + decimate of `n` samples with stride `stride`; writes n/2.
void down_line(const float* src, int n, std::ptrdiff_t stride, float* dst, std::ptrdiff_t dst_stride) {
  for (int i = 0; i < n / 2; ++i) {
    float acc = 0.0f;
    for (int k = 0; k < 5; ++k) acc += kTaps[k] * src[reflect101(2 * i + k - 2, n) * stride];
    dst[i * dst_stride] = acc;
  }
}

// 1-D zero insertion + doubled kernel of `n` samples; writes 2n.
void up_line(const float* src, int n, std::ptrdiff_t stride, float* dst, std::ptrdiff_t dst_stride) {
  const int m = 2 * n;
  for (int j = 0; j < m; ++j) {
    float acc = 0.0f;
    for (int k = 0; k < 5; ++k) {
      const int z = reflect101(j + k - 2, m);
      if (z % 2 == 0) acc += 2.0f * kTaps[k] * src[(z / 2) * stride];
    }
    dst[j * dst_stride] = acc;
  }
}

}  // namespace

ScaleVector ScaleVector::ones(int n) { return {std::vector<float>(static_cast<std::size_t>(n), 1.0f)}; }

ScaleVector ScaleVector::defaults(int n) {
  ScaleVector v{std::vector<float>(static_cast<std::size_t>(n), 1.8f)};
  if (n > 0) v.s.back() = 1.12f;
  return v;
}

void ScaleVector::validate() const {
  for (float v : s)
    if (!std::isfinite(v) || v <= 0.0f) throw InvalidInput("scale vector entries must be finite and > 0");
}

bool pyramid_compatible(int height, int width, int n) {
  if (n < 1) return false;
  const int m = 1 << (n - 1);
  return height > 0 && width > 0 && height % m == 0 && width % m == 0;
}

Image downsample2x(const Image& img) {
  if (img.height() % 2 != 0 || img.width() % 2 != 0 || img.empty()) {
    throw InvalidInput("downsample2x: dimensions " + dims(img) + " must be even and non-zero");
  }
  const int h = img.height(), w = img.width(), hh = h / 2, hw = w / 2;
  Image out(hh, hw, img.space());
  std::vector<float> rows(static_cast<std::size_t>(h) * hw);
  for (int c = 0; c < Image::kChannels; ++c) {
    const float* src = img.plane(c).data();
    for (int y = 0; y < h; ++y) down_line(src + static_cast<std::ptrdiff_t>(y) * w, w, 1, &rows[static_cast<std::size_t>(y) * hw], 1);
    float* dst = out.plane(c).data();
    for (int x = 0; x < hw; ++x) down_line(rows.data() + x, h, hw, dst + x, hw);
  }
  return out;
}

Image upsample2x(const Image& img) {
  if (img.empty()) throw InvalidInput("upsample2x: empty image");
  const int h = img.height(), w = img.width(), dh = 2 * h, dw = 2 * w;
  Image out(dh, dw, img.space());
  std::vector<float> rows(static_cast<std::size_t>(h) * dw);
  for (int c = 0; c < Image::kChannels; ++c) {
    const float* src = img.plane(c).data();
    for (int y = 0; y < h; ++y) up_line(src + static_cast<std::ptrdiff_t>(y) * w, w, 1, &rows[static_cast<std::size_t>(y) * dw], 1);
    float* dst = out.plane(c).data();
    for (int x = 0; x < dw; ++x) up_line(rows.data() + x, h, dw, dst + x, dw);
  }
  return out;
}

std::vector<Image> gaussian_pyramid(const Image& img, int n) {
  if (!pyramid_compatible(img.height(), img.width(), n)) {
    throw InvalidInput("gaussian_pyramid: dimensions " + dims(img) + " not divisible by 2^" + std::to_string(n - 1));
  }
  std::vector<Image> g;
  g.reserve(static_cast<std::size_t>(n));
  g.push_back(img);
  for (int l = 1; l < n; ++l) g.push_back(downsample2x(g.back()));
  return g;
}

Pyramid laplacian_decompose(const Image& img, int n) {
  if (n < 1) throw InvalidInput("laplacian_decompose: level count must be >= 1");
  std::vector<Image> g = gaussian_pyramid(img, n);
  Pyramid pyr;
  pyr.levels.reserve(g.size());
  for (int l = 0; l + 1 < n; ++l) pyr.levels.push_back(g[l] - upsample2x(g[l + 1]));
  pyr.levels.push_back(std::move(g.back()));
  return pyr;
}

Image laplacian_collapse(const Pyramid& pyr) {
  if (pyr.levels.empty()) throw InvalidInput("laplacian_collapse: empty pyramid");
  Image r = pyr.levels.back();
  for (int l = pyr.n() - 2; l >= 0; --l) {
    const Image& band = pyr.levels[l];
    if (band.height() != 2 * r.height() || band.width() != 2 * r.width()) {
      throw InvalidInput("laplacian_collapse: level " + std::to_string(l + 1) + " is " + dims(band) +
                         ", expected twice " + dims(r));
    }
    r = upsample2x(r) + band;
  }
  return r;
}

Pyramid scale_levels(const Pyramid& pyr, const ScaleVector& s) {
  if (s.size() != pyr.n()) {
    throw InvalidInput("scale_levels: " + std::to_string(s.size()) + " scales for " + std::to_string(pyr.n()) +
                       " levels");
  }
  Pyramid out;
  out.levels.reserve(pyr.levels.size());
  for (int l = 0; l < pyr.n(); ++l) out.levels.push_back(pyr.levels[l] * s[l]);
  return out;
}

}  // namespace pyrexpose

#include "pyrexpose/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "pyrexpose/border.hpp"
#include "pyrexpose/error.hpp"

namespace pyrexpose {

float srgb_to_linear(float v) {
  const double x = v;
  return static_cast<float>(x <= 0.04045 ? x / 12.92 : std::pow((x + 0.055) / 1.055, 2.4));
}

float linear_to_srgb(float v) {
  const double x = v;
  return static_cast<float>(x <= 0.0031308 ? 12.92 * x : 1.055 * std::pow(x, 1.0 / 2.4) - 0.055);
}

Image srgb_to_linear(const Image& img) {
  if (img.space() != ColorSpace::kSrgb) throw InvalidInput("srgb_to_linear: image is not tagged sRGB");
  Image out = img;
  for (float& v : out.data()) v = srgb_to_linear(v);
  out.set_space(ColorSpace::kLinear);
  return out;
}

Image linear_to_srgb(const Image& img) {
  if (img.space() != ColorSpace::kLinear) throw InvalidInput("linear_to_srgb: image is not tagged linear");
  Image out = img;
  for (float& v : out.data()) v = linear_to_srgb(v);
  out.set_space(ColorSpace::kSrgb);
  return out;
}

Image apply_relative_ev(const Image& img, float ev) {
  if (img.space() != ColorSpace::kSrgb) throw InvalidInput("apply_relative_ev: image is not tagged sRGB");
  if (!(ev >= kMinRelativeEv && ev <= kMaxRelativeEv)) {
    throw InvalidInput("apply_relative_ev: ev " + std::to_string(ev) + " outside [-3, 3]");
  }
  if (ev == 0.0f) return img;
  const double gain = std::exp2(static_cast<double>(ev));
  Image out = img;
  for (float& v : out.data()) {
    const double lin = std::clamp(static_cast<double>(srgb_to_linear(v)) * gain, 0.0, 1.0);
    v = linear_to_srgb(static_cast<float>(lin));
  }
  return out;
}

Image resize_bilinear(const Image& img, int new_height, int new_width) {
  if (new_height < 1 || new_width < 1) {
    throw InvalidInput("resize_bilinear: target " + std::to_string(new_height) + "x" + std::to_string(new_width) +
                       " has a zero dimension");
  }
  if (img.empty()) throw InvalidInput("resize_bilinear: empty source image");
  const int h = img.height(), w = img.width();
  const double sy = static_cast<double>(h) / new_height;
  const double sx = static_cast<double>(w) / new_width;

  struct Tap {
    int i0, i1;
    float f;
  };
  auto taps = [](int n_out, int n_in, double scale) {
    std::vector<Tap> t(n_out);
    for (int o = 0; o < n_out; ++o) {
      double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_in - 1));
      int i0 = static_cast<int>(std::floor(src));
      int i1 = std::min(i0 + 1, n_in - 1);
      t[o] = {i0, i1, static_cast<float>(src - i0)};
    }
    return t;
  };
  const auto ty = taps(new_height, h, sy);
  const auto tx = taps(new_width, w, sx);

  Image out(new_height, new_width, img.space());
  for (int c = 0; c < Image::kChannels; ++c) {
    for (int y = 0; y < new_height; ++y) {
      const Tap& a = ty[y];
      for (int x = 0; x < new_width; ++x) {
        const Tap& b = tx[x];
        const float top = img.at(c, a.i0, b.i0) * (1.0f - b.f) + img.at(c, a.i0, b.i1) * b.f;
        const float bot = img.at(c, a.i1, b.i0) * (1.0f - b.f) + img.at(c, a.i1, b.i1) * b.f;
        out.at(c, y, x) = top * (1.0f - a.f) + bot * a.f;
      }
    }
  }
  return out;
}

std::pair<int, int> fit_within(int height, int width, int max_dim) {
  if (max_dim < 1) throw InvalidInput("fit_within: max_dim must be positive");
  const int longest = std::max(height, width);
  if (longest <= max_dim) return {height, width};
  const double s = static_cast<double>(max_dim) / longest;
  return {std::max(1, static_cast<int>(std::lround(height * s))), std::max(1, static_cast<int>(std::lround(width * s)))};
}

double mean_intensity(const Image& img) {
  if (img.empty()) return 0.0;
  double s = 0.0;
  for (float v : img.data()) s += v;
  return s / static_cast<double>(img.size());
}

double mean_gradient_magnitude(const Image& img) {
  if (img.empty()) return 0.0;
  const int h = img.height(), w = img.width();
  const std::vector<float> y = img.luma();
  auto at = [&](int r, int c) { return static_cast<double>(y[static_cast<std::size_t>(clamp_index(r, h)) * w + clamp_index(c, w)]); };
  double s = 0.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double gx = at(r, c + 1) - at(r, c - 1);
      const double gy = at(r + 1, c) - at(r - 1, c);
      s += std::sqrt(gx * gx + gy * gy);
    }
  }
  return s / (static_cast<double>(h) * w);
}

Image crop(const Image& img, int y0, int x0, int height, int width) {
  if (y0 < 0 || x0 < 0 || height < 0 || width < 0 || y0 + height > img.height() || x0 + width > img.width()) {
    throw InvalidInput("crop: window exceeds image bounds");
  }
  Image out(height, width, img.space());
  for (int c = 0; c < Image::kChannels; ++c)
    for (int y = 0; y < height; ++y)
      std::copy_n(&img.plane(c)[static_cast<std::size_t>(y0 + y) * img.width() + x0], width,
                  &out.plane(c)[static_cast<std::size_t>(y) * width]);
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out(img.height(), img.width(), img.space());
  const int w = img.width();
  for (int c = 0; c < Image::kChannels; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y, w - 1 - x);
  return out;
}

Image pad_reflect(const Image& img, int pad_bottom, int pad_right) {
  if (pad_bottom < 0 || pad_right < 0) throw InvalidInput("pad_reflect: negative padding");
  const int h = img.height(), w = img.width();
  Image out(h + pad_bottom, w + pad_right, img.space());
  for (int c = 0; c < Image::kChannels; ++c)
    for (int y = 0; y < out.height(); ++y)
      for (int x = 0; x < out.width(); ++x) out.at(c, y, x) = img.at(c, reflect101(y, h), reflect101(x, w));
  return out;
}

namespace {

// Smooth value noise in [-1, 1] with the given cell size.
std::vector<float> value_noise(int h, int w, int cell, std::mt19937_64& rng) {
  const int gh = h / cell + 2, gw = w / cell + 2;
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> grid(static_cast<std::size_t>(gh) * gw);
  for (float& g : grid) g = u(rng);
  auto smooth = [](float t) { return t * t * (3.0f - 2.0f * t); };
  std::vector<float> out(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    const float fy = static_cast<float>(y) / cell;
    const int iy = static_cast<int>(fy);
    const float ty = smooth(fy - iy);
    for (int x = 0; x < w; ++x) {
      const float fx = static_cast<float>(x) / cell;
      const int ix = static_cast<int>(fx);
      const float tx = smooth(fx - ix);
      const float a = grid[iy * gw + ix], b = grid[iy * gw + ix + 1];
      const float c = grid[(iy + 1) * gw + ix], d = grid[(iy + 1) * gw + ix + 1];
      out[static_cast<std::size_t>(y) * w + x] = (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
    }
  }
  return out;
}

}  // namespace

Image synthetic_scene(int height, int width, std::uint64_t seed) {
  if (height < 1 || width < 1) throw InvalidInput("synthetic_scene: dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u01(0.0f, 1.0f);
  const std::size_t n = static_cast<std::size_t>(height) * width;
  const int longest = std::max(height, width);

  // Low-frequency illumination and color cast.
  Image img(height, width);
  const int coarse = std::max(2, longest / 2);
  for (int c = 0; c < 3; ++c) {
    const float base = 0.3f + 0.4f * u01(rng);
    const auto field = value_noise(height, width, coarse, rng);
    auto p = img.plane(c);
    for (std::size_t i = 0; i < n; ++i) p[i] = base + 0.2f * field[i];
  }

  // Soft-edged shapes.
  const int shapes = 4 + static_cast<int>(u01(rng) * 5);
  for (int s = 0; s < shapes; ++s) {
    const float cy = u01(rng) * height, cx = u01(rng) * width;
    const float ry = (0.08f + 0.3f * u01(rng)) * height, rx = (0.08f + 0.3f * u01(rng)) * width;
    const bool ellipse = u01(rng) < 0.5f;
    float color[3];
    for (float& v : color) v = 0.1f + 0.8f * u01(rng);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const float dy = (y + 0.5f - cy) / ry, dx = (x + 0.5f - cx) / rx;
        // Signed distance in units of the shorter radius, negative inside.
        float d = ellipse ? (std::sqrt(dx * dx + dy * dy) - 1.0f) : (std::max(std::abs(dx), std::abs(dy)) - 1.0f);
        d *= std::min(rx, ry);
        const float alpha = std::clamp(0.5f - d, 0.0f, 1.0f);
        if (alpha <= 0.0f) continue;
        for (int c = 0; c < 3; ++c) img.at(c, y, x) = img.at(c, y, x) * (1 - alpha) + color[c] * alpha;
      }
    }
  }

  // Multi-octave texture, mostly achromatic.
  std::vector<float> texture(n, 0.0f);
  for (int cell = std::max(2, longest / 8); cell >= 2; cell /= 2) {
    const auto octave = value_noise(height, width, cell, rng);
    const float amp = 0.11f * std::pow(static_cast<float>(cell) / 2.0f, 0.3f);
    for (std::size_t i = 0; i < n; ++i) texture[i] += amp * octave[i];
  }
  float tint[3];
  for (float& t : tint) t = 0.8f + 0.4f * u01(rng);
  for (int c = 0; c < 3; ++c) {
    auto p = img.plane(c);
    for (std::size_t i = 0; i < n; ++i) p[i] = std::clamp(p[i] + tint[c] * texture[i], 0.0f, 1.0f);
  }
  return img;
}

}  // namespace pyrexpose

#include "pyrexpose/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pyrexpose/error.hpp"

namespace pyrexpose {

Image::Image(int height, int width, ColorSpace space, float fill) : height_(height), width_(width), space_(space) {
  if (height < 0 || width < 0) throw InvalidInput("image dimensions must be non-negative");
  data_.assign(static_cast<std::size_t>(height) * width * kChannels, fill);
}

Image::Image(int height, int width, std::vector<float> data, ColorSpace space)
    : height_(height), width_(width), space_(space), data_(std::move(data)) {
  if (height < 0 || width < 0) throw InvalidInput("image dimensions must be non-negative");
  if (data_.size() != static_cast<std::size_t>(height) * width * kChannels) {
    throw InvalidInput("image data length " + std::to_string(data_.size()) + " does not match " +
                       std::to_string(height) + "x" + std::to_string(width) + "x3");
  }
}

std::vector<float> Image::luma() const {
  std::vector<float> y(plane_size());
  auto r = plane(0), g = plane(1), b = plane(2);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
  return y;
}

Image Image::clamped() const {
  Image out = *this;
  for (float& v : out.data_) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

bool Image::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

float max_abs_diff(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw InvalidInput("max_abs_diff: shape mismatch");
  float m = 0.0f;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

namespace {
void require_same(const Image& a, const Image& b) {
  if (!a.same_shape(b)) {
    throw InvalidInput("image shape mismatch: " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                       " vs " + std::to_string(b.height()) + "x" + std::to_string(b.width()));
  }
}
}  // namespace

Image operator+(const Image& a, const Image& b) {
  require_same(a, b);
  Image out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

Image operator-(const Image& a, const Image& b) {
  require_same(a, b);
  Image out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

Image operator*(const Image& a, float s) {
  Image out = a;
  for (float& v : out.data()) v *= s;
  return out;
}

}  // namespace pyrexpose

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pyrexpose {

enum class ColorSpace { kSrgb, kLinear };

// Planar float image: three channel planes, each row-major.
// Values are nominally in [0,1]; intermediate results (pyramid detail
// levels, unclamped network outputs) may leave that range.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int height, int width, ColorSpace space = ColorSpace::kSrgb, float fill = 0.0f);
  Image(int height, int width, std::vector<float> data, ColorSpace space = ColorSpace::kSrgb);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return kChannels; }
  ColorSpace space() const { return space_; }
  void set_space(ColorSpace space) { space_ = space; }

  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int c, int y, int x) { return data_[c * plane_size() + static_cast<std::size_t>(y) * width_ + x]; }
  float at(int c, int y, int x) const {
    return data_[c * plane_size() + static_cast<std::size_t>(y) * width_ + x];
  }

  std::span<float> plane(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const float> plane(int c) const { return {data_.data() + c * plane_size(), plane_size()}; }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_shape(const Image& other) const { return height_ == other.height_ && width_ == other.width_; }

  /// Rec.709 luma plane.
  std::vector<float> luma() const;

  Image clamped() const;
  bool all_finite() const;

 private:
  int height_ = 0;
  int width_ = 0;
  ColorSpace space_ = ColorSpace::kSrgb;
  std::vector<float> data_;
};

inline constexpr float kLumaR = 0.2126f;
inline constexpr float kLumaG = 0.7152f;
inline constexpr float kLumaB = 0.0722f;

float max_abs_diff(const Image& a, const Image& b);

// Elementwise helpers; shapes must match.
Image operator+(const Image& a, const Image& b);
Image operator-(const Image& a, const Image& b);
Image operator*(const Image& a, float s);

}  // namespace pyrexpose

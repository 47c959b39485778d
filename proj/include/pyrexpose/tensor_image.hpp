#pragma once

#include <span>
#include <vector>

#include "pyrexpose/autodiff/tensor.hpp"
#include "pyrexpose/error.hpp"
#include "pyrexpose/image.hpp"
#include "pyrexpose/pyramid.hpp"

namespace pyrexpose {

/// Stacks equally sized images into an (N,3,H,W) tensor.
template <typename T>
ad::Tensor<T> to_tensor(std::span<const Image> images) {
  if (images.empty()) throw InvalidInput("to_tensor: empty batch");
  const Image& first = images.front();
  ad::Tensor<T> t(ad::Shape{static_cast<int>(images.size()), 3, first.height(), first.width()});
  std::size_t off = 0;
  for (const Image& img : images) {
    if (!img.same_shape(first)) throw InvalidInput("to_tensor: batch images differ in size");
    for (float v : img.data()) t.values()[off++] = static_cast<T>(v);
  }
  return t;
}

template <typename T>
ad::Tensor<T> to_tensor(const Image& img) {
  return to_tensor<T>(std::span<const Image>(&img, 1));
}

template <typename T>
Image to_image(const ad::Tensor<T>& t, int index = 0, ColorSpace space = ColorSpace::kSrgb) {
  const ad::Shape s = t.shape();
  if (s.c != 3 || index < 0 || index >= s.n) throw InvalidInput("to_image: tensor " + s.str() + " is not an RGB batch");
  std::vector<float> data(static_cast<std::size_t>(3) * s.plane());
  const T* src = t.data() + static_cast<std::size_t>(index) * data.size();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(src[i]);
  return Image(s.h, s.w, std::move(data), space);
}

/// Level l of every pyramid in the batch becomes one tensor (finest first).
template <typename T>
std::vector<ad::Tensor<T>> pyramid_tensors(std::span<const Pyramid> batch) {
  if (batch.empty()) throw InvalidInput("pyramid_tensors: empty batch");
  std::vector<ad::Tensor<T>> out;
  for (int l = 0; l < batch.front().n(); ++l) {
    std::vector<Image> level;
    level.reserve(batch.size());
    for (const Pyramid& p : batch) level.push_back(p.levels.at(static_cast<std::size_t>(l)));
    out.push_back(to_tensor<T>(std::span<const Image>(level)));
  }
  return out;
}

}  // namespace pyrexpose

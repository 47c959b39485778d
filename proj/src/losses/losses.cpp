#include "pyrexpose/losses.hpp"

#include <cmath>

#include "pyrexpose/autodiff/ops.hpp"
#include "pyrexpose/error.hpp"
#include "pyrexpose/pyramid.hpp"

namespace pyrexpose {

using ad::Graph;
using ad::Tensor;

template <typename T>
Tensor<T> reconstruction_loss(Graph<T>& g, const Tensor<T>& y, const Tensor<T>& target) {
  if (!(y.shape() == target.shape())) {
    throw InvalidInput("reconstruction_loss: output " + y.shape().str() + " vs target " + target.shape().str());
  }
  return ad::scale(g, ad::l1_distance(g, y, target), T(1) / static_cast<T>(y.shape().n));
}

double pyramid_level_weight(int level) {
  if (level < 2) throw InvalidInput("pyramid_level_weight: levels start at 2");
  return std::ldexp(1.0, level - 2);
}

std::vector<Image> pyramid_loss_targets(const Image& target, int levels) {
  const std::vector<Image> g = gaussian_pyramid(target, levels);
  std::vector<Image> out;
  for (int l = 2; l <= levels; ++l) out.push_back(upsample2x(g[static_cast<std::size_t>(l - 1)]));
  return out;
}

template <typename T>
Tensor<T> pyramid_loss(Graph<T>& g, const std::vector<Tensor<T>>& y_levels, const std::vector<Tensor<T>>& targets) {
  if (y_levels.size() != targets.size()) {
    throw InvalidInput("pyramid_loss: " + std::to_string(y_levels.size()) + " outputs for " +
                       std::to_string(targets.size()) + " targets");
  }
  if (y_levels.empty()) return Tensor<T>::scalar(T(0));
  Tensor<T> total;
  for (std::size_t i = 0; i < y_levels.size(); ++i) {
    if (!(y_levels[i].shape() == targets[i].shape())) {
      throw InvalidInput("pyramid_loss: level " + std::to_string(i + 2) + " output " + y_levels[i].shape().str() +
                         " vs target " + targets[i].shape().str());
    }
    const T w = static_cast<T>(pyramid_level_weight(static_cast<int>(i) + 2));
    Tensor<T> term = ad::scale(g, ad::l1_distance(g, y_levels[i], targets[i]), w);
    total = total.defined() ? ad::add(g, total, term) : term;
  }
  return ad::scale(g, total, T(1) / static_cast<T>(y_levels.front().shape().n));
}

template <typename T>
Tensor<T> adversarial_generator_loss(Graph<T>& g, const Tensor<T>& logits, int height, int width, int levels,
                                     double multiplier) {
  const double factor = -3.0 * height * width * levels * multiplier;
  return ad::scale(g, ad::mean(g, ad::log_sigmoid(g, logits)), static_cast<T>(factor));
}

template <typename T>
Tensor<T> discriminator_loss(Graph<T>& g, const Tensor<T>& logits_target, const Tensor<T>& logits_output) {
  if (!(logits_target.shape() == logits_output.shape())) throw InvalidInput("discriminator_loss: logit shapes differ");
  // -log(1 - sigmoid(z)) = -log(sigmoid(-z))
  Tensor<T> real = ad::log_sigmoid(g, logits_target);
  Tensor<T> fake = ad::log_sigmoid(g, ad::scale(g, logits_output, T(-1)));
  return ad::scale(g, ad::mean(g, ad::add(g, real, fake)), T(-1));
}

template <typename T>
Tensor<T> discriminator_input(Graph<T>& g, const Tensor<T>& images, int size) {
  const auto s = images.shape();
  if (s.h == size && s.w == size) return images;
  return ad::resize_bilinear(g, images, size, size);
}

template <typename T>
Tensor<T> adversarial_generator_loss(Graph<T>& g, const Tensor<T>& y, const Discriminator<T>& d, int levels,
                                     double multiplier) {
  const Tensor<T> logits = d.forward(g, discriminator_input(g, y, d.config().input_size));
  return adversarial_generator_loss(g, logits, y.shape().h, y.shape().w, levels, multiplier);
}

template <typename T>
Tensor<T> discriminator_loss(Graph<T>& g, const Tensor<T>& target, const Tensor<T>& y, const Discriminator<T>& d) {
  const int size = d.config().input_size;
  return discriminator_loss(g, d.forward(g, discriminator_input(g, target, size)),
                            d.forward(g, discriminator_input(g, y, size)));
}

#define PYREXPOSE_INSTANTIATE_LOSSES(T)                                                                           \
  template Tensor<T> reconstruction_loss(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> pyramid_loss(Graph<T>&, const std::vector<Tensor<T>>&, const std::vector<Tensor<T>>&);     \
  template Tensor<T> adversarial_generator_loss(Graph<T>&, const Tensor<T>&, int, int, int, double);             \
  template Tensor<T> discriminator_loss(Graph<T>&, const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> discriminator_input(Graph<T>&, const Tensor<T>&, int);                                      \
  template Tensor<T> adversarial_generator_loss(Graph<T>&, const Tensor<T>&, const Discriminator<T>&, int, double); \
  template Tensor<T> discriminator_loss(Graph<T>&, const Tensor<T>&, const Tensor<T>&, const Discriminator<T>&);

PYREXPOSE_INSTANTIATE_LOSSES(float)
PYREXPOSE_INSTANTIATE_LOSSES(double)

}  // namespace pyrexpose

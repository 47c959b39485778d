#pragma once

#include <vector>

#include "json.hpp"
#include "pyrexpose/autodiff/tensor.hpp"
#include "pyrexpose/image.hpp"
#include "pyrexpose/model.hpp"

namespace pyrexpose {

struct LossBreakdown {
  double l_rec = 0.0;
  double l_pyr = 0.0;
  double l_adv = 0.0;
  /// Generator objective l_rec + l_pyr + l_adv.
  double total = 0.0;
  /// Discriminator objective of a DISC step.
  double l_disc = 0.0;

  nlohmann::json to_json() const {
    return {{"l_rec", l_rec}, {"l_pyr", l_pyr}, {"l_adv", l_adv}, {"total", total}, {"l_disc", l_disc}};
  }
};

// All losses are per-sample sums averaged over the batch.

/// Sum over pixels and channels of |Y - T|.
template <typename T>
ad::Tensor<T> reconstruction_loss(ad::Graph<T>& g, const ad::Tensor<T>& y, const ad::Tensor<T>& target);

/// Weight 2^(l-2) for pyramid level l (l >= 2).
double pyramid_level_weight(int level);

/// T(l) = upsample2x(G(l)) of the reference, for l = 2..n (index l - 2).
std::vector<Image> pyramid_loss_targets(const Image& target, int levels);

// sum_{l=2..n} 2^(l-2) * sum_p |Y(l)(p) - T(l)(p)|. y_levels[i] and
// targets[i] both correspond to level i + 2.
template <typename T>
ad::Tensor<T> pyramid_loss(ad::Graph<T>& g, const std::vector<ad::Tensor<T>>& y_levels,
                           const std::vector<ad::Tensor<T>>& targets);

/// -3*h*w*n * multiplier * log(sigmoid(D(Y))) from discriminator logits.
template <typename T>
ad::Tensor<T> adversarial_generator_loss(ad::Graph<T>& g, const ad::Tensor<T>& logits, int height, int width,
                                         int levels, double multiplier = 1.0);

/// -log(sigmoid(D(T))) - log(1 - sigmoid(D(Y))) from logits.
template <typename T>
ad::Tensor<T> discriminator_loss(ad::Graph<T>& g, const ad::Tensor<T>& logits_target,
                                 const ad::Tensor<T>& logits_output);

/// Resizes a batch to the discriminator's square input size.
template <typename T>
ad::Tensor<T> discriminator_input(ad::Graph<T>& g, const ad::Tensor<T>& images, int size);

// Convenience forms that run the discriminator on resized images.
template <typename T>
ad::Tensor<T> adversarial_generator_loss(ad::Graph<T>& g, const ad::Tensor<T>& y, const Discriminator<T>& d,
                                         int levels, double multiplier = 1.0);
template <typename T>
ad::Tensor<T> discriminator_loss(ad::Graph<T>& g, const ad::Tensor<T>& target, const ad::Tensor<T>& y,
                                 const Discriminator<T>& d);

}  // namespace pyrexpose

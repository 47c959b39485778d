#pragma once

#include "pyrexpose/autodiff/tensor.hpp"

namespace pyrexpose::ad {

// Cross-correlation. x: (N,Ci,H,W), w: (Co,Ci,k,k), b: Co elements.
// Output spatial size floor((H + 2p - k) / stride) + 1; zero padding.
template <typename T>
Tensor<T> conv2d(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride = 1, int padding = 0);

// Adjoint of a strided convolution without padding. x: (N,Ci,H,W),
// w: (Ci,Co,k,k). Output spatial size (H-1)*stride + k.
template <typename T>
Tensor<T> conv_transpose2d(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride);

template <typename T>
Tensor<T> leaky_relu(Graph<T>& g, const Tensor<T>& x, T slope);
template <typename T>
Tensor<T> sigmoid(Graph<T>& g, const Tensor<T>& x);
/// log(sigmoid(x)) evaluated as min(x,0) - log1p(exp(-|x|)).
template <typename T>
Tensor<T> log_sigmoid(Graph<T>& g, const Tensor<T>& x);

template <typename T>
Tensor<T> add(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& y);
template <typename T>
Tensor<T> sub(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& y);
template <typename T>
Tensor<T> mul(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& y);
template <typename T>
Tensor<T> scale(Graph<T>& g, const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> concat_channels(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& y);

/// 2x2 max pooling, stride 2; H and W must be even. Ties go to the first
/// element in row-major window order.
template <typename T>
Tensor<T> maxpool2x(Graph<T>& g, const Tensor<T>& x);

/// Replicates the last row/column to pad the bottom/right edges.
template <typename T>
Tensor<T> pad_replicate(Graph<T>& g, const Tensor<T>& x, int bottom, int right);
/// Keeps the top-left h x w window.
template <typename T>
Tensor<T> crop(Graph<T>& g, const Tensor<T>& x, int h, int w);

/// Half-pixel-centered bilinear resampling with clamped edges.
template <typename T>
Tensor<T> resize_bilinear(Graph<T>& g, const Tensor<T>& x, int h, int w);

/// (N,C,H,W) -> (N,C,1,1).
template <typename T>
Tensor<T> global_avg_pool(Graph<T>& g, const Tensor<T>& x);

/// Scalar sum of all elements (accumulated in double).
template <typename T>
Tensor<T> sum(Graph<T>& g, const Tensor<T>& x);
template <typename T>
Tensor<T> mean(Graph<T>& g, const Tensor<T>& x);

/// Scalar sum over all elements of |x - y| (accumulated in double).
template <typename T>
Tensor<T> l1_distance(Graph<T>& g, const Tensor<T>& x, const Tensor<T>& y);

}  // namespace pyrexpose::ad

#pragma once

#include <algorithm>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pyrexpose/autodiff/ops.hpp"
#include "support/testing.hpp"

namespace pyrexpose::testing {

struct OpCase {
  std::string name;
  std::vector<ad::Tensor<double>> inputs;
  std::function<ad::Tensor<double>(ad::Graph<double>&)> loss;
};

// Scalar probe of a non-scalar result: sum(y * r) with fixed random r.
inline ad::Tensor<double> project(ad::Graph<double>& g, const ad::Tensor<double>& y, std::uint64_t seed) {
  const auto r = random_tensor(y.shape(), seed ^ 0xabcdef, -1.0, 1.0, false);
  return ad::sum(g, ad::mul(g, y, r));
}

// Moves entries away from zero so finite differences never straddle a kink.
inline void avoid_zero(ad::Tensor<double>& t, double margin = 0.05) {
  for (double& v : t.values())
    if (std::abs(v) < margin) v = v < 0 ? v - margin : v + margin;
}

// One finite-difference case per differentiable op, drawn from `seed`.
inline std::vector<OpCase> op_gradient_cases(std::uint64_t seed) {
  using TD = ad::Tensor<double>;
  using G = ad::Graph<double>;
  const std::uint64_t s = seed * 101;
  std::vector<OpCase> cases;
  {
    TD x = random_tensor({2, 3, 5, 6}, s + 1), w = random_tensor({4, 3, 3, 3}, s + 2),
       b = random_tensor({1, 1, 1, 4}, s + 3);
    cases.push_back({"conv2d", {x, w, b}, [=](G& g) { return project(g, ad::conv2d(g, x, w, b, 1, 1), s); }});
    cases.push_back({"conv2d/stride2", {x, w, b}, [=](G& g) { return project(g, ad::conv2d(g, x, w, b, 2, 1), s); }});
    TD w1 = random_tensor({2, 3, 1, 1}, s + 4), b1 = random_tensor({1, 1, 1, 2}, s + 5);
    cases.push_back({"conv2d/1x1", {x, w1, b1}, [=](G& g) { return project(g, ad::conv2d(g, x, w1, b1), s); }});
  }
  {
    TD x = random_tensor({2, 3, 3, 2}, s + 6), w = random_tensor({3, 2, 2, 2}, s + 7),
       b = random_tensor({1, 1, 1, 2}, s + 8);
    cases.push_back({"conv_transpose2d", {x, w, b}, [=](G& g) { return project(g, ad::conv_transpose2d(g, x, w, b, 2), s); }});
  }
  {
    TD x = random_tensor({1, 2, 4, 4}, s + 9, -3, 3);
    avoid_zero(x);
    cases.push_back({"leaky_relu", {x}, [=](G& g) { return project(g, ad::leaky_relu(g, x, 0.2), s); }});
    cases.push_back({"sigmoid", {x}, [=](G& g) { return project(g, ad::sigmoid(g, x), s); }});
    cases.push_back({"log_sigmoid", {x}, [=](G& g) { return project(g, ad::log_sigmoid(g, x), s); }});
    cases.push_back({"scale", {x}, [=](G& g) { return project(g, ad::scale(g, x, -1.7), s); }});
    cases.push_back({"mean", {x}, [=](G& g) { return ad::mean(g, ad::mul(g, x, x)); }});
  }
  {
    TD x = random_tensor({2, 2, 3, 3}, s + 10), y = random_tensor({2, 2, 3, 3}, s + 11);
    cases.push_back({"add", {x, y}, [=](G& g) { return project(g, ad::add(g, x, y), s); }});
    cases.push_back({"sub", {x, y}, [=](G& g) { return project(g, ad::sub(g, x, y), s); }});
    cases.push_back({"mul", {x, y}, [=](G& g) { return project(g, ad::mul(g, x, y), s); }});
    TD z = random_tensor({2, 1, 3, 3}, s + 12);
    cases.push_back({"concat_channels", {x, z}, [=](G& g) { return project(g, ad::concat_channels(g, x, z), s); }});
    // Keep |x - y| away from zero for the L1 kink.
    TD d = random_tensor({2, 2, 3, 3}, s + 13);
    avoid_zero(d);
    TD y2(x.shape(), std::vector<double>(x.numel()), true);
    for (std::size_t i = 0; i < x.numel(); ++i) y2.values()[i] = x.values()[i] + d.values()[i];
    cases.push_back({"l1_distance", {x, y2}, [=](G& g) { return ad::l1_distance(g, x, y2); }});
  }
  {
    // Distinct values keep the argmax stable under perturbation.
    TD x(ad::Shape{1, 2, 4, 6}, 0.0, true);
    std::vector<double> vals(x.numel());
    for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = 0.1 * static_cast<double>(i);
    std::mt19937_64 rng(s + 14);
    std::shuffle(vals.begin(), vals.end(), rng);
    std::copy(vals.begin(), vals.end(), x.values().begin());
    cases.push_back({"maxpool2x", {x}, [=](G& g) { return project(g, ad::maxpool2x(g, x), s); }});
  }
  {
    TD x = random_tensor({1, 2, 3, 5}, s + 15);
    cases.push_back({"pad_replicate", {x}, [=](G& g) { return project(g, ad::pad_replicate(g, x, 1, 3), s); }});
    cases.push_back({"crop", {x}, [=](G& g) { return project(g, ad::crop(g, x, 2, 4), s); }});
    cases.push_back({"resize_bilinear", {x}, [=](G& g) { return project(g, ad::resize_bilinear(g, x, 7, 4), s); }});
    cases.push_back({"global_avg_pool", {x}, [=](G& g) { return project(g, ad::global_avg_pool(g, x), s); }});
    cases.push_back({"sum", {x}, [=](G& g) { return ad::sum(g, x); }});
  }
  return cases;
}

}  // namespace pyrexpose::testing

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "pyrexpose/autodiff/parameters.hpp"
#include "pyrexpose/autodiff/tensor.hpp"
#include "pyrexpose/image.hpp"

namespace pyrexpose::testing {

inline Image random_image(int h, int w, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Image img(h, w);
  for (float& v : img.data()) v = u(rng);
  return img;
}

inline Image constant_image(int h, int w, float v) { return Image(h, w, ColorSpace::kSrgb, v); }

inline ad::Tensor<double> random_tensor(ad::Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0,
                                        bool requires_grad = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(s.numel());
  for (double& x : v) x = u(rng);
  return ad::Tensor<double>(s, std::move(v), requires_grad);
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

// Compares reverse-mode gradients of a scalar loss with central finite
// differences for every element of every input. The relative error of one
// element is |a - n| / max(|a|, |n|, floor).
inline GradCheck gradcheck(const std::vector<ad::Tensor<double>>& inputs,
                           const std::function<ad::Tensor<double>(ad::Graph<double>&)>& loss, double h = 1e-4,
                           double floor = 1e-6) {
  for (const auto& t : inputs) {
    t.set_requires_grad(true);
    t.drop_grad();
  }
  ad::Graph<double> g;
  const ad::Tensor<double> l = loss(g);
  g.backward(l);
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) {
    const auto gr = t.grad();
    analytic.emplace_back(gr.begin(), gr.end());
  }

  auto eval = [&] {
    ad::Graph<double> ng(false);
    return loss(ng).item();
  };
  GradCheck r;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    auto v = inputs[ti].values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double saved = v[i];
      v[i] = saved + h;
      const double fp = eval();
      v[i] = saved - h;
      const double fm = eval();
      v[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[ti][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++r.checked;
      if (rel > r.max_rel_error || std::isnan(rel)) {
        r.max_rel_error = std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel;
        r.worst = "input " + std::to_string(ti) + " element " + std::to_string(i) + ": analytic " +
                  std::to_string(a) + " numeric " + std::to_string(numeric);
      }
    }
  }
  return r;
}

/// All parameter values concatenated in set order.
template <typename T>
std::vector<T> flat_params(const ad::ParameterSet<T>& ps) {
  std::vector<T> out;
  for (const auto& [name, t] : ps) out.insert(out.end(), t.values().begin(), t.values().end());
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("pyrexpose_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace pyrexpose::testing

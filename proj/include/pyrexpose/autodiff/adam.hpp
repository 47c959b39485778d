#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pyrexpose/autodiff/parameters.hpp"
#include "pyrexpose/autodiff/tensor.hpp"

namespace pyrexpose::ad {

template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lr = 1e-4;
};

/// One bias-corrected Adam update of `param` from its gradient.
template <typename T>
void adam_step(Tensor<T>& param, AdamState<T>& state);

// Adam over a ParameterSet, one state per parameter name. The learning rate
// is shared and may change between steps.
template <typename T>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double lr = 1e-4, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

  void step(ParameterSet<T>& params);

  std::map<std::string, AdamState<T>>& states() { return states_; }
  const std::map<std::string, AdamState<T>>& states() const { return states_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  std::map<std::string, AdamState<T>> states_;
};

extern template class AdamOptimizer<float>;
extern template class AdamOptimizer<double>;

}  // namespace pyrexpose::ad

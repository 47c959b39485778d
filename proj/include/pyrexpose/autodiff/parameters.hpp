#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pyrexpose/autodiff/tensor.hpp"

namespace pyrexpose::ad {

// Ordered, named collection of trainable leaf tensors.
template <typename T>
class ParameterSet {
 public:
  Tensor<T>& add(std::string name, Shape shape);
  const Tensor<T>& get(const std::string& name) const;
  Tensor<T>& get(const std::string& name);
  bool contains(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
};

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

}  // namespace pyrexpose::ad

#include "pyrexpose/autodiff/parameters.hpp"

#include <algorithm>

#include "pyrexpose/error.hpp"

namespace pyrexpose::ad {

template <typename T>
Tensor<T>& ParameterSet<T>::add(std::string name, Shape shape) {
  if (contains(name)) throw InvalidInput("duplicate parameter name '" + name + "'");
  entries_.emplace_back(std::move(name), Tensor<T>(shape, T(0), true));
  return entries_.back().second;
}

template <typename T>
bool ParameterSet<T>::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

template <typename T>
const Tensor<T>& ParameterSet<T>::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return e.second;
  throw InvalidInput("unknown parameter '" + name + "'");
}

template <typename T>
Tensor<T>& ParameterSet<T>::get(const std::string& name) {
  return const_cast<Tensor<T>&>(std::as_const(*this).get(name));
}

template <typename T>
std::size_t ParameterSet<T>::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

template class ParameterSet<float>;
template class ParameterSet<double>;

}  // namespace pyrexpose::ad

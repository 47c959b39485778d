#include "pyrexpose/autodiff/tensor.hpp"

#include <algorithm>

#include "pyrexpose/error.hpp"

namespace pyrexpose::ad {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill, bool requires_grad)
    : p_(std::make_shared<TensorStorage<T>>(TensorStorage<T>{shape, std::vector<T>(shape.numel(), fill), {}, requires_grad})) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) throw InvalidInput("negative tensor dimension " + shape.str());
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : p_(std::make_shared<TensorStorage<T>>(TensorStorage<T>{shape, std::move(values), {}, requires_grad})) {
  if (p_->value.size() != shape.numel()) {
    throw InvalidInput("tensor data length " + std::to_string(p_->value.size()) + " does not match shape " + shape.str());
  }
}

template <typename T>
std::span<T> Tensor<T>::grad() const {
  if (p_->grad.empty()) p_->grad.assign(p_->value.size(), T(0));
  return p_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() const {
  std::fill(p_->grad.begin(), p_->grad.end(), T(0));
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw InvalidInput("item() on non-scalar tensor " + shape().str());
  return p_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor out(shape(), p_->value, p_->requires_grad);
  out.p_->grad = p_->grad;
  return out;
}

template <typename T>
bool Graph<T>::tracks(std::initializer_list<const Tensor<T>*> operands) const {
  if (!recording_) return false;
  return std::any_of(operands.begin(), operands.end(), [](const Tensor<T>* t) { return t->defined() && t->requires_grad(); });
}

template <typename T>
void Graph<T>::record(const char* kind, std::vector<Tensor<T>> parents, Tensor<T> output, std::function<void()> backward) {
  output.set_requires_grad(true);
  nodes_.push_back({kind, std::move(parents), std::move(output), std::move(backward)});
}

template <typename T>
void Graph<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw InvalidInput("backward: loss must be a scalar, got shape " + (loss.defined() ? loss.shape().str() : "undefined"));
  }
  for (auto& node : nodes_) node.output.drop_grad();
  loss.grad()[0] = T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output.has_grad()) it->backward();
  }
}

template <typename T>
std::vector<std::string> Graph<T>::kinds() const {
  std::vector<std::string> k;
  for (const auto& n : nodes_) k.emplace_back(n.kind);
  return k;
}

template class Tensor<float>;
template class Tensor<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace pyrexpose::ad

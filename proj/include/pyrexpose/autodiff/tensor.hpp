#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pyrexpose::ad {

struct Shape {
  int n = 1, c = 1, h = 1, w = 1;

  std::size_t numel() const { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
};

// Shared handle to NCHW storage plus an optional gradient buffer. Copies
// alias the same storage; use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor scalar(T v) { return Tensor(Shape{}, v); }

  bool defined() const { return static_cast<bool>(p_); }
  const Shape& shape() const { return p_->shape; }
  std::size_t numel() const { return p_->value.size(); }

  // Handle semantics: constness of the handle does not propagate to the
  // shared storage.
  std::span<T> values() const { return p_->value; }
  T* data() const { return p_->value.data(); }

  bool has_grad() const { return !p_->grad.empty(); }
  /// Gradient buffer, zero-allocated on first access.
  std::span<T> grad() const;
  void zero_grad() const;
  void drop_grad() const { p_->grad.clear(); }

  bool requires_grad() const { return p_->requires_grad; }
  void set_requires_grad(bool r) const { p_->requires_grad = r; }

  T item() const;
  Tensor clone() const;
  const void* id() const { return p_.get(); }

 private:
  std::shared_ptr<TensorStorage<T>> p_;
};

// Records differentiable operations in creation order, which is a valid
// topological order. Ops only record a node when the graph is recording
// and at least one operand requires a gradient.
template <typename T>
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

  /// Whether an op over these operands needs a node.
  bool tracks(std::initializer_list<const Tensor<T>*> operands) const;

  void record(const char* kind, std::vector<Tensor<T>> parents, Tensor<T> output, std::function<void()> backward);

  // Reverse-mode sweep from a scalar loss. Intermediate gradients are reset
  // first, so repeated calls add the same contribution to leaf gradients.
  void backward(const Tensor<T>& loss);

  std::vector<std::string> kinds() const;

 private:
  struct Node {
    const char* kind;
    std::vector<Tensor<T>> parents;
    Tensor<T> output;
    std::function<void()> backward;
  };
  bool recording_;
  std::vector<Node> nodes_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace pyrexpose::ad

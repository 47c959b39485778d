#include "pyrexpose/autodiff/adam.hpp"

#include <cmath>

#include "pyrexpose/error.hpp"

namespace pyrexpose::ad {

template <typename T>
void adam_step(Tensor<T>& param, AdamState<T>& st) {
  if (!param.has_grad()) throw InvalidInput("adam_step: parameter has no gradient");
  const std::size_t n = param.numel();
  if (st.m.empty()) st.m.assign(n, T(0));
  if (st.v.empty()) st.v.assign(n, T(0));
  if (st.m.size() != n || st.v.size() != n) throw InvalidInput("adam_step: state size does not match parameter");

  st.t += 1;
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  auto p = param.values();
  auto g = param.grad();
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    const double m = st.beta1 * st.m[i] + (1.0 - st.beta1) * gi;
    const double v = st.beta2 * st.v[i] + (1.0 - st.beta2) * gi * gi;
    st.m[i] = static_cast<T>(m);
    st.v[i] = static_cast<T>(v);
    p[i] = static_cast<T>(p[i] - st.lr * (m / c1) / (std::sqrt(v / c2) + st.epsilon));
  }
}

template <typename T>
void AdamOptimizer<T>::step(ParameterSet<T>& params) {
  for (auto& [name, tensor] : params) {
    auto& st = states_[name];
    st.beta1 = beta1_;
    st.beta2 = beta2_;
    st.epsilon = epsilon_;
    st.lr = lr_;
    if (!tensor.has_grad()) tensor.grad();
    adam_step(tensor, st);
  }
}

template void adam_step(Tensor<float>&, AdamState<float>&);
template void adam_step(Tensor<double>&, AdamState<double>&);
template class AdamOptimizer<float>;
template class AdamOptimizer<double>;

}  // namespace pyrexpose::ad

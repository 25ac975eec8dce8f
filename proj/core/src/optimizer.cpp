#include "ercmc/optimizer.hpp"

#include <cmath>

namespace ercmc {

template <typename T>
AdamW<T>::AdamW(ParameterList<T> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.value.size(), T(0));
    v_.emplace_back(p.value.size(), T(0));
  }
}

template <typename T>
double global_grad_norm(const ParameterList<T>& params) {
  double total = 0.0;
  for (const auto& p : params) {
    for (T g : p.value.grad()) total += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(total);
}

template <typename T>
void AdamW<T>::step() {
  for (const auto& p : params_) {
    if (!p.value.has_grad()) {
      throw ContractError("optimizer step: parameter '" + p.name + "' has no gradient");
    }
  }
  T clip_scale = T(1);
  if (options_.clip_norm) {
    const double norm = global_grad_norm(params_);
    if (norm > *options_.clip_norm && norm > 0.0) clip_scale = T(*options_.clip_norm / norm);
  }

  ++steps_;
  const T lr = T(options_.lr);
  const T b1 = T(options_.beta1);
  const T b2 = T(options_.beta2);
  const T eps = T(options_.eps);
  const T decay = T(1) - lr * T(options_.weight_decay);
  const T bias1 = T(1) - T(std::pow(options_.beta1, static_cast<double>(steps_)));
  const T bias2 = T(1) - T(std::pow(options_.beta2, static_cast<double>(steps_)));

  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& param = params_[k].value;
    auto w = param.mutable_data();
    auto g = param.mutable_grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const T grad = g[i] * clip_scale;
      m[i] = b1 * m[i] + (T(1) - b1) * grad;
      v[i] = b2 * v[i] + (T(1) - b2) * grad * grad;
      const T m_hat = m[i] / bias1;
      const T v_hat = v[i] / bias2;
      w[i] = w[i] * decay - lr * m_hat / (std::sqrt(v_hat) + eps);
      g[i] = T(0);
    }
  }
}

template class AdamW<float>;
template class AdamW<double>;
template double global_grad_norm(const ParameterList<float>&);
template double global_grad_norm(const ParameterList<double>&);

}  // namespace ercmc

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ercmc/tensor.hpp"

namespace ercmc {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

template <typename T>
using ParameterList = std::vector<Parameter<T>>;

struct AdamWOptions {
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  // Global L2-norm clip applied to the gradient before the update; unset = off.
  std::optional<double> clip_norm;
};

// Adam with decoupled weight decay and bias-corrected moments. Every step
// consumes the accumulated gradients and zeroes them.
template <typename T>
class AdamW {
 public:
  AdamW(ParameterList<T> params, AdamWOptions options);

  void step();

  std::uint64_t step_count() const noexcept { return steps_; }
  const AdamWOptions& options() const noexcept { return options_; }
  void set_lr(double lr) noexcept { options_.lr = lr; }
  const std::vector<std::vector<T>>& first_moments() const noexcept { return m_; }
  const std::vector<std::vector<T>>& second_moments() const noexcept { return v_; }

 private:
  ParameterList<T> params_;
  AdamWOptions options_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::uint64_t steps_ = 0;
};

// Allocates (or resets) a zero gradient buffer on every parameter.
template <typename T>
void zero_grads(ParameterList<T>& params) {
  for (auto& p : params) p.value.zero_grad();
}

template <typename T>
double global_grad_norm(const ParameterList<T>& params);

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace ercmc

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ercmc/error.hpp"

namespace ercmc {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation or zero_grad()
  bool requires_grad = false;
};

}  // namespace detail

// Dense row-major tensor with shared-handle semantics: copies alias the same
// storage, and clone() makes an independent value copy. Mutators are const;
// they act on the shared storage, not the handle.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    const std::size_t n = numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
  }

  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false) {
    if (numel(shape) != values.size()) {
      throw DimensionError("tensor of shape " + shape_string(shape) + " cannot hold " +
                           std::to_string(values.size()) + " values");
    }
    return Tensor(std::move(shape), std::move(values), requires_grad);
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
  }

  static Tensor row(std::span<const T> values, bool requires_grad = false) {
    return Tensor(Shape{1, values.size()}, std::vector<T>(values.begin(), values.end()),
                  requires_grad);
  }

  bool defined() const noexcept { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->data.size(); }
  // Extent of the last axis; a rank-0 shape never occurs.
  std::size_t cols() const { return impl_->shape.back(); }
  std::size_t rows() const { return size() / cols(); }

  std::span<const T> data() const { return impl_->data; }
  std::span<T> mutable_data() const { return impl_->data; }
  T item() const {
    if (size() != 1) {
      throw ContractError("item() on tensor of shape " + shape_string(shape()));
    }
    return impl_->data[0];
  }
  T at(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool on) const { impl_->requires_grad = on; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() const {
    ensure_grad();
    return impl_->grad;
  }
  void ensure_grad() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
  }
  void zero_grad() const { impl_->grad.assign(impl_->data.size(), T(0)); }
  void drop_grad() const {
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
  }

  Tensor clone() const {
    Tensor copy(impl_->shape, impl_->data, impl_->requires_grad);
    return copy;
  }

  // Identity of the underlying storage.
  const void* id() const noexcept { return impl_.get(); }

 private:
  Tensor(Shape shape, std::vector<T> values, bool requires_grad)
      : impl_(std::make_shared<detail::TensorStorage<T>>()) {
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
    impl_->requires_grad = requires_grad;
  }

  std::shared_ptr<detail::TensorStorage<T>> impl_;
};

// Ordered record of executed primitives. Primitives append their backward
// closure after computing the output, so the record is topologically ordered
// by construction. A tape is single-writer.
template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // A disabled tape records nothing and produces outputs without grad.
  void set_enabled(bool on) noexcept { enabled_ = on; }
  bool enabled() const noexcept { return enabled_; }

  std::size_t size() const noexcept { return entries_.size(); }
  void clear() { entries_.clear(); }

  void record(std::function<void()> backward) { entries_.push_back(std::move(backward)); }

  // Seeds d(loss)/d(loss) = 1, replays the record once in reverse and clears it.
  // Gradients accumulate into any tensor that already holds one.
  void backward(Tensor<T>& loss) {
    if (loss.size() != 1) {
      throw ContractError("backward requires a scalar loss, got shape " +
                          shape_string(loss.shape()));
    }
    if (!loss.requires_grad()) {
      entries_.clear();
      return;
    }
    loss.mutable_grad()[0] += T(1);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
    entries_.clear();
  }

 private:
  std::vector<std::function<void()>> entries_;
  bool enabled_ = true;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace ercmc

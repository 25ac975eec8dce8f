#include "ercmc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ercmc {
namespace {
thread_local KinkMonitor* active_monitor = nullptr;
}  // namespace

KinkMonitor::KinkMonitor() : previous_(active_monitor) { active_monitor = this; }
KinkMonitor::~KinkMonitor() { active_monitor = previous_; }
KinkMonitor* KinkMonitor::current() noexcept { return active_monitor; }

}  // namespace ercmc

namespace ercmc::ops {
namespace {

template <typename T>
bool tracks(const Tape<T>& tape, std::initializer_list<const Tensor<T>*> inputs) {
  if (!tape.enabled()) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (!t.defined() || t.rank() != 2) {
    throw DimensionError(std::string(op) + " expects a 2-D tensor, got " +
                         (t.defined() ? shape_string(t.shape()) : std::string("<undefined>")));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + " shape mismatch: " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

// C[n×m] += A[n×k] · B[k×m]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    T* crow = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      const T* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[n×k] += A[n×m] · B[k×m]ᵀ
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t n, std::size_t m, std::size_t k) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* arow = a + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T* brow = b + p * m;
      T acc = T(0);
      for (std::size_t j = 0; j < m; ++j) acc += arow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// C[k×m] += A[n×k]ᵀ · B[n×m]
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* brow = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      T* crow = c + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
T sigmoid_value(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul inner extents differ: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  auto out = Tensor<T>::zeros({n, m});
  gemm_nn(a.data().data(), b.data().data(), out.mutable_data().data(), n, k, m);
  if (tracks(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record([a, b, out, n, k, m]() mutable {
      if (!out.has_grad()) return;
      const T* g = out.grad().data();
      if (a.requires_grad()) gemm_nt(g, b.data().data(), a.mutable_grad().data(), n, m, k);
      if (b.requires_grad()) gemm_tn(a.data().data(), g, b.mutable_grad().data(), n, k, m);
    });
  }
  return out;
}

template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& a) {
  require_matrix(a, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  auto out = Tensor<T>::zeros({c, r});
  auto src = a.data();
  auto dst = out.mutable_data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
  if (tracks(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([a, out, r, c]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  auto out = Tensor<T>::zeros(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] + b.data()[i];
  if (tracks(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record([a, b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      for (const Tensor<T>* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto gt = t->mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  auto out = Tensor<T>::zeros(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] - b.data()[i];
  if (tracks(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record([a, b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  auto out = Tensor<T>::zeros(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] * b.data()[i];
  if (tracks(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record([a, b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.data()[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> affine(Tape<T>& tape, const Tensor<T>& a, T scale, T shift) {
  auto out = Tensor<T>::zeros(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = scale * a.data()[i] + shift;
  if (tracks(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([a, out, scale]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += scale * g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_row(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& bias) {
  const std::size_t m = a.cols();
  if (bias.size() != m || (bias.rank() == 2 && bias.dim(0) != 1) || bias.rank() > 2) {
    throw DimensionError("add_row bias " + shape_string(bias.shape()) +
                         " does not match last extent of " + shape_string(a.shape()));
  }
  const std::size_t rows = a.rows();
  auto out = Tensor<T>::zeros(a.shape());
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < m; ++c) o[r * m + c] = a.data()[r * m + c] + bias.data()[c];
  if (tracks(tape, {&a, &bias})) {
    out.set_requires_grad(true);
    tape.record([a, bias, out, rows, m]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (bias.requires_grad()) {
        auto gb = bias.mutable_grad();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < m; ++c) gb[c] += g[r * m + c];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> elementwise(Tape<T>& tape, const Tensor<T>& a, Activation kind) {
  auto out = Tensor<T>::zeros(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  switch (kind) {
    case Activation::relu:
      // NaN propagates.
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] > T(0) || std::isnan(x[i]) ? x[i] : T(0);
      if (auto* monitor = KinkMonitor::current()) {
        for (std::size_t i = 0; i < o.size(); ++i) monitor->fold(x[i] > T(0));
      }
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::tanh(x[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < o.size(); ++i) o[i] = sigmoid_value(x[i]);
      break;
  }
  if (tracks(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([a, out, kind]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto y = out.data();
      auto x = a.data();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        T d;
        switch (kind) {
          case Activation::relu: d = x[i] > T(0) ? T(1) : T(0); break;
          case Activation::tanh: d = T(1) - y[i] * y[i]; break;
          default: d = y[i] * (T(1) - y[i]); break;
        }
        ga[i] += g[i] * d;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_lastdim(Tape<T>& tape, const Tensor<T>& a,
                          std::optional<std::span<const std::uint8_t>> mask) {
  const std::size_t n = a.cols();
  const std::size_t rows = a.rows();
  if (n == 0) throw DimensionError("softmax over an empty axis");
  if (mask && mask->size() != a.size()) {
    throw DimensionError("softmax mask has " + std::to_string(mask->size()) +
                         " entries for tensor " + shape_string(a.shape()));
  }
  auto keep = [&](std::size_t i) { return !mask || (*mask)[i] != 0; };
  auto out = Tensor<T>::zeros(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t i = r * n + c;
      if (!keep(i)) continue;
      any = true;
      mx = std::max(mx, x[i]);
    }
    if (!any) throw DegenerateRowError("softmax row " + std::to_string(r) + " is fully masked");
    T total = T(0);
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t i = r * n + c;
      if (!keep(i)) continue;
      o[i] = std::exp(x[i] - mx);
      total += o[i];
    }
    for (std::size_t c = 0; c < n; ++c) o[r * n + c] /= total;
  }
  if (tracks(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([a, out, rows, n]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto y = out.data();
      auto ga = a.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        T dot = T(0);
        for (std::size_t c = 0; c < n; ++c) dot += g[r * n + c] * y[r * n + c];
        for (std::size_t c = 0; c < n; ++c) {
          const std::size_t i = r * n + c;
          ga[i] += y[i] * (g[i] - dot);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> log_softmax_lastdim(Tape<T>& tape, const Tensor<T>& a) {
  const std::size_t n = a.cols();
  const std::size_t rows = a.rows();
  auto out = Tensor<T>::zeros(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = x[r * n];
    for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, x[r * n + c]);
    T total = T(0);
    for (std::size_t c = 0; c < n; ++c) total += std::exp(x[r * n + c] - mx);
    const T log_z = mx + std::log(total);
    for (std::size_t c = 0; c < n; ++c) o[r * n + c] = x[r * n + c] - log_z;
  }
  if (tracks(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([a, out, rows, n]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto y = out.data();
      auto ga = a.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        T gsum = T(0);
        for (std::size_t c = 0; c < n; ++c) gsum += g[r * n + c];
        for (std::size_t c = 0; c < n; ++c) {
          const std::size_t i = r * n + c;
          ga[i] += g[i] - std::exp(y[i]) * gsum;
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_lastdim(Tape<T>& tape, std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
  std::size_t width = 0;
  std::vector<std::size_t> widths;
  bool any_grad = false;
  for (const auto& p : parts) {
    Shape pl(p.shape().begin(), p.shape().end() - 1);
    if (pl != lead) {
      throw DimensionError("concat leading shapes differ: " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    widths.push_back(p.cols());
    width += p.cols();
    any_grad = any_grad || p.requires_grad();
  }
  Shape shape = lead;
  shape.push_back(width);
  const std::size_t rows = numel(lead) == 0 ? 1 : numel(lead);
  auto out = Tensor<T>::zeros(shape);
  auto o = out.mutable_data();
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto src = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(src.data() + r * widths[k], widths[k], o.data() + r * width + offset);
    offset += widths[k];
  }
  if (tape.enabled() && any_grad) {
    out.set_requires_grad(true);
    std::vector<Tensor<T>> inputs(parts.begin(), parts.end());
    tape.record([inputs, widths, out, rows, width]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      std::size_t offset = 0;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        if (inputs[k].requires_grad()) {
          auto gi = inputs[k].mutable_grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < widths[k]; ++c)
              gi[r * widths[k] + c] += g[r * width + offset + c];
        }
        offset += widths[k];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_rows(Tape<T>& tape, std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("row concat of zero tensors");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("row concat width mismatch: " + shape_string(parts[0].shape()) +
                           " vs " + shape_string(p.shape()));
    }
    rows += p.rows();
    any_grad = any_grad || p.requires_grad();
  }
  auto out = Tensor<T>::zeros({rows, cols});
  auto o = out.mutable_data();
  std::size_t at = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), o.begin() + static_cast<std::ptrdiff_t>(at));
    at += p.size();
  }
  if (tape.enabled() && any_grad) {
    out.set_requires_grad(true);
    std::vector<Tensor<T>> inputs(parts.begin(), parts.end());
    tape.record([inputs, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      std::size_t at = 0;
      for (auto& in : inputs) {
        if (in.requires_grad()) {
          auto gi = in.mutable_grad();
          for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[at + i];
        }
        at += in.size();
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> select_rows(Tape<T>& tape, const Tensor<T>& a, std::span<const std::size_t> rows) {
  require_matrix(a, "select_rows");
  const std::size_t cols = a.dim(1);
  for (std::size_t r : rows) {
    if (r >= a.dim(0)) {
      throw IndexError("select_rows index " + std::to_string(r) + " out of range for " +
                       shape_string(a.shape()));
    }
  }
  auto out = Tensor<T>::zeros({rows.size(), cols});
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(a.data().data() + rows[i] * cols, cols, o.data() + i * cols);
  if (tracks(tape, {&a})) {
    out.set_requires_grad(true);
    std::vector<std::size_t> picked(rows.begin(), rows.end());
    tape.record([a, out, picked, cols]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < picked.size(); ++i)
        for (std::size_t c = 0; c < cols; ++c) ga[picked[i] * cols + c] += g[i * cols + c];
    });
  }
  return out;
}

template <typename T>
Tensor<T> gather_cols(Tape<T>& tape, const Tensor<T>& a, const ColumnIndex& index) {
  require_matrix(a, "gather_cols");
  if (index.rows != a.dim(0) || index.entries.size() != index.rows * index.cols) {
    throw DimensionError("gather_cols index does not cover " + shape_string(a.shape()));
  }
  const std::size_t width = a.dim(1);
  for (std::size_t e : index.entries) {
    if (e >= width) throw IndexError("gather_cols column " + std::to_string(e) + " out of range");
  }
  auto out = Tensor<T>::zeros({index.rows, index.cols});
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < index.rows; ++r)
    for (std::size_t c = 0; c < index.cols; ++c)
      o[r * index.cols + c] = a.data()[r * width + index.entries[r * index.cols + c]];
  if (tracks(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([a, out, index, width]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto ga = a.mutable_grad();
      for (std::size_t r = 0; r < index.rows; ++r)
        for (std::size_t c = 0; c < index.cols; ++c)
          ga[r * width + index.entries[r * index.cols + c]] += g[r * index.cols + c];
    });
  }
  return out;
}

template <typename T>
Tensor<T> scatter_cols(Tape<T>& tape, const Tensor<T>& a, const ColumnIndex& index,
                       std::size_t width) {
  require_matrix(a, "scatter_cols");
  if (index.rows != a.dim(0) || index.cols != a.dim(1) ||
      index.entries.size() != index.rows * index.cols) {
    throw DimensionError("scatter_cols index does not match " + shape_string(a.shape()));
  }
  for (std::size_t e : index.entries) {
    if (e >= width) throw IndexError("scatter_cols column " + std::to_string(e) + " out of range");
  }
  auto out = Tensor<T>::zeros({index.rows, width});
  auto o = out.mutable_data();
  for (std::size_t r = 0; r < index.rows; ++r)
    for (std::size_t c = 0; c < index.cols; ++c)
      o[r * width + index.entries[r * index.cols + c]] += a.data()[r * index.cols + c];
  if (tracks(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([a, out, index, width]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto ga = a.mutable_grad();
      for (std::size_t r = 0; r < index.rows; ++r)
        for (std::size_t c = 0; c < index.cols; ++c)
          ga[r * index.cols + c] += g[r * width + index.entries[r * index.cols + c]];
    });
  }
  return out;
}

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& a, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParameterError("dropout rate " + std::to_string(rate) + " outside [0, 1)");
  }
  if (!training || rate == 0.0) return a;
  const T keep_scale = T(1) / T(1.0 - rate);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<T> keep(a.size());
  for (auto& k : keep) k = unit(rng) < rate ? T(0) : keep_scale;
  auto out = Tensor<T>::zeros(a.shape());
  auto o = out.mutable_data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.data()[i] * keep[i];
  if (tracks(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([a, out, keep = std::move(keep)]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * keep[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> nll_loss(Tape<T>& tape, const Tensor<T>& log_probs,
                   std::span<const std::size_t> targets) {
  require_matrix(log_probs, "nll_loss");
  const std::size_t n = log_probs.dim(0), classes = log_probs.dim(1);
  if (targets.size() != n) {
    throw DimensionError("nll_loss has " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");
  }
  if (n == 0) throw DimensionError("nll_loss over zero rows");
  for (std::size_t t : targets) {
    if (t >= classes) {
      throw IndexError("target class " + std::to_string(t) + " >= " + std::to_string(classes));
    }
  }
  T total = T(0);
  for (std::size_t r = 0; r < n; ++r) total -= log_probs.data()[r * classes + targets[r]];
  auto out = Tensor<T>::scalar(total / T(n));
  if (tracks(tape, {&log_probs})) {
    out.set_requires_grad(true);
    std::vector<std::size_t> tgt(targets.begin(), targets.end());
    tape.record([log_probs, out, tgt, n, classes]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0] / T(n);
      auto gl = log_probs.mutable_grad();
      for (std::size_t r = 0; r < n; ++r) gl[r * classes + tgt[r]] -= g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a) {
  T total = T(0);
  for (T v : a.data()) total += v;
  auto out = Tensor<T>::scalar(total);
  if (tracks(tape, {&a})) {
    out.set_requires_grad(true);
    tape.record([a, out]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0];
      for (T& v : a.mutable_grad()) v += g;
    });
  }
  return out;
}

#define ERCMC_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> transpose(Tape<T>&, const Tensor<T>&);                                   \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> sub(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> affine(Tape<T>&, const Tensor<T>&, T, T);                                \
  template Tensor<T> add_row(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> elementwise(Tape<T>&, const Tensor<T>&, Activation);                     \
  template Tensor<T> softmax_lastdim(Tape<T>&, const Tensor<T>&,                              \
                                     std::optional<std::span<const std::uint8_t>>);           \
  template Tensor<T> log_softmax_lastdim(Tape<T>&, const Tensor<T>&);                         \
  template Tensor<T> concat_lastdim(Tape<T>&, std::span<const Tensor<T>>);                    \
  template Tensor<T> concat_rows(Tape<T>&, std::span<const Tensor<T>>);                       \
  template Tensor<T> select_rows(Tape<T>&, const Tensor<T>&, std::span<const std::size_t>);   \
  template Tensor<T> gather_cols(Tape<T>&, const Tensor<T>&, const ColumnIndex&);             \
  template Tensor<T> scatter_cols(Tape<T>&, const Tensor<T>&, const ColumnIndex&,             \
                                  std::size_t);                                               \
  template Tensor<T> dropout(Tape<T>&, const Tensor<T>&, double, bool, Rng&);                 \
  template Tensor<T> nll_loss(Tape<T>&, const Tensor<T>&, std::span<const std::size_t>);      \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);

ERCMC_INSTANTIATE_OPS(float)
ERCMC_INSTANTIATE_OPS(double)

#undef ERCMC_INSTANTIATE_OPS

}  // namespace ercmc::ops

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ercmc/tensor.hpp"

namespace ercmc {

using Rng = std::mt19937_64;

enum class Activation { relu, tanh, sigmoid };

// Index table for gather_cols / scatter_cols: rows × cols entries, row-major.
struct ColumnIndex {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> entries;
};

// While alive, folds every relu activation pattern computed on this thread
// into a running signature. Finite-difference checks use it to spot stencils
// that straddle a kink.
class KinkMonitor {
 public:
  KinkMonitor();
  ~KinkMonitor();
  KinkMonitor(const KinkMonitor&) = delete;
  KinkMonitor& operator=(const KinkMonitor&) = delete;

  void reset() noexcept { signature_ = 0xcbf29ce484222325ULL; }
  std::uint64_t signature() const noexcept { return signature_; }
  void fold(bool active) noexcept {
    signature_ = (signature_ ^ (active ? 0x9dU : 0x3bU)) * 0x100000001b3ULL;
  }
  static KinkMonitor* current() noexcept;

 private:
  std::uint64_t signature_ = 0xcbf29ce484222325ULL;
  KinkMonitor* previous_ = nullptr;
};

namespace ops {

// All primitives take the tape first. When no input requires grad, or the
// tape is disabled, nothing is recorded.

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& a);

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// Elementwise product.
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// scale * a + shift
template <typename T>
Tensor<T> affine(Tape<T>& tape, const Tensor<T>& a, T scale, T shift);

// Adds a length-m bias (shape {m} or {1, m}) to every row of a [... × m] tensor.
template <typename T>
Tensor<T> add_row(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& bias);

template <typename T>
Tensor<T> elementwise(Tape<T>& tape, const Tensor<T>& a, Activation kind);

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& a) {
  return elementwise(tape, a, Activation::relu);
}
template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& a) {
  return elementwise(tape, a, Activation::tanh);
}
template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& a) {
  return elementwise(tape, a, Activation::sigmoid);
}

// Softmax over the last axis with max-subtraction. Masked entries (mask value
// 0) are exactly zero in the output; a row with every entry masked is an error.
template <typename T>
Tensor<T> softmax_lastdim(Tape<T>& tape, const Tensor<T>& a,
                          std::optional<std::span<const std::uint8_t>> mask = std::nullopt);

template <typename T>
Tensor<T> log_softmax_lastdim(Tape<T>& tape, const Tensor<T>& a);

template <typename T>
Tensor<T> concat_lastdim(Tape<T>& tape, std::span<const Tensor<T>> parts);

// Stacks [r_i × c] matrices into [(Σ r_i) × c].
template <typename T>
Tensor<T> concat_rows(Tape<T>& tape, std::span<const Tensor<T>> parts);

// Rows of a 2-D tensor in the given order (repeats allowed).
template <typename T>
Tensor<T> select_rows(Tape<T>& tape, const Tensor<T>& a, std::span<const std::size_t> rows);

// out[r][c] = a[r][index(r, c)]
template <typename T>
Tensor<T> gather_cols(Tape<T>& tape, const Tensor<T>& a, const ColumnIndex& index);

// out[r][index(r, c)] += a[r][c], out has `width` columns. Adjoint of gather_cols.
template <typename T>
Tensor<T> scatter_cols(Tape<T>& tape, const Tensor<T>& a, const ColumnIndex& index,
                       std::size_t width);

template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& a, double rate, bool training, Rng& rng);

// Mean over rows of -log_probs[row, target[row]].
template <typename T>
Tensor<T> nll_loss(Tape<T>& tape, const Tensor<T>& log_probs,
                   std::span<const std::size_t> targets);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& a);

}  // namespace ops
}  // namespace ercmc

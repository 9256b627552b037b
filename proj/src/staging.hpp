#pragma once

// Copies of input rows held in worker scratch.

#include <algorithm>
#include <variant>

#include "falkon/matrix.hpp"
#include "falkon/ooc/memory.hpp"

namespace falkon::detail {

/// Scratch bytes needed to stage rows [begin, begin + count) of x.
template <typename T>
std::size_t staged_bytes(const MatrixView<T>& x, std::size_t begin, std::size_t count) {
  if (const auto* d = std::get_if<DenseView<T>>(&x)) return count * d->cols * sizeof(T);
  const auto& s = std::get<CsrView<T>>(x);
  const auto nnz = static_cast<std::size_t>(s.offsets[begin + count] - s.offsets[begin]);
  return (count + 1 + nnz) * sizeof(Index) + nnz * sizeof(T);
}

/// Largest staged_bytes over all consecutive row groups of size `count`.
template <typename T>
std::size_t max_staged_bytes(const MatrixView<T>& x, std::size_t count) {
  const std::size_t rows = view_rows(x);
  if (std::holds_alternative<DenseView<T>>(x)) return staged_bytes(x, 0, std::min(count, rows));
  std::size_t best = 0;
  for (std::size_t b = 0; b < rows; b += count)
    best = std::max(best, staged_bytes(x, b, std::min(count, rows - b)));
  return best;
}

template <typename T>
class StagedRows {
 public:
  StagedRows() = default;
  StagedRows(ooc::ScratchArena& arena, const MatrixView<T>& x, std::size_t begin,
             std::size_t count, ooc::TransferLedger* ledger) {
    if (const auto* d = std::get_if<DenseView<T>>(&x)) {
      values_ = arena.allocate<T>(count * d->cols);
      for (std::size_t i = 0; i < count; ++i)
        std::copy_n(d->data + (begin + i) * d->ld, d->cols, values_.data() + i * d->cols);
      view_ = DenseView<T>{values_.data(), count, d->cols, d->cols};
    } else {
      const auto& s = std::get<CsrView<T>>(x);
      const Index base = s.offsets[begin];
      const auto nnz = static_cast<std::size_t>(s.offsets[begin + count] - base);
      offsets_ = arena.allocate<Index>(count + 1);
      indices_ = arena.allocate<Index>(nnz);
      values_ = arena.allocate<T>(nnz);
      for (std::size_t i = 0; i <= count; ++i) offsets_[i] = s.offsets[begin + i] - base;
      std::copy_n(s.indices + base, nnz, indices_.data());
      std::copy_n(s.values + base, nnz, values_.data());
      view_ = CsrView<T>{count, s.cols, offsets_.data(), indices_.data(), values_.data()};
    }
    if (ledger) {
      const std::size_t bytes = staged_bytes(x, begin, count);
      ledger->charge_host_to_scratch((bytes + sizeof(T) - 1) / sizeof(T));
    }
  }

  const MatrixView<T>& view() const { return view_; }

 private:
  ooc::ScratchBuffer<T> values_;
  ooc::ScratchBuffer<Index> offsets_, indices_;
  MatrixView<T> view_{DenseView<T>{}};
};

}  // namespace falkon::detail

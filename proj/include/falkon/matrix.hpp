#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "falkon/error.hpp"

namespace falkon {

using Index = std::int64_t;

/// Non-owning row-major view with leading dimension `ld`.
template <typename T>
struct DenseView {
  const T* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t ld = 0;

  std::span<const T> row(std::size_t i) const { return {data + i * ld, cols}; }
  T operator()(std::size_t i, std::size_t j) const { return data[i * ld + j]; }

  DenseView rows_range(std::size_t begin, std::size_t count) const {
    return {data + begin * ld, count, cols, ld};
  }
};

/// Non-owning CSR view. `offsets` has rows+1 entries and may start at a
/// nonzero position when the view is a row slice of a larger matrix.
template <typename T>
struct CsrView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  const Index* offsets = nullptr;
  const Index* indices = nullptr;
  const T* values = nullptr;

  std::size_t row_nnz(std::size_t i) const {
    return static_cast<std::size_t>(offsets[i + 1] - offsets[i]);
  }
  std::span<const Index> row_indices(std::size_t i) const {
    return {indices + offsets[i], row_nnz(i)};
  }
  std::span<const T> row_values(std::size_t i) const {
    return {values + offsets[i], row_nnz(i)};
  }
  std::size_t nnz() const {
    return rows == 0 ? 0 : static_cast<std::size_t>(offsets[rows] - offsets[0]);
  }
  std::size_t max_row_nnz() const {
    std::size_t best = 0;
    for (std::size_t i = 0; i < rows; ++i) best = std::max(best, row_nnz(i));
    return best;
  }

  CsrView rows_range(std::size_t begin, std::size_t count) const {
    return {count, cols, offsets + begin, indices, values};
  }
};

template <typename T>
using MatrixView = std::variant<DenseView<T>, CsrView<T>>;

template <typename T>
std::size_t view_rows(const MatrixView<T>& v) {
  return std::visit([](const auto& m) { return m.rows; }, v);
}

template <typename T>
std::size_t view_cols(const MatrixView<T>& v) {
  return std::visit([](const auto& m) { return m.cols; }, v);
}

template <typename T>
MatrixView<T> view_rows_range(const MatrixView<T>& v, std::size_t begin,
                              std::size_t count) {
  return std::visit(
      [&](const auto& m) -> MatrixView<T> { return m.rows_range(begin, count); },
      v);
}

/// Owning row-major dense matrix.
template <typename T>
class DenseMatrix {
 public:
  using value_type = T;

  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_)
      throw DimensionMismatch("dense matrix value count does not equal rows*cols");
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T* data() noexcept { return values_.data(); }
  const T* data() const noexcept { return values_.data(); }
  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  T& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
  T operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }

  std::span<T> row(std::size_t i) { return {values_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const {
    return {values_.data() + i * cols_, cols_};
  }

  DenseView<T> view() const { return {values_.data(), rows_, cols_, cols_}; }
  DenseView<T> rows_view(std::size_t begin, std::size_t count) const {
    return view().rows_range(begin, count);
  }

  template <typename U>
  DenseMatrix<U> cast() const {
    DenseMatrix<U> out(rows_, cols_);
    std::transform(values_.begin(), values_.end(), out.data(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> values_;
};

/// Owning CSR matrix. Column indices are strictly increasing within a row.
template <typename T>
class SparseMatrix {
 public:
  using value_type = T;

  SparseMatrix() : row_offsets_(1, 0) {}
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Index> row_offsets,
               std::vector<Index> col_indices, std::vector<T> values)
      : rows_(rows),
        cols_(cols),
        row_offsets_(std::move(row_offsets)),
        col_indices_(std::move(col_indices)),
        values_(std::move(values)) {
    validate();
  }

  static SparseMatrix from_dense(const DenseMatrix<T>& dense) {
    std::vector<Index> offsets{0};
    std::vector<Index> indices;
    std::vector<T> values;
    for (std::size_t i = 0; i < dense.rows(); ++i) {
      for (std::size_t j = 0; j < dense.cols(); ++j) {
        if (dense(i, j) != T{0}) {
          indices.push_back(static_cast<Index>(j));
          values.push_back(dense(i, j));
        }
      }
      offsets.push_back(static_cast<Index>(indices.size()));
    }
    return SparseMatrix(dense.rows(), dense.cols(), std::move(offsets),
                        std::move(indices), std::move(values));
  }

  DenseMatrix<T> to_dense() const {
    DenseMatrix<T> out(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (Index p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p)
        out(i, static_cast<std::size_t>(col_indices_[p])) = values_[p];
    return out;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  const std::vector<Index>& row_offsets() const noexcept { return row_offsets_; }
  const std::vector<Index>& col_indices() const noexcept { return col_indices_; }
  const std::vector<T>& values() const noexcept { return values_; }

  CsrView<T> view() const {
    return {rows_, cols_, row_offsets_.data(), col_indices_.data(), values_.data()};
  }
  CsrView<T> rows_view(std::size_t begin, std::size_t count) const {
    return view().rows_range(begin, count);
  }

  /// Copies the listed rows into a new matrix, in the order given.
  SparseMatrix gather_rows(std::span<const std::size_t> rows) const {
    std::vector<Index> offsets{0};
    std::vector<Index> indices;
    std::vector<T> values;
    for (std::size_t r : rows) {
      for (Index p = row_offsets_[r]; p < row_offsets_[r + 1]; ++p) {
        indices.push_back(col_indices_[p]);
        values.push_back(values_[p]);
      }
      offsets.push_back(static_cast<Index>(indices.size()));
    }
    return SparseMatrix(rows.size(), cols_, std::move(offsets), std::move(indices),
                        std::move(values));
  }

  bool operator==(const SparseMatrix&) const = default;

 private:
  void validate() const {
    if (row_offsets_.size() != rows_ + 1 || row_offsets_.front() != 0)
      throw InvalidArgument("CSR row offsets must have rows+1 entries starting at 0");
    if (col_indices_.size() != values_.size() ||
        static_cast<std::size_t>(row_offsets_.back()) != values_.size())
      throw InvalidArgument("CSR index/value arrays disagree with row offsets");
    for (std::size_t i = 0; i < rows_; ++i) {
      if (row_offsets_[i + 1] < row_offsets_[i])
        throw InvalidArgument("CSR row offsets must be monotone");
      for (Index p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
        if (col_indices_[p] < 0 || static_cast<std::size_t>(col_indices_[p]) >= cols_)
          throw InvalidArgument("CSR column index out of range");
        if (p > row_offsets_[i] && col_indices_[p] <= col_indices_[p - 1])
          throw InvalidArgument("CSR column indices must be strictly increasing in a row");
      }
    }
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Index> row_offsets_;
  std::vector<Index> col_indices_;
  std::vector<T> values_;
};

template <typename T>
using DataMatrix = std::variant<DenseMatrix<T>, SparseMatrix<T>>;

template <typename T>
MatrixView<T> as_view(const DataMatrix<T>& m) {
  return std::visit([](const auto& x) -> MatrixView<T> { return x.view(); }, m);
}

template <typename T>
MatrixView<T> as_view(const DenseMatrix<T>& m) {
  return m.view();
}

template <typename T>
MatrixView<T> as_view(const SparseMatrix<T>& m) {
  return m.view();
}

template <typename T>
DenseMatrix<T> densify(const MatrixView<T>& v) {
  if (const auto* d = std::get_if<DenseView<T>>(&v)) {
    DenseMatrix<T> out(d->rows, d->cols);
    for (std::size_t i = 0; i < d->rows; ++i)
      std::copy_n(d->data + i * d->ld, d->cols, out.data() + i * d->cols);
    return out;
  }
  const auto& s = std::get<CsrView<T>>(v);
  DenseMatrix<T> out(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i) {
    auto idx = s.row_indices(i);
    auto val = s.row_values(i);
    for (std::size_t p = 0; p < idx.size(); ++p)
      out(i, static_cast<std::size_t>(idx[p])) = val[p];
  }
  return out;
}

}  // namespace falkon

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "falkon/matrix.hpp"

namespace falkon {

/// Training rows X (n x d, dense or CSR) with targets y.
template <typename T>
struct Dataset {
  DataMatrix<T> x;
  std::vector<double> y;

  std::size_t n() const { return view_rows(view()); }
  std::size_t d() const { return view_cols(view()); }
  MatrixView<T> view() const { return as_view(x); }
  bool sparse() const { return std::holds_alternative<SparseMatrix<T>>(x); }

  void validate() const {
    if (y.size() != n())
      throw DimensionMismatch(std::to_string(n()) + " rows but " +
                              std::to_string(y.size()) + " targets");
  }
};

/// The m inducing rows and their zero-based source rows in the training set.
template <typename T>
struct InducingSet {
  DataMatrix<T> x;
  std::vector<std::size_t> indices;
  std::uint64_t seed = 0;

  std::size_t m() const { return view_rows(view()); }
  MatrixView<T> view() const { return as_view(x); }
};

/// m distinct values from [0, n), uniformly without replacement, in draw
/// order. The stream depends only on the seed (mt19937_64 with a portable
/// bounded draw).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m,
                                                    std::uint64_t seed);

/// Copies the listed rows, keeping the storage format.
template <typename T>
DataMatrix<T> gather_rows(const MatrixView<T>& x, std::span<const std::size_t> rows) {
  if (const auto* d = std::get_if<DenseView<T>>(&x)) {
    DenseMatrix<T> out(rows.size(), d->cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto src = d->row(rows[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }
  const auto& s = std::get<CsrView<T>>(x);
  std::vector<Index> offsets{0}, indices;
  std::vector<T> values;
  for (std::size_t r : rows) {
    auto idx = s.row_indices(r);
    auto val = s.row_values(r);
    indices.insert(indices.end(), idx.begin(), idx.end());
    values.insert(values.end(), val.begin(), val.end());
    offsets.push_back(static_cast<Index>(indices.size()));
  }
  return SparseMatrix<T>(rows.size(), s.cols, std::move(offsets), std::move(indices),
                         std::move(values));
}

/// Draws m inducing rows. Throws InvalidArgument unless 1 <= m <= n.
template <typename T>
InducingSet<T> subsample_inducing(const Dataset<T>& data, std::size_t m, std::uint64_t seed) {
  const std::size_t n = data.n();
  if (m < 1 || m > n)
    throw InvalidArgument("inducing point count " + std::to_string(m) + " must be in [1, " +
                          std::to_string(n) + "]");
  InducingSet<T> out;
  out.indices = sample_without_replacement(n, m, seed);
  out.x = gather_rows(data.view(), std::span<const std::size_t>(out.indices));
  out.seed = seed;
  return out;
}

/// Targets at the inducing rows.
template <typename T>
std::vector<double> inducing_targets(const Dataset<T>& data, const InducingSet<T>& inducing) {
  std::vector<double> y(inducing.indices.size());
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = data.y.at(inducing.indices[j]);
  return y;
}

}  // namespace falkon

#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <vector>

#include "falkon/matrix.hpp"
#include "falkon/ooc/memory.hpp"
#include "falkon/ooc/tiles.hpp"

namespace falkon::ooc {

enum class Uplo { kLower, kUpper };
enum class Side { kLeft, kRight };
enum class Op { kNoTrans, kTrans };

/// A triangular operand stored in one triangle of a row-major n x n host
/// buffer. When `diag` is set it replaces the stored diagonal on reads, which
/// lets two factors share a buffer whose diagonal holds only one of them.
template <typename T>
struct TriangleRef {
  T* data = nullptr;
  std::size_t n = 0;
  Uplo uplo = Uplo::kLower;
  const T* diag = nullptr;
};

struct OocOptions {
  std::chrono::milliseconds deadlock_timeout{60000};
  bool record_trace = false;
};

/// What a tiled operation did, for tests and benchmarks.
struct OocReport {
  std::size_t tiles = 0;
  std::vector<int> final_counts;  // N x N work-table counters (Cholesky)
  std::vector<TileEvent> trace;   // populated when OocOptions::record_trace
  std::size_t barrier_rounds = 0; // LAUUM rendezvous count
};

/// Post-processing of a LAUUM result: out = alpha * U U^T + shift * I.
/// `column_weights` (length n, optional) scales column k of U by w[k] before
/// the product, giving U diag(w^2) U^T.
struct LauumEpilogue {
  double alpha = 1.0;
  double shift = 0.0;
  std::span<const double> column_weights{};
};

/// Factors the `uplo` triangle in place: lower gives L L^T = A, upper gives
/// R^T R = A. The other triangle is not touched. Throws NotPositiveDefinite
/// naming the failing block column.
template <typename T>
OocReport ooc_cholesky(TriangleRef<T> a, const TileLayout& layout, const MemoryBudget& budget,
                       TransferLedger& ledger, const OocOptions& options = {});

/// Triangular product of `in` with its transpose (upper: U U^T, lower: L^T L),
/// written into the `out` triangle. `out` may be the same triangle as `in`
/// (in-place, with a per-row rendezvous) or a triangle that does not overlap
/// it. Only the `out` triangle is written.
template <typename T>
OocReport ooc_lauum(TriangleRef<T> in, TriangleRef<T> out, const TileLayout& layout,
                    const MemoryBudget& budget, TransferLedger& ledger,
                    const LauumEpilogue& epilogue = {}, const OocOptions& options = {});

/// Solves op(Tri) X = B (left) or X op(Tri) = B (right) in place. B is
/// row-major: n x k for the left side, k x n for the right side. V is the
/// precision of B; tiles of Tri are widened to V in scratch.
template <typename T, typename V>
void host_triangular_solve(TriangleRef<const T> tri, V* b, std::size_t k, Side side, Op op,
                           const MemoryBudget& budget, TransferLedger* ledger = nullptr);

// Matrix-level conveniences over the functions above.

template <typename T>
OocReport ooc_cholesky_inplace(DenseMatrix<T>& a, const TileLayout& layout,
                               const MemoryBudget& budget, TransferLedger& ledger,
                               Uplo uplo = Uplo::kLower, const OocOptions& options = {});

template <typename T>
OocReport ooc_lauum_inplace(DenseMatrix<T>& u, const TileLayout& layout,
                            const MemoryBudget& budget, TransferLedger& ledger,
                            Uplo uplo = Uplo::kUpper, const OocOptions& options = {});

template <typename T>
OocReport ooc_lauum_outofplace(const DenseMatrix<T>& u, DenseMatrix<T>& out,
                               const TileLayout& layout, const MemoryBudget& budget,
                               TransferLedger& ledger, Uplo uplo = Uplo::kUpper,
                               const OocOptions& options = {});

template <typename T>
void host_triangular_solve(const DenseMatrix<T>& tri, Uplo uplo, DenseMatrix<T>& b, Side side,
                           Op op, const MemoryBudget& budget, TransferLedger* ledger = nullptr);

}  // namespace falkon::ooc

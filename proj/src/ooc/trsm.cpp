#include <algorithm>
#include <string>
#include <vector>

#include "falkon/ooc/ops.hpp"
#include "ooc/backend.hpp"
#include "ooc/tiled_host.hpp"

namespace falkon::ooc {

namespace {

using detail::Part;
using detail::TiledHost;

constexpr std::size_t kMaxRhsChunk = 256;

struct SolveGeometry {
  std::size_t t;   // tile side
  std::size_t kb;  // right-hand-side columns per chunk
};

// Largest t with t^2 + 2 t kb scratch words (of V) inside G words of T.
template <typename T, typename V>
SolveGeometry solve_geometry(std::size_t n, std::size_t k, const MemoryBudget& budget) {
  const std::size_t capacity = budget.scratch_elements_per_worker * sizeof(T) / sizeof(V);
  for (std::size_t kb = std::min(k, kMaxRhsChunk); kb >= 1; kb = kb / 2) {
    std::size_t t = std::min(n, capacity);
    while (t >= 1 && t * t + 2 * t * kb > capacity) --t;
    if (t >= 1 && (t >= std::min<std::size_t>(n, 16) || kb == 1)) return {t, kb};
    if (kb == 1) break;
  }
  throw BudgetExceeded("scratch budget too small for a triangular solve");
}

template <typename T, typename V>
void solve_left(TriangleRef<const T> tri, V* b, std::size_t k, Op op, const MemoryBudget& budget,
                TransferLedger* ledger) {
  const std::size_t n = tri.n;
  const bool lower = (tri.uplo == Uplo::kLower) != (op == Op::kTrans);
  const auto geo = solve_geometry<T, V>(n, k, budget);
  const TileLayout layout = make_tile_layout(n, geo.t, 1);
  const TiledHost<T> host(const_cast<T*>(tri.data), n, op == Op::kTrans, tri.diag, layout, ledger);
  const std::size_t N = layout.tiles;
  const std::size_t chunks = (k + geo.kb - 1) / geo.kb;
  const std::size_t workers = std::min(budget.workers, chunks);
  if (ledger) ledger->ensure_workers(workers);

  run_workers(
      workers,
      [&](std::size_t p) {
        ScratchArena arena(p, budget.scratch_elements_per_worker, sizeof(T), ledger);
        auto m = arena.allocate<V>(geo.t * geo.t);
        auto bi = arena.allocate<V>(geo.t * geo.kb);
        auto xj = arena.allocate<V>(geo.t * geo.kb);
        auto move_rows = [&](std::size_t tile, std::size_t c0, std::size_t kc, V* buf, bool in) {
          const std::size_t r0 = layout.begin(tile), rows = layout.extent(tile);
          for (std::size_t a = 0; a < rows; ++a) {
            V* host_row = b + (r0 + a) * k + c0;
            if (in)
              std::copy_n(host_row, kc, buf + a * kc);
            else
              std::copy_n(buf + a * kc, kc, host_row);
          }
          if (ledger) {
            if (in)
              ledger->charge_host_to_scratch(rows * kc);
            else
              ledger->charge_scratch_to_host(rows * kc);
          }
        };
        for (std::size_t chunk = p; chunk < chunks; chunk += workers) {
          const std::size_t c0 = chunk * geo.kb, kc = std::min(geo.kb, k - c0);
          const int ikc = static_cast<int>(kc);
          for (std::size_t step = 0; step < N; ++step) {
            const std::size_t i = lower ? step : N - 1 - step;
            const int ei = static_cast<int>(layout.extent(i));
            move_rows(i, c0, kc, bi.data(), true);
            for (std::size_t s = 0; s < step; ++s) {
              const std::size_t j = lower ? s : N - 1 - s;
              const int ej = static_cast<int>(layout.extent(j));
              host.load(i, j, m.data(), Part::kFull);
              move_rows(j, c0, kc, xj.data(), true);
              backend::gemm_nn(ei, ikc, ej, V{-1}, m.data(), ej, xj.data(), ikc, V{1}, bi.data(),
                               ikc);
            }
            host.load(i, i, m.data(), lower ? Part::kLower : Part::kUpper);
            backend::trsm_left(lower, ei, ikc, m.data(), ei, bi.data(), ikc);
            move_rows(i, c0, kc, bi.data(), false);
          }
        }
      },
      {});
}

}  // namespace

template <typename T, typename V>
void host_triangular_solve(TriangleRef<const T> tri, V* b, std::size_t k, Side side, Op op,
                           const MemoryBudget& budget, TransferLedger* ledger) {
  budget.validate();
  if (!tri.data) throw InvalidArgument("null triangular buffer");
  if (tri.n == 0 || k == 0) return;
  if (!b) throw InvalidArgument("null right-hand side");
  for (std::size_t i = 0; i < tri.n; ++i) {
    const T d = tri.diag ? tri.diag[i] : tri.data[i * tri.n + i];
    if (d == T{0})
      throw SingularMatrix("triangular matrix has a zero diagonal entry at index " +
                           std::to_string(i));
  }
  backend::init_single_threaded();
  if (side == Side::kLeft) {
    solve_left<T, V>(tri, b, k, op, budget, ledger);
    return;
  }
  // X op(A) = B  <=>  op(A)^T X^T = B^T, with B given k x n.
  const std::size_t n = tri.n;
  std::vector<V> bt(n * k);
  HostAllocation hold(ledger, HostBuffer::kVector, n * k);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < n; ++c) bt[c * k + r] = b[r * n + c];
  solve_left<T, V>(tri, bt.data(), k, op == Op::kTrans ? Op::kNoTrans : Op::kTrans, budget, ledger);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < n; ++c) b[r * n + c] = bt[c * k + r];
}

template <typename T>
void host_triangular_solve(const DenseMatrix<T>& tri, Uplo uplo, DenseMatrix<T>& b, Side side,
                           Op op, const MemoryBudget& budget, TransferLedger* ledger) {
  if (tri.rows() != tri.cols()) throw DimensionMismatch("triangular matrix must be square");
  const std::size_t n = tri.rows();
  if (side == Side::kLeft ? b.rows() != n : b.cols() != n)
    throw DimensionMismatch("right-hand side does not conform with the triangular matrix");
  const std::size_t k = side == Side::kLeft ? b.cols() : b.rows();
  host_triangular_solve<T, T>(TriangleRef<const T>{tri.data(), n, uplo, nullptr}, b.data(), k,
                              side, op, budget, ledger);
}

template void host_triangular_solve<float, float>(TriangleRef<const float>, float*, std::size_t,
                                                  Side, Op, const MemoryBudget&, TransferLedger*);
template void host_triangular_solve<float, double>(TriangleRef<const float>, double*, std::size_t,
                                                   Side, Op, const MemoryBudget&, TransferLedger*);
template void host_triangular_solve<double, double>(TriangleRef<const double>, double*,
                                                    std::size_t, Side, Op, const MemoryBudget&,
                                                    TransferLedger*);
template void host_triangular_solve<float>(const DenseMatrix<float>&, Uplo, DenseMatrix<float>&,
                                           Side, Op, const MemoryBudget&, TransferLedger*);
template void host_triangular_solve<double>(const DenseMatrix<double>&, Uplo,
                                            DenseMatrix<double>&, Side, Op, const MemoryBudget&,
                                            TransferLedger*);

}  // namespace falkon::ooc

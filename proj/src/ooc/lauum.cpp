#include <algorithm>
#include <optional>
#include <vector>

#include "falkon/ooc/ops.hpp"
#include "ooc/backend.hpp"
#include "ooc/tiled_host.hpp"

namespace falkon::ooc {

namespace {

using detail::Part;
using detail::TiledHost;

// Output tile (i, j), j >= i, of U U^T is sum_{k >= j} U(i, k) U(j, k)^T.
// Output column j belongs to worker j mod P. Each worker caches the part of
// block row i it needs, then streams block rows j >= i one tile at a time.
template <typename T>
class LauumWorker {
 public:
  LauumWorker(std::size_t p, const TiledHost<T>& in, TiledHost<T>& out,
              CancellableBarrier* barrier, const LauumEpilogue& epilogue,
              const MemoryBudget& budget, TransferLedger& ledger)
      : p_(p), P_(budget.workers), in_(in), out_(out), barrier_(barrier), epi_(epilogue),
        layout_(in.layout()), arena_(p, budget.scratch_elements_per_worker, sizeof(T), &ledger),
        weights_(epilogue.column_weights.empty() ? nullptr : epilogue.column_weights.data()) {}

  void run() {
    const std::size_t N = layout_.tiles, tt = layout_.t * layout_.t;
    for (std::size_t i = 0; i < N; ++i) {
      std::size_t jmin = i + (P_ + p_ - i % P_) % P_;
      ScratchBuffer<T> row;
      if (jmin < N) {
        row = arena_.allocate<T>((N - jmin) * tt);
        for (std::size_t k = jmin; k < N; ++k)
          in_.load(i, k, tile(row, k - jmin), k == i ? Part::kUpper : Part::kFull, weights_);
        if (d_.empty() && N > 1) d_ = arena_.allocate<T>(tt);
      }
      if (barrier_) barrier_->arrive_and_wait();
      for (std::size_t j = jmin; j < N; j += P_) {
        T* cij = tile(row, j - jmin);
        if (j == i)
          diagonal(i, row, jmin, cij);
        else
          off_diagonal(i, j, row, jmin, cij);
      }
    }
  }

 private:
  int ext(std::size_t i) const { return static_cast<int>(layout_.extent(i)); }
  T* tile(ScratchBuffer<T>& row, std::size_t slot) const {
    return row.data() + slot * layout_.t * layout_.t;
  }

  void diagonal(std::size_t i, ScratchBuffer<T>& row, std::size_t jmin, T* cii) {
    backend::lauum_upper(ext(i), cii, ext(i));
    for (std::size_t k = i + 1; k < layout_.tiles; ++k)
      backend::syrk(false, ext(i), ext(k), T{1}, tile(row, k - jmin), ext(k), T{1}, cii, ext(i));
    finish(cii, layout_.extent(i), layout_.extent(i), true);
    out_.store(i, i, cii, Part::kUpper);
  }

  void off_diagonal(std::size_t i, std::size_t j, ScratchBuffer<T>& row, std::size_t jmin,
                    T* cij) {
    in_.load(j, j, d_.data(), Part::kUpper, weights_);
    backend::trmm_right_upper_trans(ext(i), ext(j), d_.data(), ext(j), cij, ext(j));
    for (std::size_t k = j + 1; k < layout_.tiles; ++k) {
      in_.load(j, k, d_.data(), Part::kFull, weights_);
      backend::gemm_nt(ext(i), ext(j), ext(k), T{1}, tile(row, k - jmin), ext(k), d_.data(),
                       ext(k), T{1}, cij, ext(j));
    }
    finish(cij, layout_.extent(i), layout_.extent(j), false);
    out_.store(i, j, cij, Part::kFull);
  }

  void finish(T* c, std::size_t rows, std::size_t cols, bool diag) const {
    if (epi_.alpha != 1.0) {
      const T a = static_cast<T>(epi_.alpha);
      for (std::size_t q = 0; q < rows * cols; ++q) c[q] *= a;
    }
    if (diag && epi_.shift != 0.0) {
      const T s = static_cast<T>(epi_.shift);
      for (std::size_t q = 0; q < rows; ++q) c[q * cols + q] += s;
    }
  }

  std::size_t p_, P_;
  const TiledHost<T>& in_;
  TiledHost<T>& out_;
  CancellableBarrier* barrier_;
  const LauumEpilogue& epi_;
  const TileLayout& layout_;
  ScratchArena arena_;
  const double* weights_;
  ScratchBuffer<T> d_;
};

}  // namespace

template <typename T>
OocReport ooc_lauum(TriangleRef<T> in, TriangleRef<T> out, const TileLayout& layout,
                    const MemoryBudget& budget, TransferLedger& ledger,
                    const LauumEpilogue& epilogue, const OocOptions& options) {
  if (!in.data || !out.data) throw InvalidArgument("null matrix buffer");
  if (in.n != out.n) throw DimensionMismatch("LAUUM input and output sides differ");
  budget.validate();
  if (layout.n != in.n) throw DimensionMismatch("tile layout side does not match the matrix side");
  if (layout.workers() != budget.workers)
    throw InvalidArgument("tile layout worker count does not match the budget");
  if (out.diag) throw InvalidArgument("LAUUM output cannot carry a diagonal override");
  if (!epilogue.column_weights.empty() && epilogue.column_weights.size() != in.n)
    throw DimensionMismatch("LAUUM column weights must have one entry per column");

  const bool same_buffer = in.data == out.data;
  const bool in_place = same_buffer && in.uplo == out.uplo;
  if (in_place && in.diag) throw InvalidArgument("in-place LAUUM cannot use a diagonal override");
  // Opposite triangles of one buffer share the diagonal, which the output
  // overwrites; the input diagonal must then come from elsewhere.
  if (same_buffer && !in_place && !in.diag)
    throw InvalidArgument("LAUUM input and output alias on the diagonal");

  backend::init_single_threaded();
  ledger.ensure_workers(budget.workers);

  TiledHost<T> host_in(in.data, in.n, in.uplo == Uplo::kLower, in.diag, layout, &ledger);
  TiledHost<T> host_out(out.data, out.n, out.uplo == Uplo::kLower, nullptr, layout, &ledger);
  std::optional<CancellableBarrier> barrier;
  if (in_place) barrier.emplace(budget.workers, options.deadlock_timeout);

  run_workers(
      budget.workers,
      [&](std::size_t p) {
        LauumWorker<T>(p, host_in, host_out, barrier ? &*barrier : nullptr, epilogue, budget,
                       ledger)
            .run();
      },
      [&] {
        if (barrier) barrier->abort();
      });

  OocReport report;
  report.tiles = layout.tiles;
  report.barrier_rounds = barrier ? barrier->generations() : 0;
  return report;
}

template <typename T>
OocReport ooc_lauum_inplace(DenseMatrix<T>& u, const TileLayout& layout,
                            const MemoryBudget& budget, TransferLedger& ledger, Uplo uplo,
                            const OocOptions& options) {
  if (u.rows() != u.cols()) throw DimensionMismatch("LAUUM input must be square");
  TriangleRef<T> ref{u.data(), u.rows(), uplo, nullptr};
  return ooc_lauum(ref, ref, layout, budget, ledger, {}, options);
}

template <typename T>
OocReport ooc_lauum_outofplace(const DenseMatrix<T>& u, DenseMatrix<T>& out,
                               const TileLayout& layout, const MemoryBudget& budget,
                               TransferLedger& ledger, Uplo uplo, const OocOptions& options) {
  if (&u == &out || u.data() == out.data())
    throw InvalidArgument("out-of-place LAUUM input and output must be distinct buffers");
  if (u.rows() != u.cols()) throw DimensionMismatch("LAUUM input must be square");
  if (out.rows() != u.rows() || out.cols() != u.cols())
    throw DimensionMismatch("LAUUM output must match the input shape");
  TriangleRef<T> in{const_cast<T*>(u.data()), u.rows(), uplo, nullptr};
  TriangleRef<T> dst{out.data(), out.rows(), uplo, nullptr};
  return ooc_lauum(in, dst, layout, budget, ledger, {}, options);
}

#define FALKON_INSTANTIATE_LAUUM(T)                                                          \
  template OocReport ooc_lauum<T>(TriangleRef<T>, TriangleRef<T>, const TileLayout&,         \
                                  const MemoryBudget&, TransferLedger&, const LauumEpilogue&, \
                                  const OocOptions&);                                        \
  template OocReport ooc_lauum_inplace<T>(DenseMatrix<T>&, const TileLayout&,                \
                                          const MemoryBudget&, TransferLedger&, Uplo,        \
                                          const OocOptions&);                                \
  template OocReport ooc_lauum_outofplace<T>(const DenseMatrix<T>&, DenseMatrix<T>&,         \
                                             const TileLayout&, const MemoryBudget&,         \
                                             TransferLedger&, Uplo, const OocOptions&);

FALKON_INSTANTIATE_LAUUM(float)
FALKON_INSTANTIATE_LAUUM(double)

}  // namespace falkon::ooc

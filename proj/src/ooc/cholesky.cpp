#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "falkon/ooc/ops.hpp"
#include "ooc/backend.hpp"
#include "ooc/tiled_host.hpp"

namespace falkon::ooc {

namespace {

using detail::Part;
using detail::TiledHost;

void check_layout(const TileLayout& layout, std::size_t n, const MemoryBudget& budget) {
  budget.validate();
  if (layout.n != n) throw DimensionMismatch("tile layout side does not match the matrix side");
  if (layout.workers() != budget.workers)
    throw InvalidArgument("tile layout worker count does not match the budget");
}

template <typename T>
bool all_finite(const T* p, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

// One worker's share of the tiled Cholesky. Block rows owned by this worker
// are factored column by column; each tile's progress counter gates readers.
template <typename T>
class CholeskyWorker {
 public:
  CholeskyWorker(std::size_t p, TiledHost<T>& host, WorkTable& table, const MemoryBudget& budget,
                 TransferLedger& ledger)
      : host_(host), table_(table), layout_(host.layout()),
        arena_(p, budget.scratch_elements_per_worker, sizeof(T), &ledger),
        owned_(layout_.block_allocs[p]) {}

  void run() {
    const std::size_t N = layout_.tiles, tt = layout_.t * layout_.t;
    e_ = arena_.allocate<T>(tt);
    if (N > 1) {
      d_ = arena_.allocate<T>(tt);
      lr_ = arena_.allocate<T>(tt);
    }
    for (std::size_t c = 0; c < N; ++c) {
      cache_.clear();
      cache_.resize(N);
      factor_column(c);
      update_trailing(c);
    }
    cache_.clear();
  }

 private:
  int ext(std::size_t i) const { return static_cast<int>(layout_.extent(i)); }
  static int as_count(std::size_t c) { return static_cast<int>(c); }

  void keep(std::size_t row, const T* src, std::size_t count) {
    if (auto buf = arena_.try_allocate<T>(layout_.t * layout_.t)) {
      std::copy_n(src, count, buf->data());
      cache_[row] = std::move(buf);
    }
  }

  // Tile (row, c) of the factored column, from the column cache or the host.
  const T* column_tile(std::size_t row, std::size_t c, Part part, T* fallback) {
    if (cache_[row]) return cache_[row]->data();
    const std::size_t tt = layout_.t * layout_.t;
    if (auto buf = arena_.try_allocate<T>(tt)) {
      host_.load(row, c, buf->data(), part);
      cache_[row] = std::move(buf);
      return cache_[row]->data();
    }
    host_.load(row, c, fallback, part);
    return fallback;
  }

  void factor_column(std::size_t c) {
    for (std::size_t r : owned_) {
      if (r < c) continue;
      if (r == c) {
        table_.wait_at_least(c, c, as_count(c));
        host_.load(c, c, e_.data(), Part::kLower);
        const int info = backend::potrf_lower(ext(c), e_.data(), ext(c));
        if (info != 0 || !all_finite(e_.data(), layout_.extent(c) * layout_.extent(c)))
          throw NotPositiveDefinite(c);
        host_.store(c, c, e_.data(), Part::kLower);
        table_.increment(c, c);
        keep(c, e_.data(), layout_.extent(c) * layout_.extent(c));
      } else {
        table_.wait_at_least(c, c, as_count(c) + 1);
        const T* lcc = column_tile(c, c, Part::kLower, d_.data());
        table_.wait_at_least(r, c, as_count(c));
        host_.load(r, c, e_.data(), Part::kFull);
        backend::trsm_right_lower_trans(ext(r), ext(c), lcc, ext(c), e_.data(), ext(c));
        host_.store(r, c, e_.data(), Part::kFull);
        table_.increment(r, c);
        keep(r, e_.data(), layout_.extent(r) * layout_.extent(c));
      }
    }
  }

  // Applies column c to every owned tile (r, y) with c < y <= r:
  // E(r, y) -= L(r, c) L(y, c)^T.
  void update_trailing(std::size_t c) {
    // The diagonal tile is not a trailing operand.
    cache_[c].reset();
    for (std::size_t r : owned_) {
      if (r <= c) continue;
      const T* lrc = cache_[r] ? cache_[r]->data() : nullptr;
      if (!lrc) {
        host_.load(r, c, lr_.data(), Part::kFull);
        lrc = lr_.data();
      }
      for (std::size_t y = c + 1; y <= r; ++y) {
        table_.wait_at_least(r, y, as_count(c));
        const Part part = y == r ? Part::kLower : Part::kFull;
        host_.load(r, y, e_.data(), part);
        if (y == r) {
          backend::syrk(true, ext(r), ext(c), T{-1}, lrc, ext(c), T{1}, e_.data(), ext(r));
        } else {
          table_.wait_at_least(y, c, as_count(c) + 1);
          const T* lyc = column_tile(y, c, Part::kFull, d_.data());
          backend::gemm_nt(ext(r), ext(y), ext(c), T{-1}, lrc, ext(c), lyc, ext(c), T{1},
                           e_.data(), ext(y));
        }
        host_.store(r, y, e_.data(), part);
        table_.increment(r, y);
      }
    }
  }

  TiledHost<T>& host_;
  WorkTable& table_;
  const TileLayout& layout_;
  ScratchArena arena_;
  const std::vector<std::size_t>& owned_;
  ScratchBuffer<T> e_, d_, lr_;
  std::vector<std::optional<ScratchBuffer<T>>> cache_;
};

}  // namespace

template <typename T>
OocReport ooc_cholesky(TriangleRef<T> a, const TileLayout& layout, const MemoryBudget& budget,
                       TransferLedger& ledger, const OocOptions& options) {
  if (!a.data) throw InvalidArgument("null matrix buffer");
  if (a.diag) throw InvalidArgument("in-place Cholesky cannot use a diagonal override");
  check_layout(layout, a.n, budget);
  backend::init_single_threaded();
  ledger.ensure_workers(budget.workers);

  TiledHost<T> host(a.data, a.n, a.uplo == Uplo::kUpper, nullptr, layout, &ledger);
  WorkTable table(layout.tiles, options.deadlock_timeout, options.record_trace);
  run_workers(
      budget.workers,
      [&](std::size_t p) { CholeskyWorker<T>(p, host, table, budget, ledger).run(); },
      [&] { table.abort(); });

  OocReport report;
  report.tiles = layout.tiles;
  report.final_counts = table.snapshot();
  report.trace = table.trace();
  return report;
}

template <typename T>
OocReport ooc_cholesky_inplace(DenseMatrix<T>& a, const TileLayout& layout,
                               const MemoryBudget& budget, TransferLedger& ledger, Uplo uplo,
                               const OocOptions& options) {
  if (a.rows() != a.cols()) throw DimensionMismatch("Cholesky input must be square");
  return ooc_cholesky(TriangleRef<T>{a.data(), a.rows(), uplo, nullptr}, layout, budget, ledger,
                      options);
}

#define FALKON_INSTANTIATE_CHOLESKY(T)                                                      \
  template OocReport ooc_cholesky<T>(TriangleRef<T>, const TileLayout&, const MemoryBudget&, \
                                     TransferLedger&, const OocOptions&);                   \
  template OocReport ooc_cholesky_inplace<T>(DenseMatrix<T>&, const TileLayout&,            \
                                             const MemoryBudget&, TransferLedger&, Uplo,    \
                                             const OocOptions&);

FALKON_INSTANTIATE_CHOLESKY(float)
FALKON_INSTANTIATE_CHOLESKY(double)

}  // namespace falkon::ooc

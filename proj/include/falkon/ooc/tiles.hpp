#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <vector>

#include "falkon/error.hpp"
#include "falkon/ooc/memory.hpp"

namespace falkon::ooc {

/// Square tiling of an n x n matrix into N = ceil(n/t) block rows, with
/// block row i owned by worker i mod P. Indices are zero-based.
struct TileLayout {
  std::size_t n = 0;
  std::size_t t = 0;
  std::size_t tiles = 0;  // N
  std::vector<std::vector<std::size_t>> block_allocs;

  std::size_t workers() const noexcept { return block_allocs.size(); }
  std::size_t begin(std::size_t i) const noexcept { return i * t; }
  /// Side of tile i; the last tile may be ragged.
  std::size_t extent(std::size_t i) const noexcept {
    return i + 1 < tiles ? t : n - (tiles - 1) * t;
  }
  std::size_t owner(std::size_t i) const noexcept { return i % workers(); }
};

TileLayout make_tile_layout(std::size_t n, std::size_t t, std::size_t workers);

/// Largest t with (ceil(n/t) + 1) * t^2 <= G. Throws BudgetExceeded when even
/// t = 1 does not fit.
TileLayout plan_tiles(std::size_t n, const MemoryBudget& budget);

/// Raised inside workers that were waiting when another worker failed.
class OperationAborted : public Error {
 public:
  OperationAborted() : Error("operation aborted by a failing worker") {}
};

/// One event in a work-table trace: tile (i, j) reached `value`.
struct TileEvent {
  std::uint32_t i, j;
  std::int32_t value;
};

/// Per-tile progress counters. Waiters block on a condition variable; a wait
/// that sees no counter advance anywhere for `timeout` raises DeadlockError.
class WorkTable {
 public:
  WorkTable(std::size_t tiles, std::chrono::milliseconds timeout, bool record_trace = false);

  std::size_t tiles() const noexcept { return n_; }
  int value(std::size_t i, std::size_t j) const;
  void increment(std::size_t i, std::size_t j);
  /// Blocks until counter (i, j) >= target.
  void wait_at_least(std::size_t i, std::size_t j, int target);
  void abort();
  bool aborted() const;

  std::vector<int> snapshot() const;
  std::vector<TileEvent> trace() const;

 private:
  std::size_t n_;
  std::chrono::milliseconds timeout_;
  bool record_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<int> counts_;
  std::vector<TileEvent> trace_;
  std::uint64_t epoch_ = 0;
  bool aborted_ = false;
};

/// Reusable barrier for a fixed party count, with abort and deadlock timeout.
class CancellableBarrier {
 public:
  CancellableBarrier(std::size_t parties, std::chrono::milliseconds timeout);
  void arrive_and_wait();
  void abort();
  std::size_t generations() const;

 private:
  std::size_t parties_;
  std::chrono::milliseconds timeout_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t waiting_ = 0;
  std::size_t generation_ = 0;
  bool aborted_ = false;
};

/// Runs fn(p) for p in [0, workers) on separate threads (inline when
/// workers == 1). On the first failure `on_abort` is called so that blocked
/// peers can unwind; the first non-abort exception is rethrown after join.
void run_workers(std::size_t workers, const std::function<void(std::size_t)>& fn,
                 const std::function<void()>& on_abort);

}  // namespace falkon::ooc

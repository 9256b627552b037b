#include "falkon/ooc/tiles.hpp"

#include <exception>
#include <string>
#include <thread>

namespace falkon::ooc {

TileLayout make_tile_layout(std::size_t n, std::size_t t, std::size_t workers) {
  if (n == 0) throw InvalidArgument("matrix side must be at least 1");
  if (t == 0) throw InvalidArgument("tile side must be at least 1");
  if (workers == 0) throw InvalidArgument("at least one worker is required");
  TileLayout layout;
  layout.n = n;
  layout.t = std::min(t, n);
  layout.tiles = (n + layout.t - 1) / layout.t;
  layout.block_allocs.resize(workers);
  for (std::size_t i = 0; i < layout.tiles; ++i) layout.block_allocs[i % workers].push_back(i);
  return layout;
}

TileLayout plan_tiles(std::size_t n, const MemoryBudget& budget) {
  budget.validate();
  if (n == 0) throw InvalidArgument("matrix side must be at least 1");
  const std::size_t g = budget.scratch_elements_per_worker;
  for (std::size_t t = n; t >= 1; --t) {
    const std::size_t blocks = (n + t - 1) / t;
    if ((blocks + 1) * t * t <= g) return make_tile_layout(n, t, budget.workers);
  }
  throw BudgetExceeded("scratch budget of " + std::to_string(g) +
                       " elements cannot hold one block column plus a tile");
}

WorkTable::WorkTable(std::size_t tiles, std::chrono::milliseconds timeout, bool record_trace)
    : n_(tiles), timeout_(timeout), record_(record_trace), counts_(tiles * tiles, 0) {}

int WorkTable::value(std::size_t i, std::size_t j) const {
  std::lock_guard lock(mutex_);
  return counts_[i * n_ + j];
}

void WorkTable::increment(std::size_t i, std::size_t j) {
  {
    std::lock_guard lock(mutex_);
    const int v = ++counts_[i * n_ + j];
    ++epoch_;
    if (record_)
      trace_.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), v});
  }
  cv_.notify_all();
}

void WorkTable::wait_at_least(std::size_t i, std::size_t j, int target) {
  std::unique_lock lock(mutex_);
  std::uint64_t seen = epoch_;
  while (counts_[i * n_ + j] < target) {
    if (aborted_) throw OperationAborted();
    if (cv_.wait_for(lock, timeout_) == std::cv_status::timeout) {
      if (aborted_) throw OperationAborted();
      if (counts_[i * n_ + j] >= target) break;
      if (epoch_ == seen)
        throw DeadlockError("no work-table progress while waiting on tile (" +
                            std::to_string(i) + "," + std::to_string(j) + ") for count " +
                            std::to_string(target));
      seen = epoch_;
    }
  }
}

void WorkTable::abort() {
  {
    std::lock_guard lock(mutex_);
    aborted_ = true;
  }
  cv_.notify_all();
}

bool WorkTable::aborted() const {
  std::lock_guard lock(mutex_);
  return aborted_;
}

std::vector<int> WorkTable::snapshot() const {
  std::lock_guard lock(mutex_);
  return counts_;
}

std::vector<TileEvent> WorkTable::trace() const {
  std::lock_guard lock(mutex_);
  return trace_;
}

CancellableBarrier::CancellableBarrier(std::size_t parties, std::chrono::milliseconds timeout)
    : parties_(parties), timeout_(timeout) {}

void CancellableBarrier::arrive_and_wait() {
  std::unique_lock lock(mutex_);
  if (aborted_) throw OperationAborted();
  const std::size_t gen = generation_;
  if (++waiting_ == parties_) {
    waiting_ = 0;
    ++generation_;
    lock.unlock();
    cv_.notify_all();
    return;
  }
  while (generation_ == gen) {
    if (aborted_) throw OperationAborted();
    if (cv_.wait_for(lock, timeout_) == std::cv_status::timeout && generation_ == gen &&
        !aborted_)
      throw DeadlockError("barrier timed out with " + std::to_string(waiting_) + " of " +
                          std::to_string(parties_) + " workers arrived");
  }
}

void CancellableBarrier::abort() {
  {
    std::lock_guard lock(mutex_);
    aborted_ = true;
  }
  cv_.notify_all();
}

std::size_t CancellableBarrier::generations() const {
  std::lock_guard lock(mutex_);
  return generation_;
}

void run_workers(std::size_t workers, const std::function<void(std::size_t)>& fn,
                 const std::function<void()>& on_abort) {
  if (workers == 1) {
    fn(0);
    return;
  }
  std::mutex err_mutex;
  std::exception_ptr primary, secondary;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t p = 0; p < workers; ++p) {
    threads.emplace_back([&, p] {
      try {
        fn(p);
      } catch (const OperationAborted&) {
        std::lock_guard lock(err_mutex);
        if (!secondary) secondary = std::current_exception();
      } catch (...) {
        {
          std::lock_guard lock(err_mutex);
          if (!primary) primary = std::current_exception();
        }
        if (on_abort) on_abort();
      }
    });
  }
  for (auto& th : threads) th.join();
  if (primary) std::rethrow_exception(primary);
  if (secondary) std::rethrow_exception(secondary);
}

}  // namespace falkon::ooc

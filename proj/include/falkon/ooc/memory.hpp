#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "falkon/error.hpp"

namespace falkon::ooc {

/// Per-worker scratch budget G (in working-precision elements) and worker
/// count P.
struct MemoryBudget {
  std::size_t scratch_elements_per_worker = std::size_t{1} << 22;
  std::size_t workers = 1;

  void validate() const {
    if (scratch_elements_per_worker == 0)
      throw InvalidArgument("memory budget must be positive");
    if (workers == 0) throw InvalidArgument("at least one worker is required");
  }
};

/// Categories of host-resident buffers tracked by the allocation audit.
enum class HostBuffer : std::size_t {
  kPreconditioner = 0,  // the m x m factor storage
  kVector,              // O(m) or O(n) vectors
  kDataBatch,           // staged input rows
  kKernelBlock,         // any piece of K_nm or K_mm on the host
  kCount
};

/// Counts data movement between the host store and worker scratch, per-worker
/// scratch high-water marks, and host allocations by category.
///
/// All counters are atomics; a ledger may be shared by concurrently running
/// workers. Worker slots must be sized (ensure_workers) before threads start.
class TransferLedger {
 public:
  explicit TransferLedger(std::size_t workers = 1) { ensure_workers(workers); }

  TransferLedger(const TransferLedger&) = delete;
  TransferLedger& operator=(const TransferLedger&) = delete;

  void ensure_workers(std::size_t workers);
  std::size_t workers() const noexcept { return workers_; }

  void charge_host_to_scratch(std::size_t elements) noexcept {
    host_to_scratch_.fetch_add(elements, std::memory_order_relaxed);
  }
  void charge_scratch_to_host(std::size_t elements) noexcept {
    scratch_to_host_.fetch_add(elements, std::memory_order_relaxed);
  }
  void note_scratch_in_use(std::size_t worker, std::size_t elements) noexcept;

  std::uint64_t host_to_scratch_elements() const noexcept { return host_to_scratch_.load(); }
  std::uint64_t scratch_to_host_elements() const noexcept { return scratch_to_host_.load(); }
  std::uint64_t peak_scratch(std::size_t worker) const;
  std::vector<std::uint64_t> peak_scratch_per_worker() const;

  void host_alloc(HostBuffer kind, std::size_t elements);
  void host_free(HostBuffer kind, std::size_t elements);
  std::uint64_t host_live_count(HostBuffer kind) const;
  std::uint64_t host_peak_count(HostBuffer kind) const;
  std::uint64_t host_peak_elements(HostBuffer kind) const;
  std::uint64_t host_total_count(HostBuffer kind) const;
  /// Host-resident K_nm elements ever allocated (the residency audit).
  std::uint64_t host_knm_elements() const { return host_peak_elements(HostBuffer::kKernelBlock); }

  void reset();

 private:
  struct HostStats {
    std::uint64_t live_count = 0, live_elements = 0;
    std::uint64_t peak_count = 0, peak_elements = 0, total_count = 0;
  };

  std::size_t workers_ = 0;
  std::unique_ptr<std::atomic<std::uint64_t>[]> peak_;
  std::atomic<std::uint64_t> host_to_scratch_{0};
  std::atomic<std::uint64_t> scratch_to_host_{0};
  mutable std::mutex host_mutex_;
  std::array<HostStats, static_cast<std::size_t>(HostBuffer::kCount)> host_{};
};

/// RAII registration of a host buffer with a ledger.
class HostAllocation {
 public:
  HostAllocation() = default;
  HostAllocation(TransferLedger* ledger, HostBuffer kind, std::size_t elements)
      : ledger_(ledger), kind_(kind), elements_(elements) {
    if (ledger_) ledger_->host_alloc(kind_, elements_);
  }
  HostAllocation(HostAllocation&& o) noexcept { *this = std::move(o); }
  HostAllocation& operator=(HostAllocation&& o) noexcept {
    if (this != &o) {
      release();
      ledger_ = o.ledger_;
      kind_ = o.kind_;
      elements_ = o.elements_;
      o.ledger_ = nullptr;
    }
    return *this;
  }
  ~HostAllocation() { release(); }

  void release() {
    if (ledger_) ledger_->host_free(kind_, elements_);
    ledger_ = nullptr;
  }

 private:
  TransferLedger* ledger_ = nullptr;
  HostBuffer kind_ = HostBuffer::kVector;
  std::size_t elements_ = 0;
};

class ScratchArena;

/// A block of worker scratch. Returns its bytes to the arena on destruction.
template <typename U>
class ScratchBuffer {
 public:
  ScratchBuffer() = default;
  ScratchBuffer(ScratchArena* arena, std::size_t count, std::size_t bytes)
      : arena_(arena), data_(count), bytes_(bytes) {}
  ScratchBuffer(ScratchBuffer&& o) noexcept { *this = std::move(o); }
  ScratchBuffer& operator=(ScratchBuffer&& o) noexcept;
  ~ScratchBuffer();

  U* data() noexcept { return data_.data(); }
  const U* data() const noexcept { return data_.data(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<U> span() noexcept { return data_; }
  std::span<const U> span() const noexcept { return data_; }
  U& operator[](std::size_t i) { return data_[i]; }
  const U& operator[](std::size_t i) const { return data_[i]; }
  bool empty() const noexcept { return data_.empty(); }

 private:
  ScratchArena* arena_ = nullptr;
  std::vector<U> data_;
  std::size_t bytes_ = 0;
};

/// One worker's scratch memory, capped at G working-precision elements.
/// Thread-safe: a worker's pipeline stages share one arena.
class ScratchArena {
 public:
  ScratchArena(std::size_t worker, std::size_t capacity_elements, std::size_t element_bytes,
               TransferLedger* ledger)
      : worker_(worker),
        capacity_bytes_(capacity_elements * element_bytes),
        element_bytes_(element_bytes),
        ledger_(ledger) {}

  ScratchArena(const ScratchArena&) = delete;
  ScratchArena& operator=(const ScratchArena&) = delete;

  template <typename U>
  ScratchBuffer<U> allocate(std::size_t count) {
    const std::size_t bytes = count * sizeof(U);
    reserve(bytes, true);
    return ScratchBuffer<U>(this, count, bytes);
  }

  template <typename U>
  std::optional<ScratchBuffer<U>> try_allocate(std::size_t count) {
    const std::size_t bytes = count * sizeof(U);
    if (!reserve(bytes, false)) return std::nullopt;
    return ScratchBuffer<U>(this, count, bytes);
  }

  /// Reserves `bytes` of budget for memory held elsewhere (for instance a
  /// library routine's internal workspace) without allocating it here.
  ScratchBuffer<std::byte> charge(std::size_t bytes) {
    reserve(bytes, true);
    return ScratchBuffer<std::byte>(this, 0, bytes);
  }

  std::size_t capacity_elements() const noexcept { return capacity_bytes_ / element_bytes_; }
  std::size_t used_elements() const;
  std::size_t peak_elements() const;
  std::size_t worker() const noexcept { return worker_; }

  void release(std::size_t bytes) noexcept;

 private:
  bool reserve(std::size_t bytes, bool throw_on_failure);
  std::size_t to_elements(std::size_t bytes) const {
    return (bytes + element_bytes_ - 1) / element_bytes_;
  }

  std::size_t worker_;
  std::size_t capacity_bytes_;
  std::size_t element_bytes_;
  TransferLedger* ledger_;
  mutable std::mutex mutex_;
  std::size_t used_bytes_ = 0;
  std::size_t peak_bytes_ = 0;
};

template <typename U>
ScratchBuffer<U>& ScratchBuffer<U>::operator=(ScratchBuffer&& o) noexcept {
  if (this != &o) {
    if (arena_) arena_->release(bytes_);
    arena_ = o.arena_;
    data_ = std::move(o.data_);
    bytes_ = o.bytes_;
    o.arena_ = nullptr;
    o.bytes_ = 0;
  }
  return *this;
}

template <typename U>
ScratchBuffer<U>::~ScratchBuffer() {
  if (arena_) arena_->release(bytes_);
}

}  // namespace falkon::ooc

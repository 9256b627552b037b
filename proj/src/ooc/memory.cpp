#include "falkon/ooc/memory.hpp"

#include <algorithm>
#include <string>

namespace falkon::ooc {

void TransferLedger::ensure_workers(std::size_t workers) {
  if (workers <= workers_) return;
  auto grown = std::make_unique<std::atomic<std::uint64_t>[]>(workers);
  for (std::size_t p = 0; p < workers; ++p)
    grown[p].store(p < workers_ ? peak_[p].load() : 0);
  peak_ = std::move(grown);
  workers_ = workers;
}

void TransferLedger::note_scratch_in_use(std::size_t worker, std::size_t elements) noexcept {
  if (worker >= workers_) return;
  auto& slot = peak_[worker];
  std::uint64_t prev = slot.load(std::memory_order_relaxed);
  while (prev < elements &&
         !slot.compare_exchange_weak(prev, elements, std::memory_order_relaxed)) {
  }
}

std::uint64_t TransferLedger::peak_scratch(std::size_t worker) const {
  if (worker >= workers_) throw InvalidArgument("ledger has no worker " + std::to_string(worker));
  return peak_[worker].load();
}

std::vector<std::uint64_t> TransferLedger::peak_scratch_per_worker() const {
  std::vector<std::uint64_t> out(workers_);
  for (std::size_t p = 0; p < workers_; ++p) out[p] = peak_[p].load();
  return out;
}

void TransferLedger::host_alloc(HostBuffer kind, std::size_t elements) {
  std::lock_guard lock(host_mutex_);
  auto& s = host_[static_cast<std::size_t>(kind)];
  ++s.live_count;
  ++s.total_count;
  s.live_elements += elements;
  s.peak_count = std::max(s.peak_count, s.live_count);
  s.peak_elements = std::max(s.peak_elements, s.live_elements);
}

void TransferLedger::host_free(HostBuffer kind, std::size_t elements) {
  std::lock_guard lock(host_mutex_);
  auto& s = host_[static_cast<std::size_t>(kind)];
  if (s.live_count > 0) --s.live_count;
  s.live_elements -= std::min<std::uint64_t>(s.live_elements, elements);
}

std::uint64_t TransferLedger::host_live_count(HostBuffer kind) const {
  std::lock_guard lock(host_mutex_);
  return host_[static_cast<std::size_t>(kind)].live_count;
}

std::uint64_t TransferLedger::host_peak_count(HostBuffer kind) const {
  std::lock_guard lock(host_mutex_);
  return host_[static_cast<std::size_t>(kind)].peak_count;
}

std::uint64_t TransferLedger::host_peak_elements(HostBuffer kind) const {
  std::lock_guard lock(host_mutex_);
  return host_[static_cast<std::size_t>(kind)].peak_elements;
}

std::uint64_t TransferLedger::host_total_count(HostBuffer kind) const {
  std::lock_guard lock(host_mutex_);
  return host_[static_cast<std::size_t>(kind)].total_count;
}

void TransferLedger::reset() {
  for (std::size_t p = 0; p < workers_; ++p) peak_[p].store(0);
  host_to_scratch_.store(0);
  scratch_to_host_.store(0);
  std::lock_guard lock(host_mutex_);
  host_ = {};
}

bool ScratchArena::reserve(std::size_t bytes, bool throw_on_failure) {
  std::size_t in_use = 0;
  {
    std::lock_guard lock(mutex_);
    if (used_bytes_ + bytes > capacity_bytes_) {
      if (!throw_on_failure) return false;
      throw BudgetExceeded("worker " + std::to_string(worker_) + " scratch budget exceeded: " +
                           std::to_string(to_elements(used_bytes_ + bytes)) + " > " +
                           std::to_string(capacity_elements()) + " elements");
    }
    used_bytes_ += bytes;
    peak_bytes_ = std::max(peak_bytes_, used_bytes_);
    in_use = used_bytes_;
  }
  if (ledger_) ledger_->note_scratch_in_use(worker_, to_elements(in_use));
  return true;
}

void ScratchArena::release(std::size_t bytes) noexcept {
  std::lock_guard lock(mutex_);
  used_bytes_ -= std::min(used_bytes_, bytes);
}

std::size_t ScratchArena::used_elements() const {
  std::lock_guard lock(mutex_);
  return to_elements(used_bytes_);
}

std::size_t ScratchArena::peak_elements() const {
  std::lock_guard lock(mutex_);
  return to_elements(peak_bytes_);
}

}  // namespace falkon::ooc

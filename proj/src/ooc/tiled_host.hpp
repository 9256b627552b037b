#pragma once

#include <cstddef>

#include "falkon/ooc/memory.hpp"
#include "falkon/ooc/tiles.hpp"

namespace falkon::ooc::detail {

/// Which part of a diagonal tile a transfer covers, in view coordinates and
/// including the diagonal. Off-diagonal tiles always use kFull.
enum class Part { kFull, kLower, kUpper };

/// Tile-granular access to a row-major n x n host buffer, optionally seen
/// transposed so that an upper triangle can be treated as a lower one.
/// Every transfer is charged to the ledger.
template <typename T>
class TiledHost {
 public:
  TiledHost(T* data, std::size_t n, bool transposed, const T* diag, const TileLayout& layout,
            TransferLedger* ledger)
      : data_(data), n_(n), transposed_(transposed), diag_(diag), layout_(layout),
        ledger_(ledger) {}

  /// Copies view tile (r, c) into dst (row-major, ld = extent(c)), zeroing
  /// entries outside `part`. Column weights, when given, multiply view
  /// column j by w[j].
  template <typename U>
  void load(std::size_t r, std::size_t c, U* dst, Part part, const double* col_w = nullptr) const {
    const std::size_t rows = layout_.extent(r), cols = layout_.extent(c);
    const std::size_t r0 = layout_.begin(r), c0 = layout_.begin(c);
    std::size_t moved = 0;
    auto fetch = [&](std::size_t a, std::size_t b) {
      const std::size_t ga = r0 + a, gb = c0 + b;
      if (!inside(part, a, b)) {
        dst[a * cols + b] = U{0};
        return;
      }
      T v = (diag_ && ga == gb) ? diag_[ga] : data_[index(ga, gb)];
      dst[a * cols + b] = col_w ? static_cast<U>(static_cast<T>(static_cast<double>(v) * col_w[gb]))
                                : static_cast<U>(v);
      ++moved;
    };
    if (transposed_) {
      // Walk in host row order so host reads stay contiguous.
      for (std::size_t b = 0; b < cols; ++b)
        for (std::size_t a = 0; a < rows; ++a) fetch(a, b);
    } else {
      for (std::size_t a = 0; a < rows; ++a)
        for (std::size_t b = 0; b < cols; ++b) fetch(a, b);
    }
    if (ledger_) ledger_->charge_host_to_scratch(moved);
  }

  /// Writes the `part` entries of src (row-major, ld = extent(c)) to view
  /// tile (r, c).
  template <typename U>
  void store(std::size_t r, std::size_t c, const U* src, Part part) {
    const std::size_t rows = layout_.extent(r), cols = layout_.extent(c);
    const std::size_t r0 = layout_.begin(r), c0 = layout_.begin(c);
    std::size_t moved = 0;
    auto put = [&](std::size_t a, std::size_t b) {
      if (!inside(part, a, b)) return;
      data_[index(r0 + a, c0 + b)] = static_cast<T>(src[a * cols + b]);
      ++moved;
    };
    if (transposed_) {
      for (std::size_t b = 0; b < cols; ++b)
        for (std::size_t a = 0; a < rows; ++a) put(a, b);
    } else {
      for (std::size_t a = 0; a < rows; ++a)
        for (std::size_t b = 0; b < cols; ++b) put(a, b);
    }
    if (ledger_) ledger_->charge_scratch_to_host(moved);
  }

  const TileLayout& layout() const noexcept { return layout_; }

 private:
  static bool inside(Part part, std::size_t a, std::size_t b) {
    switch (part) {
      case Part::kLower: return b <= a;
      case Part::kUpper: return b >= a;
      default: return true;
    }
  }
  std::size_t index(std::size_t a, std::size_t b) const {
    return transposed_ ? b * n_ + a : a * n_ + b;
  }

  T* data_;
  std::size_t n_;
  bool transposed_;
  const T* diag_;
  const TileLayout& layout_;
  TransferLedger* ledger_;
};

}  // namespace falkon::ooc::detail

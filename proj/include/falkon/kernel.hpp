#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "falkon/matrix.hpp"

namespace falkon {

enum class KernelKind { kGaussian, kLinear };

struct KernelSpec {
  KernelKind kind = KernelKind::kGaussian;
  double sigma = 1.0;  // length-scale, gaussian only

  static KernelSpec gaussian(double sigma) { return {KernelKind::kGaussian, sigma}; }
  static KernelSpec linear() { return {KernelKind::kLinear, 1.0}; }

  /// Throws InvalidArgument unless sigma > 0 for the gaussian kernel.
  void validate() const;
  /// exp(-gamma * ||x - x'||^2)
  double gamma() const { return 1.0 / (2.0 * sigma * sigma); }
  std::string name() const;

  bool operator==(const KernelSpec&) const = default;
};

enum class Precision { k32, k64 };

template <typename T>
constexpr Precision precision_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? Precision::k32 : Precision::k64;
}

/// Working precision is the template scalar of each call; this only carries
/// the accumulation rule. With 32-bit data and the gaussian kernel the
/// distance expansion is summed in 64-bit before exponentiation when
/// `accumulate_norms_high` is set.
struct PrecisionPolicy {
  bool accumulate_norms_high = true;
};

/// Inputs with at most this many features take the fused kernel-vector path.
inline constexpr std::size_t kThinDataThreshold = 32;

/// Squared row norms, always accumulated in 64-bit.
template <typename T>
std::vector<double> row_squared_norms(const MatrixView<T>& x);

/// Writes k(x1, x2) (q x r, row-major) into `out`. Dense and CSR inputs may
/// be mixed freely. Throws DimensionMismatch on feature-count mismatch.
template <typename T>
void eval_kernel_block_into(const KernelSpec& kernel, const MatrixView<T>& x1,
                            const MatrixView<T>& x2, const PrecisionPolicy& policy,
                            std::span<T> out);

template <typename T>
DenseMatrix<T> eval_kernel_block(const KernelSpec& kernel, const MatrixView<T>& x1,
                                 const MatrixView<T>& x2,
                                 const PrecisionPolicy& policy = {});

/// Sparse x sparse kernel block; the result is always dense.
template <typename T>
DenseMatrix<T> kernel_block_sparse(const KernelSpec& kernel, const CsrView<T>& x1,
                                   const CsrView<T>& x2,
                                   const PrecisionPolicy& policy = {});

/// k(x1, x2) * v without materialising the q x r block. Requires dense inputs
/// with cols <= thin_threshold.
template <typename T>
std::vector<double> kernel_vecmul_fused(const KernelSpec& kernel, const DenseView<T>& x1,
                                        const DenseView<T>& x2, std::span<const double> v,
                                        const PrecisionPolicy& policy = {},
                                        std::size_t thin_threshold = kThinDataThreshold);

/// Materialise-then-multiply counterpart of kernel_vecmul_fused, processed in
/// batches of `row_batch` rows of x1.
template <typename T>
std::vector<double> kernel_vecmul_materialized(const KernelSpec& kernel,
                                               const MatrixView<T>& x1,
                                               const MatrixView<T>& x2,
                                               std::span<const double> v,
                                               const PrecisionPolicy& policy = {},
                                               std::size_t row_batch = 1024);

/// Heap bytes used internally by one eval_kernel_block_into call on a
/// q x r block with d features.
template <typename T>
std::size_t kernel_workspace_bytes(std::size_t q, std::size_t r, std::size_t d,
                                   const PrecisionPolicy& policy);

}  // namespace falkon

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "falkon/kernel.hpp"
#include "falkon/loss.hpp"
#include "falkon/matrix.hpp"
#include "falkon/ooc/ops.hpp"

namespace falkon {

/// Which triangular factor of the preconditioner an action uses.
enum class Factor { kT, kA };

struct PreconditionerOptions {
  ooc::MemoryBudget budget{};
  ooc::TransferLedger* ledger = nullptr;  // optional; an internal one is used otherwise
  PrecisionPolicy policy{};
  ooc::OocOptions ooc{};
  /// Jitter escalation on factorization failure: first 1e-8 * trace / m,
  /// then x10 per retry.
  std::size_t max_jitter_retries = 3;
};

/// The two triangular factors T and A, with T^T T = K_mm and
/// A^T A = (1/m) T D T^T + lam I (D = I unless curvature-weighted), stored
/// in one m x m buffer: T in the upper triangle, A^T in the lower triangle,
/// and their diagonals in separate vectors.
template <typename T>
class Preconditioner {
 public:
  Preconditioner() = default;

  std::size_t m() const noexcept { return m_; }
  std::size_t n() const noexcept { return n_; }
  double lambda() const noexcept { return lam_; }
  const DenseMatrix<T>& buffer() const noexcept { return buf_; }
  std::span<const T> diag_t() const noexcept { return diag_t_; }
  std::span<const T> diag_a() const noexcept { return diag_a_; }
  /// Jitter retries needed by the T and A factorizations respectively.
  std::size_t jitter_retries_t() const noexcept { return retries_t_; }
  std::size_t jitter_retries_a() const noexcept { return retries_a_; }

  /// In place: v <- op(F) v or op(F)^{-1} v, op = transpose when requested.
  void apply_inplace(std::span<double> v, Factor which, bool transpose, bool inverse) const;
  std::vector<double> apply(std::span<const double> v, Factor which, bool transpose,
                            bool inverse) const;

  /// The factor as an explicit upper-triangular matrix (tests, diagnostics).
  DenseMatrix<double> factor_dense(Factor which) const;

 private:
  template <typename U>
  friend class PreconditionerBuilder;

  std::size_t m_ = 0, n_ = 0;
  double lam_ = 0.0;
  DenseMatrix<T> buf_;
  std::vector<T> diag_t_, diag_a_;
  ooc::MemoryBudget budget_{};
  std::unique_ptr<ooc::TransferLedger> own_ledger_;
  ooc::TransferLedger* ledger_ = nullptr;
  ooc::HostAllocation hold_;
  std::size_t retries_t_ = 0, retries_a_ = 0;
};

template <typename T>
std::vector<double> apply_prec(const Preconditioner<T>& prec, std::span<const double> v,
                               Factor which, bool transpose, bool inverse) {
  return prec.apply(v, which, transpose, inverse);
}

/// Builds the preconditioner for inducing rows x_m: fill K_mm into the upper
/// triangle, factor it in place to T, write (1/m) T T^T + lam I into the
/// lower triangle by an out-of-place LAUUM and factor that in place to A^T.
/// `n` is recorded for the lam * n scaling used by the solver.
template <typename T>
Preconditioner<T> build_preconditioner(const MatrixView<T>& x_m, const KernelSpec& kernel,
                                       double lam, std::size_t n,
                                       const PreconditionerOptions& options = {});

/// Curvature-weighted variant: A^T A = (1/m) T D T^T + mu I with
/// D = diag(l''(z_j, y_j)) and z = K_mm alpha0. Throws LossContractViolation
/// when some l'' is negative.
template <typename T>
Preconditioner<T> build_weighted_preconditioner(const MatrixView<T>& x_m,
                                                std::span<const double> y_m,
                                                std::span<const double> alpha0,
                                                const GscLoss& loss, double mu,
                                                const KernelSpec& kernel, std::size_t n,
                                                const PreconditionerOptions& options = {});

}  // namespace falkon

#include "falkon/preconditioner.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "staging.hpp"

namespace falkon {

namespace {

using ooc::MemoryBudget;
using ooc::TransferLedger;

// Side of the square kernel blocks used to fill K_mm: the largest size whose
// block, staged rows and kernel workspace fit in one worker's scratch.
template <typename T>
std::size_t fill_block_side(const MatrixView<T>& x, const MemoryBudget& budget,
                            const PrecisionPolicy& policy) {
  const std::size_t m = view_rows(x), d = view_cols(x);
  const std::size_t capacity = budget.scratch_elements_per_worker * sizeof(T);
  for (std::size_t b = m; b >= 1; b = b > 64 ? b - b / 16 : b - 1) {
    const std::size_t bytes = b * b * sizeof(T) + 2 * detail::max_staged_bytes(x, b) +
                              kernel_workspace_bytes<T>(b, b, d, policy);
    if (bytes <= capacity) return b;
  }
  throw BudgetExceeded("scratch budget too small to evaluate a 1x1 kernel block");
}

// Writes K(x, x) into the upper triangle (with diagonal) of buf, one kernel
// block at a time, blocks of block-row i going to worker i mod P.
template <typename T>
void fill_kernel_upper(DenseMatrix<T>& buf, const MatrixView<T>& x, const KernelSpec& kernel,
                       const PrecisionPolicy& policy, const MemoryBudget& budget,
                       TransferLedger& ledger) {
  const std::size_t m = view_rows(x), d = view_cols(x);
  const auto layout = ooc::make_tile_layout(m, fill_block_side(x, budget, policy), budget.workers);
  ooc::run_workers(
      budget.workers,
      [&](std::size_t p) {
        ooc::ScratchArena arena(p, budget.scratch_elements_per_worker, sizeof(T), &ledger);
        for (std::size_t i : layout.block_allocs[p]) {
          const std::size_t ri = layout.extent(i), i0 = layout.begin(i);
          detail::StagedRows<T> rows_i(arena, x, i0, ri, &ledger);
          for (std::size_t j = i; j < layout.tiles; ++j) {
            const std::size_t rj = layout.extent(j), j0 = layout.begin(j);
            detail::StagedRows<T> rows_j(arena, x, j0, rj, &ledger);
            auto block = arena.allocate<T>(ri * rj);
            auto workspace = arena.charge(kernel_workspace_bytes<T>(ri, rj, d, policy));
            eval_kernel_block_into<T>(kernel, rows_i.view(), rows_j.view(), policy,
                                      block.span());
            std::size_t moved = 0;
            for (std::size_t a = 0; a < ri; ++a)
              for (std::size_t b = (i == j ? a : 0); b < rj; ++b, ++moved)
                buf(i0 + a, j0 + b) = block[a * rj + b];
            ledger.charge_scratch_to_host(moved);
          }
        }
      },
      {});
}

template <typename T>
double diagonal_trace(const DenseMatrix<T>& buf) {
  double s = 0;
  for (std::size_t i = 0; i < buf.rows(); ++i) s += static_cast<double>(buf(i, i));
  return s;
}

template <typename T>
void add_to_diagonal(DenseMatrix<T>& buf, double jitter) {
  for (std::size_t i = 0; i < buf.rows(); ++i)
    buf(i, i) = static_cast<T>(static_cast<double>(buf(i, i)) + jitter);
}

// Runs `prepare` then `factor`; on NotPositiveDefinite re-prepares, adds a
// growing diagonal jitter and retries. Returns the number of retries used.
std::size_t with_jitter(std::size_t m, std::size_t max_retries,
                        const std::function<double()>& prepare,
                        const std::function<void(double)>& add_jitter,
                        const std::function<void()>& factor) {
  double trace = prepare();
  for (std::size_t attempt = 0;; ++attempt) {
    try {
      factor();
      return attempt;
    } catch (const NotPositiveDefinite&) {
      if (attempt == max_retries) throw;
    }
    prepare();
    const double base = 1e-8 * std::abs(trace) / static_cast<double>(m);
    add_jitter((base > 0 ? base : 1e-8) * std::pow(10.0, static_cast<double>(attempt)));
  }
}

}  // namespace

template <typename T>
class PreconditionerBuilder {
 public:
  // `curvature` maps the freshly filled K_mm buffer to the weights D; empty
  // for the unweighted preconditioner.
  using Curvature = std::function<std::vector<double>(const DenseMatrix<T>&)>;

  static Preconditioner<T> build(const MatrixView<T>& x_m, const KernelSpec& kernel, double lam,
                                 std::size_t n, const PreconditionerOptions& options,
                                 const Curvature& curvature) {
    kernel.validate();
    options.budget.validate();
    const std::size_t m = view_rows(x_m);
    if (m == 0) throw InvalidArgument("the preconditioner needs at least one inducing point");
    if (!(lam >= 0.0) || !std::isfinite(lam))
      throw InvalidArgument("regularization must be finite and non-negative");

    Preconditioner<T> pc;
    pc.m_ = m;
    pc.n_ = n;
    pc.lam_ = lam;
    pc.budget_ = options.budget;
    if (options.ledger) {
      pc.ledger_ = options.ledger;
    } else {
      pc.own_ledger_ = std::make_unique<TransferLedger>(options.budget.workers);
      pc.ledger_ = pc.own_ledger_.get();
    }
    TransferLedger& ledger = *pc.ledger_;
    ledger.ensure_workers(options.budget.workers);

    // (a) the single m x m host buffer.
    pc.hold_ = ooc::HostAllocation(&ledger, ooc::HostBuffer::kPreconditioner, m * m);
    pc.buf_ = DenseMatrix<T>(m, m);
    auto& buf = pc.buf_;
    const auto layout = ooc::plan_tiles(m, options.budget);

    // (b), (c): K_mm into the upper triangle, then T with T^T T = K_mm.
    std::vector<double> weights;
    pc.retries_t_ = with_jitter(
        m, options.max_jitter_retries,
        [&] {
          fill_kernel_upper(buf, x_m, kernel, options.policy, options.budget, ledger);
          if (curvature && weights.empty()) {
            weights = curvature(buf);
            for (double& w : weights) w = std::sqrt(w);
          }
          return diagonal_trace(buf);
        },
        [&](double jitter) { add_to_diagonal(buf, jitter); },
        [&] {
          ooc::ooc_cholesky(ooc::TriangleRef<T>{buf.data(), m, ooc::Uplo::kUpper, nullptr}, layout,
                            options.budget, ledger, options.ooc);
        });
    pc.diag_t_.resize(m);
    for (std::size_t i = 0; i < m; ++i) pc.diag_t_[i] = buf(i, i);

    // (d), (e): (1/m) T D T^T + lam I into the lower triangle, then A^T.
    const ooc::TriangleRef<T> t_in{buf.data(), m, ooc::Uplo::kUpper, pc.diag_t_.data()};
    const ooc::TriangleRef<T> lower{buf.data(), m, ooc::Uplo::kLower, nullptr};
    const ooc::LauumEpilogue epilogue{1.0 / static_cast<double>(m), lam, weights};
    pc.retries_a_ = with_jitter(
        m, options.max_jitter_retries,
        [&] {
          ooc::ooc_lauum(t_in, lower, layout, options.budget, ledger, epilogue, options.ooc);
          return diagonal_trace(buf);
        },
        [&](double jitter) { add_to_diagonal(buf, jitter); },
        [&] { ooc::ooc_cholesky(lower, layout, options.budget, ledger, options.ooc); });
    pc.diag_a_.resize(m);
    for (std::size_t i = 0; i < m; ++i) pc.diag_a_[i] = buf(i, i);
    return pc;
  }
};

template <typename T>
void Preconditioner<T>::apply_inplace(std::span<double> v, Factor which, bool transpose,
                                      bool inverse) const {
  if (v.size() != m_)
    throw DimensionMismatch("vector of length " + std::to_string(v.size()) +
                            " applied to a preconditioner of size " + std::to_string(m_));
  const std::size_t m = m_;
  const T* b = buf_.data();
  if (inverse) {
    // T is the stored upper triangle; A is the transpose of the stored lower
    // triangle, so A^{-1} is a transposed solve against it.
    const bool is_t = which == Factor::kT;
    const ooc::TriangleRef<const T> tri{b, m, is_t ? ooc::Uplo::kUpper : ooc::Uplo::kLower,
                                        is_t ? diag_t_.data() : diag_a_.data()};
    const bool solve_trans = is_t ? transpose : !transpose;
    ooc::host_triangular_solve<T, double>(tri, v.data(), 1, ooc::Side::kLeft,
                                          solve_trans ? ooc::Op::kTrans : ooc::Op::kNoTrans,
                                          budget_, ledger_);
    return;
  }
  // Forward actions. Upper-triangular U with U(i, j) = stored(i, j) for the T
  // factor and stored(j, i) for the A factor.
  const bool is_t = which == Factor::kT;
  const T* diag = is_t ? diag_t_.data() : diag_a_.data();
  auto u = [&](std::size_t i, std::size_t j) {
    return static_cast<double>(is_t ? b[i * m + j] : b[j * m + i]);
  };
  std::vector<double> out(m, 0.0);
  if (!transpose) {
    for (std::size_t i = 0; i < m; ++i) {
      double s = static_cast<double>(diag[i]) * v[i];
      for (std::size_t j = i + 1; j < m; ++j) s += u(i, j) * v[j];
      out[i] = s;
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      out[i] += static_cast<double>(diag[i]) * v[i];
      for (std::size_t j = i + 1; j < m; ++j) out[j] += u(i, j) * v[i];
    }
  }
  std::copy(out.begin(), out.end(), v.begin());
}

template <typename T>
std::vector<double> Preconditioner<T>::apply(std::span<const double> v, Factor which,
                                             bool transpose, bool inverse) const {
  std::vector<double> out(v.begin(), v.end());
  apply_inplace(out, which, transpose, inverse);
  return out;
}

template <typename T>
DenseMatrix<double> Preconditioner<T>::factor_dense(Factor which) const {
  DenseMatrix<double> out(m_, m_);
  for (std::size_t i = 0; i < m_; ++i) {
    out(i, i) = which == Factor::kT ? diag_t_[i] : diag_a_[i];
    for (std::size_t j = i + 1; j < m_; ++j)
      out(i, j) = which == Factor::kT ? buf_(i, j) : buf_(j, i);
  }
  return out;
}

template <typename T>
Preconditioner<T> build_preconditioner(const MatrixView<T>& x_m, const KernelSpec& kernel,
                                       double lam, std::size_t n,
                                       const PreconditionerOptions& options) {
  return PreconditionerBuilder<T>::build(x_m, kernel, lam, n, options, {});
}

template <typename T>
Preconditioner<T> build_weighted_preconditioner(const MatrixView<T>& x_m,
                                                std::span<const double> y_m,
                                                std::span<const double> alpha0,
                                                const GscLoss& loss, double mu,
                                                const KernelSpec& kernel, std::size_t n,
                                                const PreconditionerOptions& options) {
  const std::size_t m = view_rows(x_m);
  if (y_m.size() != m || alpha0.size() != m)
    throw DimensionMismatch("inducing targets and coefficients must have one entry per point");
  if (!(mu > 0.0)) throw InvalidArgument("the regularization level must be positive");
  for (double a : alpha0)
    if (!std::isfinite(a)) throw InvalidArgument("starting coefficients must be finite");
  auto curvature = [&](const DenseMatrix<T>& kmm) {
    // z = K_mm alpha0 from the symmetric upper triangle.
    std::vector<double> z(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      z[i] += static_cast<double>(kmm(i, i)) * alpha0[i];
      for (std::size_t j = i + 1; j < m; ++j) {
        const double k = static_cast<double>(kmm(i, j));
        z[i] += k * alpha0[j];
        z[j] += k * alpha0[i];
      }
    }
    std::vector<double> d(m);
    for (std::size_t j = 0; j < m; ++j) {
      d[j] = loss.d2(z[j], y_m[j]);
      if (!(d[j] >= 0.0))
        throw LossContractViolation("loss second derivative is negative at inducing point " +
                                    std::to_string(j));
    }
    return d;
  };
  return PreconditionerBuilder<T>::build(x_m, kernel, mu, n, options, curvature);
}

#define FALKON_INSTANTIATE_PRECONDITIONER(T)                                                   \
  template class Preconditioner<T>;                                                            \
  template Preconditioner<T> build_preconditioner<T>(const MatrixView<T>&, const KernelSpec&,  \
                                                     double, std::size_t,                      \
                                                     const PreconditionerOptions&);            \
  template Preconditioner<T> build_weighted_preconditioner<T>(                                 \
      const MatrixView<T>&, std::span<const double>, std::span<const double>, const GscLoss&,  \
      double, const KernelSpec&, std::size_t, const PreconditionerOptions&);

FALKON_INSTANTIATE_PRECONDITIONER(float)
FALKON_INSTANTIATE_PRECONDITIONER(double)

}  // namespace falkon

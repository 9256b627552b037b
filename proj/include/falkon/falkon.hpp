#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "falkon/batching.hpp"
#include "falkon/cg.hpp"
#include "falkon/dataset.hpp"
#include "falkon/kernel.hpp"
#include "falkon/ooc/ops.hpp"
#include "falkon/preconditioner.hpp"

namespace falkon {

struct FalkonOptions {
  KernelSpec kernel{};
  double lam = 1e-6;
  std::size_t m = 100;
  std::size_t iterations = 10;  // CG steps t
  std::uint64_t seed = 0;
  ooc::MemoryBudget budget{};
  PrecisionPolicy policy{};
  /// Streaming plan; fitted to the scratch budget when absent.
  std::optional<BatchPlan> plan;
  PipelineConfig pipeline{};
  std::optional<double> residual_tol;
  bool record_history = true;
  ooc::TransferLedger* ledger = nullptr;
  ooc::OocOptions ooc{};
  /// Sees each CG iterate of the preconditioned variable beta.
  CgObserver on_iterate;
};

struct FitInfo {
  BatchPlan plan{};
  std::size_t iterations = 0;
  std::vector<double> residual_norms;
  bool converged = false;
  std::size_t jitter_retries_t = 0, jitter_retries_a = 0;
  double preconditioner_seconds = 0.0;
  double solve_seconds = 0.0;
};

/// f(x) = sum_j alpha_j k(x, x_m_j).
template <typename T>
struct FalkonModel {
  InducingSet<T> inducing;
  std::vector<double> alpha;
  KernelSpec kernel{};
  double lam = 0.0;
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  FitInfo info;

  std::size_t m() const { return alpha.size(); }
  std::size_t d() const { return view_cols(inducing.view()); }
};

struct PredictOptions {
  ooc::MemoryBudget budget{};
  PrecisionPolicy policy{};
  std::optional<BatchPlan> plan;
  PipelineConfig pipeline{};
  ooc::TransferLedger* ledger = nullptr;
};

/// Streaming context for rows x against the inducing rows, with the plan
/// fitted to the budget unless one is given.
template <typename T>
StreamContext<T> make_stream_context(const MatrixView<T>& x, const MatrixView<T>& x_m,
                                     const KernelSpec& kernel, const PrecisionPolicy& policy,
                                     const ooc::MemoryBudget& budget, ooc::TransferLedger* ledger,
                                     const std::optional<BatchPlan>& plan,
                                     const PipelineConfig& pipeline,
                                     std::size_t forward_vectors = 1, bool backward = true) {
  StreamContext<T> ctx{x, x_m, kernel, policy, budget, ledger, {}, pipeline};
  ctx.plan = plan ? *plan
                  : fit_plan_to_scratch<T>(x, x_m, budget.scratch_elements_per_worker, policy,
                                           forward_vectors, backward);
  return ctx;
}

/// A^-T (T^-T K_nm^T K_nm T^-1 + lam n I) A^-1 beta, with n the row count of
/// the streamed data: v = A^-1 beta, u = T^-1 v, c = K_nm^T K_nm u, then
/// A^-T (T^-T c + lam n v).
template <typename T>
std::vector<double> linop_apply(const Preconditioner<T>& prec, const StreamContext<T>& ctx,
                                double lam, std::span<const double> beta);

/// A^-T T^-T K_nm^T y.
template <typename T>
std::vector<double> falkon_rhs(const Preconditioner<T>& prec, const StreamContext<T>& ctx,
                               std::span<const double> y);

/// alpha = T^-1 A^-1 beta.
template <typename T>
std::vector<double> alpha_from_beta(const Preconditioner<T>& prec, std::span<const double> beta);

/// Fits a squared-loss model on the given inducing set: builds the
/// preconditioner, runs `iterations` CG steps on the preconditioned system
/// and maps the solution back to alpha.
template <typename T>
FalkonModel<T> falkon_fit(const Dataset<T>& data, InducingSet<T> inducing,
                          const FalkonOptions& options);

/// Same, drawing options.m inducing rows with options.seed.
template <typename T>
FalkonModel<T> falkon_fit(const Dataset<T>& data, const FalkonOptions& options);

/// k(x_new, X_m) alpha, streamed within the budget.
template <typename T>
std::vector<double> predict(const FalkonModel<T>& model, const MatrixView<T>& x_new,
                            const PredictOptions& options = {});

}  // namespace falkon

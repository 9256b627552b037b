#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "falkon/kernel.hpp"
#include "falkon/matrix.hpp"
#include "falkon/ooc/memory.hpp"

namespace falkon {

/// Block extents along n (q), m (r) and d (s), and the number of n-batches.
struct BatchPlan {
  std::size_t q = 1, r = 1, s = 1;
  std::size_t batches = 1;

  bool operator==(const BatchPlan&) const = default;
};

/// Maximizes q*r*s / (q*s + d*s) subject to q*s + d*s <= G with r = m,
/// breaking ties by larger q then larger s. Throws BudgetExceeded when
/// G < 1 + d.
BatchPlan plan_batches(std::size_t n, std::size_t m, std::size_t d, std::size_t G);

/// Stage timing for the streaming pipeline. Delays are added to the
/// respective stage of every batch (used to measure overlap).
struct PipelineConfig {
  bool overlap = true;  // false runs load, compute, store of each batch back to back
  std::chrono::microseconds load_delay{0};
  std::chrono::microseconds compute_delay{0};
  std::chrono::microseconds store_delay{0};
  /// Forward-only single-vector passes on dense inputs with few features use
  /// kernel_vecmul_fused instead of a materialized block.
  bool fused_thin = true;
};

/// Peak scratch bytes one worker needs to stream batches of q rows against
/// inducing chunks of r rows, with `forward_vectors` m-vectors multiplied per
/// batch and an optional backward product into an m-vector.
template <typename T>
std::size_t stream_footprint_bytes(const MatrixView<T>& x, const MatrixView<T>& x_m,
                                   std::size_t q, std::size_t r, const PrecisionPolicy& policy,
                                   std::size_t forward_vectors, bool backward);

/// A plan whose true per-worker footprint fits in G elements of T, with
/// s = d and r in {m, m/2, m/4, ...}, maximizing q*r / (q + d).
template <typename T>
BatchPlan fit_plan_to_scratch(const MatrixView<T>& x, const MatrixView<T>& x_m,
                              std::size_t scratch_elements, const PrecisionPolicy& policy,
                              std::size_t forward_vectors = 2, bool backward = true);

/// What streaming runs over: rows x (n of them) against inducing rows x_m.
template <typename T>
struct StreamContext {
  MatrixView<T> x;
  MatrixView<T> x_m;
  KernelSpec kernel;
  PrecisionPolicy policy{};
  ooc::MemoryBudget budget{};
  ooc::TransferLedger* ledger = nullptr;
  BatchPlan plan{};
  PipelineConfig pipeline{};
};

/// Forward results of one batch: values[k][i] = (K_b f_k)_i for rows
/// begin..begin+count of x.
struct BatchForward {
  std::size_t batch = 0, begin = 0, count = 0;
  std::vector<std::span<const double>> values;
};

/// A per-batch program. Each batch computes K_b f_k for every forward
/// vector; if `backward` is set it fills a length-count vector g_b from
/// those results and K_b^T g_b is summed into the m-vector output. `consume`
/// sees every batch's forward results in batch order.
struct BatchProgram {
  std::vector<std::span<const double>> forward;
  std::function<void(const BatchForward&, std::span<double> back)> backward;
  std::function<void(const BatchForward&)> consume;
};

/// Runs a program over all batches. Batch b goes to worker b mod P; each
/// worker overlaps the load, compute and store of consecutive batches with
/// two buffers between stages. Batch contributions are reduced in batch
/// order, so results do not depend on P. Returns the m-vector output (empty
/// without a backward step). Throws BudgetExceeded if the plan does not fit.
template <typename T>
std::vector<double> run_stream(const StreamContext<T>& ctx, const BatchProgram& program);

/// sum_b K_b^T (K_b v): K_nm^T K_nm v without ever holding K_nm.
template <typename T>
std::vector<double> knm_vec_product(const StreamContext<T>& ctx, std::span<const double> v);

/// K_nm^T w for an n-vector w.
template <typename T>
std::vector<double> knm_transpose_vec(const StreamContext<T>& ctx, std::span<const double> w);

/// K_nm v for an m-vector v.
template <typename T>
std::vector<double> knm_forward(const StreamContext<T>& ctx, std::span<const double> v);

}  // namespace falkon

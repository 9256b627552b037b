#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace falkon {

struct CgConfig {
  std::size_t max_iters = 10;
  /// Stop once ||r|| <= residual_tol * ||b||. Absent: run max_iters steps.
  std::optional<double> residual_tol;
  bool record_history = false;
};

struct CgResult {
  std::vector<double> x;
  std::size_t iterations = 0;
  /// ||r_0||, ||r_1||, ... when history is recorded.
  std::vector<double> residual_norms;
  bool converged = false;
};

using LinearOperator = std::function<std::vector<double>(std::span<const double>)>;
/// Called after every iteration with its index (1-based) and the iterate.
using CgObserver = std::function<void(std::size_t, std::span<const double>)>;

/// Conjugate gradient for a symmetric positive definite operator, started at
/// x0 (zero when empty). Stops early if the residual vanishes exactly.
/// Throws DivergenceError on non-finite values and InvalidArgument when
/// max_iters is 0.
CgResult conjugate_gradient(const LinearOperator& apply, std::span<const double> rhs,
                            const CgConfig& config, std::span<const double> x0 = {},
                            const CgObserver& on_iterate = {});

}  // namespace falkon

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "falkon/falkon.hpp"
#include "falkon/loss.hpp"

namespace falkon {

/// Decreasing regularization levels mu0, q mu0, q^2 mu0, ... kept while
/// above lam_final, followed by one solve at lam_final.
struct NewtonPath {
  double mu0 = 1.0;
  double q = 0.5;
  double lam_final = 1e-6;
  std::size_t t_inner = 10;
  std::size_t t_final = 20;

  /// Path from mu0 to lam_final in `steps` outer steps (steps >= 1).
  static NewtonPath geometric(double lam_final, std::size_t steps = 9, double mu0 = 1.0,
                              std::size_t t_inner = 10, std::size_t t_final = 20);

  /// Throws InvalidArgument unless 0 < lam_final <= mu0, 0 < q < 1 and both
  /// iteration counts are positive.
  void validate() const;
  /// Every level in order, the last one being lam_final.
  std::vector<double> levels() const;
};

struct GscOptions {
  KernelSpec kernel{};
  std::size_t m = 100;
  std::uint64_t seed = 0;
  ooc::MemoryBudget budget{};
  PrecisionPolicy policy{};
  std::optional<BatchPlan> plan;
  PipelineConfig pipeline{};
  ooc::TransferLedger* ledger = nullptr;
  ooc::OocOptions ooc{};
};

/// (1/n) sum_i l(z_i, y_i) + (mu / 2) ||T alpha||^2 with z = K_nm alpha and
/// T^T T = K_mm.
template <typename T>
double gsc_objective(const Preconditioner<T>& prec, const StreamContext<T>& ctx,
                     std::span<const double> y, const GscLoss& loss,
                     std::span<const double> alpha, double mu);

/// A^-T (T^-T K_nm^T D K_nm T^-1 + mu n I) A^-1 beta with
/// D = diag(l''(K_nm alpha_current, y)). D is formed batch by batch.
template <typename T>
std::vector<double> weighted_linop_apply(const Preconditioner<T>& prec,
                                         const StreamContext<T>& ctx, std::span<const double> y,
                                         const GscLoss& loss,
                                         std::span<const double> alpha_current, double mu,
                                         std::span<const double> beta);

/// Newton right-hand side A^-T T^-T K_nm^T (D z - g) at alpha_current, where
/// z = K_nm alpha_current and g = l'(z, y).
template <typename T>
std::vector<double> newton_rhs(const Preconditioner<T>& prec, const StreamContext<T>& ctx,
                               std::span<const double> y, const GscLoss& loss,
                               std::span<const double> alpha_current);

struct StepResult {
  std::vector<double> alpha;
  std::size_t iterations = 0;
  std::vector<double> residual_norms;
};

/// One approximate Newton step at level mu from alpha0: weighted
/// preconditioner at alpha0, CG warm-started at beta0 = A T alpha0 for at
/// most t iterations. `on_alpha` sees every CG iterate mapped back to alpha.
template <typename T>
StepResult weighted_falkon_step(const Dataset<T>& data, const InducingSet<T>& inducing,
                                const GscLoss& loss, double mu, std::size_t t,
                                std::span<const double> alpha0, const GscOptions& options,
                                const CgObserver& on_alpha = {});

struct GscStepReport {
  double mu = 0.0;
  std::size_t iterations = 0;
  double objective = 0.0;  // at this step's level
};

struct GscReport {
  std::vector<GscStepReport> steps;
  std::vector<std::string> warnings;
};

template <typename T>
struct GscFit {
  FalkonModel<T> model;
  GscReport report;
};

/// Runs the Newton path from alpha = 0 and returns the model at lam_final.
/// An outer step that fails to lower the objective adds a warning.
template <typename T>
GscFit<T> gsc_falkon_fit(const Dataset<T>& data, const GscLoss& loss, const NewtonPath& path,
                         const GscOptions& options);

/// Same on a given inducing set.
template <typename T>
GscFit<T> gsc_falkon_fit(const Dataset<T>& data, InducingSet<T> inducing, const GscLoss& loss,
                         const NewtonPath& path, const GscOptions& options);

}  // namespace falkon

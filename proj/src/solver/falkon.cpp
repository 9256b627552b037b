#include "falkon/falkon.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace falkon {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

template <typename T>
std::vector<double> linop_apply(const Preconditioner<T>& prec, const StreamContext<T>& ctx,
                                double lam, std::span<const double> beta) {
  const double lam_n = lam * static_cast<double>(view_rows(ctx.x));
  auto v = prec.apply(beta, Factor::kA, false, true);
  auto u = prec.apply(v, Factor::kT, false, true);
  auto c = knm_vec_product(ctx, u);
  prec.apply_inplace(c, Factor::kT, true, true);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += lam_n * v[i];
  prec.apply_inplace(c, Factor::kA, true, true);
  return c;
}

template <typename T>
std::vector<double> falkon_rhs(const Preconditioner<T>& prec, const StreamContext<T>& ctx,
                               std::span<const double> y) {
  auto r = knm_transpose_vec(ctx, y);
  prec.apply_inplace(r, Factor::kT, true, true);
  prec.apply_inplace(r, Factor::kA, true, true);
  return r;
}

template <typename T>
std::vector<double> alpha_from_beta(const Preconditioner<T>& prec, std::span<const double> beta) {
  auto alpha = prec.apply(beta, Factor::kA, false, true);
  prec.apply_inplace(alpha, Factor::kT, false, true);
  return alpha;
}

template <typename T>
FalkonModel<T> falkon_fit(const Dataset<T>& data, InducingSet<T> inducing,
                          const FalkonOptions& options) {
  data.validate();
  options.kernel.validate();
  options.budget.validate();
  if (!(options.lam >= 0.0) || !std::isfinite(options.lam))
    throw InvalidArgument("regularization must be finite and non-negative");
  if (options.iterations == 0) throw InvalidArgument("at least one iteration is required");
  if (view_cols(inducing.view()) != data.d())
    throw DimensionMismatch("inducing rows have " + std::to_string(view_cols(inducing.view())) +
                            " features, data has " + std::to_string(data.d()));
  for (double y : data.y)
    if (!std::isfinite(y)) throw InvalidArgument("targets must be finite");

  FalkonModel<T> model;
  model.kernel = options.kernel;
  model.lam = options.lam;
  model.iterations = options.iterations;
  model.seed = options.seed;

  const auto t0 = std::chrono::steady_clock::now();
  PreconditionerOptions popts;
  popts.budget = options.budget;
  popts.ledger = options.ledger;
  popts.policy = options.policy;
  popts.ooc = options.ooc;
  const auto prec =
      build_preconditioner<T>(inducing.view(), options.kernel, options.lam, data.n(), popts);
  model.info.preconditioner_seconds = seconds_since(t0);
  model.info.jitter_retries_t = prec.jitter_retries_t();
  model.info.jitter_retries_a = prec.jitter_retries_a();

  const auto t1 = std::chrono::steady_clock::now();
  const auto ctx = make_stream_context<T>(data.view(), inducing.view(), options.kernel,
                                          options.policy, options.budget, options.ledger,
                                          options.plan, options.pipeline);
  model.info.plan = ctx.plan;
  const auto rhs = falkon_rhs(prec, ctx, data.y);
  CgConfig cg;
  cg.max_iters = options.iterations;
  cg.residual_tol = options.residual_tol;
  cg.record_history = options.record_history;
  auto result = conjugate_gradient(
      [&](std::span<const double> beta) { return linop_apply(prec, ctx, options.lam, beta); },
      rhs, cg, {}, options.on_iterate);
  model.alpha = alpha_from_beta(prec, result.x);
  model.info.solve_seconds = seconds_since(t1);
  model.info.iterations = result.iterations;
  model.info.residual_norms = std::move(result.residual_norms);
  model.info.converged = result.converged;
  model.inducing = std::move(inducing);
  return model;
}

template <typename T>
FalkonModel<T> falkon_fit(const Dataset<T>& data, const FalkonOptions& options) {
  data.validate();
  return falkon_fit(data, subsample_inducing(data, options.m, options.seed), options);
}

template <typename T>
std::vector<double> predict(const FalkonModel<T>& model, const MatrixView<T>& x_new,
                            const PredictOptions& options) {
  if (view_cols(x_new) != model.d())
    throw DimensionMismatch("model expects " + std::to_string(model.d()) + " features, got " +
                            std::to_string(view_cols(x_new)));
  if (view_rows(x_new) == 0) return {};
  const auto ctx = make_stream_context<T>(x_new, model.inducing.view(), model.kernel,
                                          options.policy, options.budget, options.ledger,
                                          options.plan, options.pipeline, 1, false);
  return knm_forward(ctx, model.alpha);
}

#define FALKON_INSTANTIATE_SOLVER(T)                                                         \
  template std::vector<double> linop_apply<T>(const Preconditioner<T>&,                      \
                                              const StreamContext<T>&, double,               \
                                              std::span<const double>);                      \
  template std::vector<double> falkon_rhs<T>(const Preconditioner<T>&, const StreamContext<T>&, \
                                             std::span<const double>);                       \
  template std::vector<double> alpha_from_beta<T>(const Preconditioner<T>&,                  \
                                                  std::span<const double>);                  \
  template FalkonModel<T> falkon_fit<T>(const Dataset<T>&, InducingSet<T>,                   \
                                        const FalkonOptions&);                               \
  template FalkonModel<T> falkon_fit<T>(const Dataset<T>&, const FalkonOptions&);            \
  template std::vector<double> predict<T>(const FalkonModel<T>&, const MatrixView<T>&,       \
                                          const PredictOptions&);

FALKON_INSTANTIATE_SOLVER(float)
FALKON_INSTANTIATE_SOLVER(double)

}  // namespace falkon

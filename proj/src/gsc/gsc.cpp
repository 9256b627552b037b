#include "falkon/gsc.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace falkon {

NewtonPath NewtonPath::geometric(double lam_final, std::size_t steps, double mu0,
                                 std::size_t t_inner, std::size_t t_final) {
  if (steps == 0) throw InvalidArgument("a Newton path needs at least one step");
  NewtonPath path;
  path.mu0 = mu0;
  path.lam_final = lam_final;
  path.t_inner = t_inner;
  path.t_final = t_final;
  if (steps == 1 || mu0 <= lam_final) {
    path.mu0 = lam_final;
    return path;
  }
  // steps - 1 levels above lam_final: log(mu0 / lam) / log(1 / q) lands half
  // way between steps - 2 and steps - 1, away from the ceiling's edges.
  path.q = std::pow(lam_final / mu0, 1.0 / (static_cast<double>(steps - 1) - 0.5));
  return path;
}

void NewtonPath::validate() const {
  if (!(lam_final > 0.0) || !std::isfinite(lam_final))
    throw InvalidArgument("final regularization must be positive");
  if (!(mu0 >= lam_final) || !std::isfinite(mu0))
    throw InvalidArgument("initial level must be at least the final regularization");
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("path decay factor must lie in (0, 1)");
  if (t_inner == 0 || t_final == 0) throw InvalidArgument("iteration counts must be positive");
}

std::vector<double> NewtonPath::levels() const {
  validate();
  std::vector<double> out;
  if (mu0 > lam_final) {
    const double span = std::log(mu0 / lam_final) / std::log(1.0 / q);
    const auto above = static_cast<std::size_t>(std::ceil(span - 1e-9));
    for (std::size_t k = 0; k < above; ++k)
      out.push_back(mu0 * std::pow(q, static_cast<double>(k)));
  }
  out.push_back(lam_final);
  return out;
}

template <typename T>
double gsc_objective(const Preconditioner<T>& prec, const StreamContext<T>& ctx,
                     std::span<const double> y, const GscLoss& loss,
                     std::span<const double> alpha, double mu) {
  const std::size_t n = view_rows(ctx.x);
  if (y.size() != n) throw DimensionMismatch("targets do not match the streamed rows");
  double total = 0.0;
  BatchProgram program;
  program.forward = {alpha};
  program.consume = [&](const BatchForward& f) {
    for (std::size_t i = 0; i < f.count; ++i) total += loss.value(f.values[0][i], y[f.begin + i]);
  };
  run_stream(ctx, program);
  const auto t_alpha = prec.apply(alpha, Factor::kT, false, false);
  double reg = 0.0;
  for (double v : t_alpha) reg += v * v;
  return total / static_cast<double>(n) + 0.5 * mu * reg;
}

template <typename T>
std::vector<double> weighted_linop_apply(const Preconditioner<T>& prec,
                                         const StreamContext<T>& ctx, std::span<const double> y,
                                         const GscLoss& loss,
                                         std::span<const double> alpha_current, double mu,
                                         std::span<const double> beta) {
  const std::size_t n = view_rows(ctx.x);
  if (y.size() != n) throw DimensionMismatch("targets do not match the streamed rows");
  auto v = prec.apply(beta, Factor::kA, false, true);
  auto u = prec.apply(v, Factor::kT, false, true);
  BatchProgram program;
  program.forward = {alpha_current, u};
  program.backward = [&](const BatchForward& f, std::span<double> back) {
    for (std::size_t i = 0; i < f.count; ++i)
      back[i] = loss.d2(f.values[0][i], y[f.begin + i]) * f.values[1][i];
  };
  auto c = run_stream(ctx, program);
  prec.apply_inplace(c, Factor::kT, true, true);
  const double mu_n = mu * static_cast<double>(n);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += mu_n * v[i];
  prec.apply_inplace(c, Factor::kA, true, true);
  return c;
}

template <typename T>
std::vector<double> newton_rhs(const Preconditioner<T>& prec, const StreamContext<T>& ctx,
                               std::span<const double> y, const GscLoss& loss,
                               std::span<const double> alpha_current) {
  if (y.size() != view_rows(ctx.x))
    throw DimensionMismatch("targets do not match the streamed rows");
  BatchProgram program;
  program.forward = {alpha_current};
  program.backward = [&](const BatchForward& f, std::span<double> back) {
    for (std::size_t i = 0; i < f.count; ++i) {
      const double z = f.values[0][i];
      const auto l = loss.eval(z, y[f.begin + i]);
      back[i] = l.d2 * z - l.d1;
    }
  };
  auto r = run_stream(ctx, program);
  prec.apply_inplace(r, Factor::kT, true, true);
  prec.apply_inplace(r, Factor::kA, true, true);
  return r;
}

namespace {

template <typename T>
struct StepOutput {
  StepResult result;
  Preconditioner<T> prec;
  double preconditioner_seconds = 0.0;
};

template <typename T>
void check_inputs(const Dataset<T>& data, const GscLoss& loss) {
  data.validate();
  for (double y : data.y) {
    if (!std::isfinite(y)) throw InvalidArgument("targets must be finite");
    loss.check_label(y);
  }
}

template <typename T>
StreamContext<T> gsc_context(const Dataset<T>& data, const InducingSet<T>& inducing,
                             const GscOptions& options) {
  if (view_cols(inducing.view()) != data.d())
    throw DimensionMismatch("inducing rows have " + std::to_string(view_cols(inducing.view())) +
                            " features, data has " + std::to_string(data.d()));
  return make_stream_context<T>(data.view(), inducing.view(), options.kernel, options.policy,
                                options.budget, options.ledger, options.plan, options.pipeline,
                                2, true);
}

template <typename T>
StepOutput<T> newton_step(const Dataset<T>& data, const InducingSet<T>& inducing,
                          const StreamContext<T>& ctx, const GscLoss& loss, double mu,
                          std::size_t t, std::span<const double> alpha0,
                          const GscOptions& options, const CgObserver& on_alpha) {
  if (alpha0.size() != inducing.m())
    throw DimensionMismatch("starting coefficients have length " + std::to_string(alpha0.size()) +
                            ", expected " + std::to_string(inducing.m()));
  PreconditionerOptions popts;
  popts.budget = options.budget;
  popts.ledger = options.ledger;
  popts.policy = options.policy;
  popts.ooc = options.ooc;
  const auto y_m = inducing_targets(data, inducing);
  const auto start = std::chrono::steady_clock::now();
  StepOutput<T> out{{},
                    build_weighted_preconditioner<T>(inducing.view(), y_m, alpha0, loss, mu,
                                                     options.kernel, data.n(), popts)};
  out.preconditioner_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& prec = out.prec;
  const auto rhs = newton_rhs(prec, ctx, data.y, loss, alpha0);
  auto beta0 = prec.apply(alpha0, Factor::kT, false, false);
  prec.apply_inplace(beta0, Factor::kA, false, false);

  CgConfig cfg;
  cfg.max_iters = t;
  cfg.record_history = true;
  CgObserver observer;
  if (on_alpha)
    observer = [&](std::size_t it, std::span<const double> beta) {
      on_alpha(it, alpha_from_beta(prec, beta));
    };
  auto cg = conjugate_gradient(
      [&](std::span<const double> beta) {
        return weighted_linop_apply(prec, ctx, data.y, loss, alpha0, mu, beta);
      },
      rhs, cfg, beta0, observer);
  out.result.alpha = alpha_from_beta(prec, cg.x);
  out.result.iterations = cg.iterations;
  out.result.residual_norms = std::move(cg.residual_norms);
  return out;
}

}  // namespace

template <typename T>
StepResult weighted_falkon_step(const Dataset<T>& data, const InducingSet<T>& inducing,
                                const GscLoss& loss, double mu, std::size_t t,
                                std::span<const double> alpha0, const GscOptions& options,
                                const CgObserver& on_alpha) {
  check_inputs(data, loss);
  if (!(mu > 0.0)) throw InvalidArgument("the regularization level must be positive");
  if (t == 0) throw InvalidArgument("at least one iteration is required");
  const auto ctx = gsc_context(data, inducing, options);
  return newton_step(data, inducing, ctx, loss, mu, t, alpha0, options, on_alpha).result;
}

template <typename T>
GscFit<T> gsc_falkon_fit(const Dataset<T>& data, InducingSet<T> inducing, const GscLoss& loss,
                         const NewtonPath& path, const GscOptions& options) {
  check_inputs(data, loss);
  options.kernel.validate();
  const auto levels = path.levels();
  const auto start = std::chrono::steady_clock::now();
  const auto ctx = gsc_context(data, inducing, options);

  GscFit<T> fit;
  std::vector<double> alpha(inducing.m(), 0.0);
  std::size_t total_iterations = 0;
  double preconditioner_seconds = 0.0;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const double mu = levels[k];
    const std::size_t t = k + 1 == levels.size() ? path.t_final : path.t_inner;
    auto step = newton_step(data, inducing, ctx, loss, mu, t, alpha, options, {});
    alpha = std::move(step.result.alpha);
    total_iterations += step.result.iterations;
    preconditioner_seconds += step.preconditioner_seconds;
    const double objective = gsc_objective(step.prec, ctx, data.y, loss, alpha, mu);
    if (!fit.report.steps.empty() && objective >= fit.report.steps.back().objective) {
      std::ostringstream msg;
      msg << "objective did not decrease at outer step " << k << " (mu=" << mu << "): "
          << fit.report.steps.back().objective << " -> " << objective;
      fit.report.warnings.push_back(msg.str());
    }
    fit.report.steps.push_back({mu, step.result.iterations, objective});
    if (k + 1 == levels.size()) {
      fit.model.info.residual_norms = std::move(step.result.residual_norms);
      fit.model.info.jitter_retries_t = step.prec.jitter_retries_t();
      fit.model.info.jitter_retries_a = step.prec.jitter_retries_a();
    }
  }
  fit.model.alpha = std::move(alpha);
  fit.model.kernel = options.kernel;
  fit.model.lam = path.lam_final;
  fit.model.iterations = total_iterations;
  fit.model.seed = inducing.seed;
  fit.model.info.plan = ctx.plan;
  fit.model.info.iterations = total_iterations;
  fit.model.info.preconditioner_seconds = preconditioner_seconds;
  fit.model.info.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() -
      preconditioner_seconds;
  fit.model.inducing = std::move(inducing);
  return fit;
}

template <typename T>
GscFit<T> gsc_falkon_fit(const Dataset<T>& data, const GscLoss& loss, const NewtonPath& path,
                         const GscOptions& options) {
  data.validate();
  path.validate();
  return gsc_falkon_fit(data, subsample_inducing(data, options.m, options.seed), loss, path,
                        options);
}

#define FALKON_INSTANTIATE_GSC(T)                                                              \
  template double gsc_objective<T>(const Preconditioner<T>&, const StreamContext<T>&,          \
                                   std::span<const double>, const GscLoss&,                    \
                                   std::span<const double>, double);                           \
  template std::vector<double> weighted_linop_apply<T>(                                        \
      const Preconditioner<T>&, const StreamContext<T>&, std::span<const double>,              \
      const GscLoss&, std::span<const double>, double, std::span<const double>);               \
  template std::vector<double> newton_rhs<T>(const Preconditioner<T>&, const StreamContext<T>&, \
                                             std::span<const double>, const GscLoss&,          \
                                             std::span<const double>);                         \
  template StepResult weighted_falkon_step<T>(const Dataset<T>&, const InducingSet<T>&,        \
                                              const GscLoss&, double, std::size_t,             \
                                              std::span<const double>, const GscOptions&,      \
                                              const CgObserver&);                              \
  template GscFit<T> gsc_falkon_fit<T>(const Dataset<T>&, InducingSet<T>, const GscLoss&,      \
                                       const NewtonPath&, const GscOptions&);                  \
  template GscFit<T> gsc_falkon_fit<T>(const Dataset<T>&, const GscLoss&, const NewtonPath&,   \
                                       const GscOptions&);

FALKON_INSTANTIATE_GSC(float)
FALKON_INSTANTIATE_GSC(double)

}  // namespace falkon

#include "falkon/cg.hpp"

#include <cmath>
#include <string>

#include "falkon/error.hpp"

namespace falkon {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

CgResult conjugate_gradient(const LinearOperator& apply, std::span<const double> rhs,
                            const CgConfig& config, std::span<const double> x0,
                            const CgObserver& on_iterate) {
  if (config.max_iters == 0) throw InvalidArgument("conjugate gradient needs at least one step");
  const std::size_t n = rhs.size();
  if (!x0.empty() && x0.size() != n)
    throw DimensionMismatch("start vector has length " +
                            std::to_string(x0.size()) + ", right-hand side " + std::to_string(n));

  CgResult res;
  res.x.assign(n, 0.0);
  std::vector<double> r(rhs.begin(), rhs.end());
  if (!x0.empty()) {
    std::copy(x0.begin(), x0.end(), res.x.begin());
    const auto ax = apply(res.x);
    if (ax.size() != n) throw DimensionMismatch("operator output length");
    for (std::size_t i = 0; i < n; ++i) r[i] -= ax[i];
  }
  const double b_norm = std::sqrt(dot(rhs, rhs));
  double rr = dot(r, r);
  if (!std::isfinite(rr)) throw DivergenceError(0);
  if (config.record_history) res.residual_norms.push_back(std::sqrt(rr));
  auto small_enough = [&](double rr_now) {
    if (rr_now == 0.0) return true;
    return config.residual_tol && std::sqrt(rr_now) <= *config.residual_tol * b_norm;
  };
  if (small_enough(rr)) {
    res.converged = true;
    return res;
  }

  std::vector<double> p = r;
  for (std::size_t it = 1; it <= config.max_iters; ++it) {
    const auto ap = apply(p);
    if (ap.size() != n) throw DimensionMismatch("operator output length");
    const double pap = dot(p, ap);
    const double step = rr / pap;
    if (!std::isfinite(step)) throw DivergenceError(it);
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += step * p[i];
      r[i] -= step * ap[i];
    }
    const double rr_next = dot(r, r);
    if (!std::isfinite(rr_next)) throw DivergenceError(it);
    res.iterations = it;
    if (config.record_history) res.residual_norms.push_back(std::sqrt(rr_next));
    if (on_iterate) on_iterate(it, res.x);
    if (small_enough(rr_next)) {
      res.converged = true;
      break;
    }
    const double beta = rr_next / rr;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    rr = rr_next;
  }
  return res;
}

}  // namespace falkon

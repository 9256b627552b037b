#include "falkon/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "falkon/error.hpp"

namespace falkon {

namespace {

void check_pair(std::span<const double> p, std::span<const double> y) {
  if (p.size() != y.size())
    throw DimensionMismatch(std::to_string(p.size()) + " predictions for " +
                            std::to_string(y.size()) + " targets");
  if (p.empty()) throw InvalidArgument("metrics need at least one prediction");
}

double label_sign(double y) {
  if (y == 1.0) return 1.0;
  if (y == -1.0 || y == 0.0) return -1.0;
  throw InvalidArgument("classification labels must be {-1, +1} or {0, 1}");
}

}  // namespace

MetricKind parse_metric(const std::string& name) {
  if (name == "rmse") return MetricKind::kRmse;
  if (name == "rel-rmse") return MetricKind::kRelRmse;
  if (name == "c-error") return MetricKind::kCError;
  if (name == "one-minus-auc") return MetricKind::kOneMinusAuc;
  throw InvalidArgument("unknown metric '" + name + "'");
}

std::string metric_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::kRmse: return "rmse";
    case MetricKind::kRelRmse: return "rel-rmse";
    case MetricKind::kCError: return "c-error";
    default: return "one-minus-auc";
  }
}

double rmse(std::span<const double> p, std::span<const double> y) {
  check_pair(p, y);
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - y[i]) * (p[i] - y[i]);
  return std::sqrt(s / static_cast<double>(p.size()));
}

double rel_rmse(std::span<const double> p, std::span<const double> y) {
  check_pair(p, y);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    num += (p[i] - y[i]) * (p[i] - y[i]);
    den += y[i] * y[i];
  }
  if (den == 0.0) throw InvalidArgument("relative error is undefined for all-zero targets");
  return std::sqrt(num / den);
}

double c_error(std::span<const double> p, std::span<const double> y) {
  check_pair(p, y);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < p.size(); ++i) wrong += (p[i] > 0.0 ? 1.0 : -1.0) != label_sign(y[i]);
  return static_cast<double>(wrong) / static_cast<double>(p.size());
}

double auc(std::span<const double> p, std::span<const double> y) {
  check_pair(p, y);
  const std::size_t n = p.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  // Sum of the (tie-averaged) ranks of the positives; ranks are doubled to
  // stay integral.
  double rank_sum2 = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && p[order[j]] == p[order[i]]) ++j;
    const double avg2 = static_cast<double>(i + j + 1);  // 2 * mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k)
      if (y[order[k]] > 0.0) {
        rank_sum2 += avg2;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw InvalidArgument("AUC is undefined when a class is absent");
  const double p1 = static_cast<double>(pos);
  const double u2 = rank_sum2 - p1 * (p1 + 1.0);
  return u2 / (2.0 * p1 * static_cast<double>(neg));
}

MetricReport compute_metric(MetricKind kind, std::span<const double> p,
                            std::span<const double> y) {
  MetricReport r;
  r.kind = kind;
  r.n_eval = p.size();
  switch (kind) {
    case MetricKind::kRmse: r.value = rmse(p, y); break;
    case MetricKind::kRelRmse: r.value = rel_rmse(p, y); break;
    case MetricKind::kCError: r.value = c_error(p, y); break;
    case MetricKind::kOneMinusAuc: r.value = 1.0 - auc(p, y); break;
  }
  return r;
}

}  // namespace falkon

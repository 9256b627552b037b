#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace falkon {

enum class MetricKind { kRmse, kRelRmse, kCError, kOneMinusAuc };

/// "rmse", "rel-rmse", "c-error" or "one-minus-auc".
MetricKind parse_metric(const std::string& name);
std::string metric_name(MetricKind kind);

struct MetricReport {
  MetricKind kind = MetricKind::kRmse;
  double value = 0.0;
  std::size_t n_eval = 0;
  std::vector<std::pair<std::string, double>> timings;  // seconds per phase
};

double rmse(std::span<const double> p, std::span<const double> y);
/// ||p - y|| / ||y||.
double rel_rmse(std::span<const double> p, std::span<const double> y);
/// Fraction of rows where the sign of p (p > 0 is +1) differs from the label.
/// Labels may be {-1, +1} or {0, 1}.
double c_error(std::span<const double> p, std::span<const double> y);
/// Mann-Whitney AUC of p as a score for y > 0, ties counted one half.
/// Throws InvalidArgument when either class is absent.
double auc(std::span<const double> p, std::span<const double> y);

/// Throws DimensionMismatch for different lengths and InvalidArgument for
/// empty input.
MetricReport compute_metric(MetricKind kind, std::span<const double> p,
                            std::span<const double> y);

}  // namespace falkon

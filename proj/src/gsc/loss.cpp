#include "falkon/loss.hpp"

#include <algorithm>
#include <cmath>

#include "falkon/error.hpp"

namespace falkon {

namespace {

// log(1 + e^t) without overflow.
double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

// 1 / (1 + e^-t) without overflow.
double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

GscLoss GscLoss::from_name(const std::string& name) {
  if (name == "logistic") return logistic();
  if (name == "robust") return robust();
  if (name == "squared") return squared();
  throw InvalidArgument("unknown loss '" + name + "'");
}

std::string GscLoss::name() const {
  switch (kind_) {
    case LossKind::kLogistic: return "logistic";
    case LossKind::kRobust: return "robust";
    default: return "squared";
  }
}

void GscLoss::check_label(double y) const {
  if (kind_ == LossKind::kLogistic && y != 1.0 && y != -1.0)
    throw InvalidArgument("invalid label for the logistic loss (expected -1 or +1)");
  if (!std::isfinite(y)) throw InvalidArgument("invalid label: not finite");
}

LossValue GscLoss::eval(double z, double y) const {
  check_label(y);
  switch (kind_) {
    case LossKind::kLogistic: {
      const double margin = y * z;
      return {softplus(-margin), -y * sigmoid(-margin), sigmoid(z) * sigmoid(-z)};
    }
    case LossKind::kRobust: {
      const double u = z - y;
      const double a = std::abs(u);
      const double th = std::tanh(u);
      return {a + std::log1p(std::exp(-2.0 * a)), th, 1.0 - th * th};
    }
    default: {
      const double u = z - y;
      return {0.5 * u * u, u, 1.0};
    }
  }
}

}  // namespace falkon

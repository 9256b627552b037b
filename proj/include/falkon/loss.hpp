#pragma once

#include <string>

namespace falkon {

enum class LossKind { kSquared, kLogistic, kRobust };

struct LossValue {
  double value = 0.0;
  double d1 = 0.0;  // first derivative in z
  double d2 = 0.0;  // second derivative in z
};

/// Losses l(z, y) of a prediction z against a target y, with derivatives in
/// z. Logistic: log(1 + exp(-y z)) for y in {-1, +1}. Robust: phi(z - y) with
/// phi(u) = log(e^u + e^-u). Squared: (z - y)^2 / 2, whose unit curvature
/// reduces the weighted solver to the plain one.
class GscLoss {
 public:
  static GscLoss logistic() { return GscLoss(LossKind::kLogistic); }
  static GscLoss robust() { return GscLoss(LossKind::kRobust); }
  static GscLoss squared() { return GscLoss(LossKind::kSquared); }
  /// Parses "logistic", "robust" or "squared".
  static GscLoss from_name(const std::string& name);

  LossKind kind() const noexcept { return kind_; }
  std::string name() const;

  /// Throws InvalidArgument for a logistic label outside {-1, +1}.
  void check_label(double y) const;
  LossValue eval(double z, double y) const;
  double value(double z, double y) const { return eval(z, y).value; }
  double d1(double z, double y) const { return eval(z, y).d1; }
  double d2(double z, double y) const { return eval(z, y).d2; }

 private:
  explicit GscLoss(LossKind kind) : kind_(kind) {}
  LossKind kind_;
};

inline LossValue loss_eval(const GscLoss& loss, double z, double y) { return loss.eval(z, y); }

}  // namespace falkon

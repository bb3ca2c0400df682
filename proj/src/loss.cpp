#include "umcam/loss.hpp"

#include <algorithm>
#include <cmath>

#include "umcam/error.hpp"

namespace umcam::loss {

void LossConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ContractError("loss: lambda must lie in [0, 1]");
  if (!(epsilon > 0.0 && epsilon <= 1e-4)) throw ContractError("loss: epsilon must lie in (0, 1e-4]");
}

double binary_cross_entropy(const ScalarMap& pred, const ScalarMap& target, double epsilon) {
  if (pred.shape() != target.shape()) throw ContractError("binary_cross_entropy: shape mismatch");
  if (pred.min() < 0.0 || pred.max() > 1.0 || target.min() < 0.0 || target.max() > 1.0) {
    throw ContractError("binary_cross_entropy: values must lie in [0, 1]");
  }
  const auto p = pred.values();
  const auto t = target.values();
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    total -= t[i] * std::log(std::max(p[i], epsilon)) + (1.0 - t[i]) * std::log(std::max(1.0 - p[i], epsilon));
  }
  // -0.0 and tiny negative rounding at perfect predictions collapse to 0.
  return std::max(0.0, total / static_cast<double>(p.size()));
}

JointLoss joint_loss(const ScalarMap& pred, const ScalarMap& um_cam, const ScalarMap& spl_target,
                     const LossConfig& config) {
  config.validate();
  JointLoss out;
  out.ce_um = binary_cross_entropy(pred, um_cam, config.epsilon);
  out.ce_spl = binary_cross_entropy(pred, spl_target, config.epsilon);
  out.total = config.lambda * out.ce_um + (1.0 - config.lambda) * out.ce_spl;
  return out;
}

}  // namespace umcam::loss

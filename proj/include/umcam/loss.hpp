#pragma once

#include "umcam/grid.hpp"

namespace umcam::loss {

struct LossConfig {
  /// Weight of the UM-CAM term; the SPL term gets 1 - lambda.
  double lambda = 0.1;
  /// Lower clamp for log arguments.
  double epsilon = 1e-7;

  void validate() const;
};

/// Pixel-mean binary cross-entropy of `pred` against a (possibly soft)
/// target, with log arguments clamped to `epsilon`.
double binary_cross_entropy(const ScalarMap& pred, const ScalarMap& target, double epsilon = 1e-7);

struct JointLoss {
  double total = 0.0;
  double ce_um = 0.0;
  double ce_spl = 0.0;
};

/// lambda * CE(pred, um_cam) + (1 - lambda) * CE(pred, spl_target).
JointLoss joint_loss(const ScalarMap& pred, const ScalarMap& um_cam, const ScalarMap& spl_target,
                     const LossConfig& config);

}  // namespace umcam::loss

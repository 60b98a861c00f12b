#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "dfsfm/scene_model.hpp"

namespace dfsfm {

struct BAOptions {
  /// Cauchy robust-loss scale in pixels: rho(s) = c^2 log(1 + s / c^2) with
  /// s the squared residual norm.
  double loss_scale_px = 1.0;
  int max_iterations = 50;
  double rel_cost_tol = 1e-8;
  double init_lambda = 1e-4;
  double max_lambda = 1e12;
  /// Refine per-image intrinsics blocks (fx, fy, cx, cy, k1).
  bool refine_intrinsics = false;
  /// Images whose poses move; empty = all registered images. Images outside
  /// the set act as fixed anchors (local BA).
  std::set<ImageId> variable_images;
  /// Pin the gauge by fully fixing one pose and one translation component of
  /// another. Applied automatically whenever no fixed camera anchors the
  /// problem; forced off only makes sense for testing.
  bool fix_gauge = true;
  /// Image-count threshold switching the reduced camera system from a dense
  /// to a sparse factorization.
  int dense_schur_max_images = 500;
};

struct BAReport {
  bool converged = false;
  bool rank_deficient = false;
  int iterations = 0;  // accepted steps
  double initial_cost = 0.0;
  double final_cost = 0.0;
  /// Robust cost after each accepted step (non-increasing by construction).
  std::vector<double> accepted_costs;
  /// Gauge anchors actually used (kInvalidImageId when anchored by fixed
  /// cameras instead).
  ImageId gauge_full_image = kInvalidImageId;
  ImageId gauge_tdof_image = kInvalidImageId;
  int gauge_tdof_index = -1;
  /// Entry/exit values of the gauge-anchored parameters: the fully fixed
  /// pose flattened as R row-major followed by t, and the pinned translation
  /// component of the second anchor. Anchored parameters must leave BA
  /// bit-identical; exposing both sides lets callers assert exactly that.
  /// Zero when the gauge anchors were not engaged.
  Eigen::Matrix<double, 12, 1> gauge_full_entry = Eigen::Matrix<double, 12, 1>::Zero();
  Eigen::Matrix<double, 12, 1> gauge_full_exit = Eigen::Matrix<double, 12, 1>::Zero();
  double gauge_tdof_entry = 0.0;
  double gauge_tdof_exit = 0.0;
};

/// Robust bundle adjustment over the registered poses, triangulated points,
/// and (optionally) per-image intrinsics of `model`. Levenberg–Marquardt on
/// the Cauchy-robustified reprojection cost; the normal equations are reduced
/// via the Schur complement over point blocks. Rotations update as
/// R <- Exp(delta) * R. Gauge: the two farthest-apart registered views are
/// selected, the lower-id view's pose is fully fixed and the other view loses
/// its largest-magnitude translation component.
BAReport BundleAdjust(SceneModel& model, const BAOptions& options = {});

/// Robust cost of the current model state under the same convention
/// BundleAdjust minimizes (variable set = all registered images).
double RobustReprojectionCost(const SceneModel& model, double loss_scale_px);

}  // namespace dfsfm

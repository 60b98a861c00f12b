#pragma once

#include <Eigen/Core>
#include <vector>

#include "dfsfm/camera.hpp"
#include "dfsfm/pose.hpp"
#include "dfsfm/ransac.hpp"

namespace dfsfm {

enum class PnPStatus {
  kOk,
  kInsufficientData,  // fewer than 4 correspondences
  kNoConsensus,       // best inlier set below the configured minimum
};

struct PnPResult {
  PnPStatus status = PnPStatus::kInsufficientData;
  Pose pose;
  std::vector<char> inlier_mask;
  int num_inliers = 0;

  bool ok() const { return status == PnPStatus::kOk; }
};

struct PnPOptions {
  RansacOptions ransac;
  int min_inliers = 15;
  /// Gauss-Newton iterations for the pose polish on the final inlier set.
  int refine_iterations = 20;
};

/// Minimal three-point pose solver (Grunert). Returns up to four camera-frame
/// solutions as world-to-camera poses. Exposed for testing.
std::vector<Pose> SolveP3P(const std::vector<Eigen::Vector2d>& pixels,
                           const std::vector<Eigen::Vector3d>& points,
                           const CameraIntrinsics& intrinsics);

/// Nonlinear pose-only refinement minimizing pixel reprojection error over
/// the masked correspondences (mask empty = use all).
Pose RefinePoseGaussNewton(Pose pose, const std::vector<Eigen::Vector2d>& pixels,
                           const std::vector<Eigen::Vector3d>& points,
                           const CameraIntrinsics& intrinsics, const std::vector<char>& mask,
                           int iterations);

/// P3P + RANSAC + nonlinear polish. Correspondences are (pixel, world point)
/// pairs at matching indices.
PnPResult SolvePnPRansac(const std::vector<Eigen::Vector2d>& pixels,
                         const std::vector<Eigen::Vector3d>& points,
                         const CameraIntrinsics& intrinsics, const PnPOptions& options = {});

}  // namespace dfsfm

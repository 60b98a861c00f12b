#pragma once

#include <Eigen/Core>
#include <vector>

#include "dfsfm/camera.hpp"
#include "dfsfm/pose.hpp"
#include "dfsfm/ransac.hpp"

namespace dfsfm {

/// Eight-point fundamental matrix with Hartley normalization, rank-2
/// enforced. Constraint convention: x_b^T F x_a = 0.
Eigen::Matrix3d FitFundamental8Point(const std::vector<Eigen::Vector2d>& xa,
                                     const std::vector<Eigen::Vector2d>& xb);

/// Eight-point essential matrix on ideal normalized coordinates, singular
/// values forced to (s, s, 0). Constraint convention: n_b^T E n_a = 0.
Eigen::Matrix3d FitEssential8Point(const std::vector<Eigen::Vector2d>& na,
                                   const std::vector<Eigen::Vector2d>& nb);

/// First-order (Sampson) distance of a correspondence to the epipolar
/// constraint x_b^T F x_a = 0, in the units of the input coordinates.
double SampsonDistance(const Eigen::Matrix3d& F, const Eigen::Vector2d& xa,
                       const Eigen::Vector2d& xb);

enum class RelPoseStatus {
  kOk,
  kInsufficientData,  // fewer than 8 matches
  kNoConsensus,       // best inlier set below the configured minimum
  kDegenerate,        // near-zero parallax: translation direction unreliable
};

struct RelativePoseResult {
  RelPoseStatus status = RelPoseStatus::kInsufficientData;
  /// Maps camera-a coordinates to camera-b coordinates; |t| == 1.
  Pose pose_b_from_a;
  std::vector<char> inlier_mask;
  int num_inliers = 0;
  double median_tri_angle_rad = 0.0;

  bool ok() const { return status == RelPoseStatus::kOk; }
};

struct RelativePoseOptions {
  RansacOptions ransac;
  int min_inliers = 15;
  double min_tri_angle_deg = 1.5;
};

/// Essential-matrix RANSAC over pixel matches (xa[i] in image a matches xb[i]
/// in image b), cheirality-resolved decomposition, unit-norm translation.
RelativePoseResult SolveRelativePoseRansac(const std::vector<Eigen::Vector2d>& xa,
                                           const std::vector<Eigen::Vector2d>& xb,
                                           const CameraIntrinsics& intr_a,
                                           const CameraIntrinsics& intr_b,
                                           const RelativePoseOptions& options = {});

}  // namespace dfsfm

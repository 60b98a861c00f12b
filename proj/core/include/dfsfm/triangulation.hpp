#pragma once

#include <Eigen/Core>
#include <vector>

#include "dfsfm/camera.hpp"
#include "dfsfm/pose.hpp"

namespace dfsfm {

/// One registered view observing the point to triangulate.
struct ViewObservation {
  Eigen::Vector2d xy = Eigen::Vector2d::Zero();  // pixels
  Pose pose;
  CameraIntrinsics intrinsics;
};

enum class TriangulationStatus {
  kOk,
  kInsufficientObservations,
  kDegenerate,  // best pairwise triangulation angle below the minimum
  kCheirality,  // point behind at least one camera
};

struct TriangulationResult {
  TriangulationStatus status = TriangulationStatus::kInsufficientObservations;
  Eigen::Vector3d point = Eigen::Vector3d::Zero();
  double max_reprojection_error_px = 0.0;
  /// Largest pairwise parallax angle at the point; one wide-baseline pair is
  /// enough to fix depth, so the degeneracy test uses the maximum.
  double tri_angle_rad = 0.0;

  bool ok() const { return status == TriangulationStatus::kOk; }
};

struct TriangulationOptions {
  double min_tri_angle_deg = 1.5;
  /// Polish the DLT solution with a few Gauss-Newton steps on pixel
  /// reprojection error.
  bool refine = true;
  int max_refine_iterations = 10;
};

/// Multi-view DLT triangulation in ideal (undistorted) normalized coordinates,
/// optionally refined on pixel reprojection error.
TriangulationResult TriangulateMultiview(const std::vector<ViewObservation>& views,
                                         const TriangulationOptions& options = {});

}  // namespace dfsfm

#pragma once

#include <Eigen/Core>
#include <optional>

#include "dfsfm/camera.hpp"
#include "dfsfm/pose.hpp"

namespace dfsfm {

/// Minimum camera-frame depth for a point to count as in front of the camera.
inline constexpr double kMinDepth = 1e-6;

/// Project a world point into pixel coordinates. Returns nullopt when the
/// point lies at or behind the camera plane (depth <= kMinDepth).
std::optional<Eigen::Vector2d> ProjectPoint(const Pose& pose, const CameraIntrinsics& intrinsics,
                                            const Eigen::Vector3d& x_world);

/// Camera-frame depth of a world point (z component after the rigid transform).
double PointDepth(const Pose& pose, const Eigen::Vector3d& x_world);

bool HasPositiveDepth(const Pose& pose, const Eigen::Vector3d& x_world);

/// Reprojection error in pixels; +infinity when the point is behind the camera.
double ReprojectionError(const Pose& pose, const CameraIntrinsics& intrinsics,
                         const Eigen::Vector3d& x_world, const Eigen::Vector2d& observed_px);

/// Unit-norm viewing ray in world coordinates through the given pixel.
Eigen::Vector3d PixelRayWorld(const Pose& pose, const CameraIntrinsics& intrinsics,
                              const Eigen::Vector2d& px);

/// Back-project a pixel to the world point at the given camera-frame depth.
Eigen::Vector3d UnprojectPixel(const Pose& pose, const CameraIntrinsics& intrinsics,
                               const Eigen::Vector2d& px, double depth);

/// Triangulation (parallax) angle at a world point seen from two camera centers.
double TriangulationAngle(const Eigen::Vector3d& center_a, const Eigen::Vector3d& center_b,
                          const Eigen::Vector3d& x_world);

/// Projection with analytic derivatives, shared by every nonlinear refinement.
///
/// With p_cam = R * X + t, the pixel derivative w.r.t. pose and structure
/// follows by chain rule from d_cam:
///   d(px)/d(rotation delta) = d_cam * (-Skew(R * X))   [R <- Exp(delta) * R]
///   d(px)/d(t)              = d_cam
///   d(px)/d(X)              = d_cam * R
struct ProjectionDerivatives {
  bool valid = false;  // false when depth <= kMinDepth; derivatives unusable
  Eigen::Vector2d px = Eigen::Vector2d::Zero();
  Eigen::Matrix<double, 2, 3> d_cam = Eigen::Matrix<double, 2, 3>::Zero();
  /// Derivative w.r.t. intrinsics in the order (fx, fy, cx, cy, k1).
  Eigen::Matrix<double, 2, 5> d_intr = Eigen::Matrix<double, 2, 5>::Zero();
};

ProjectionDerivatives ProjectWithJacobian(const Pose& pose, const CameraIntrinsics& intrinsics,
                                          const Eigen::Vector3d& x_world);

}  // namespace dfsfm

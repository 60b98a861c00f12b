#include "dfsfm/projection.hpp"

#include <cmath>
#include <limits>

namespace dfsfm {

std::optional<Eigen::Vector2d> ProjectPoint(const Pose& pose, const CameraIntrinsics& intrinsics,
                                            const Eigen::Vector3d& x_world) {
  const Eigen::Vector3d x_cam = pose.Apply(x_world);
  if (x_cam.z() <= kMinDepth) return std::nullopt;
  const Eigen::Vector2d n(x_cam.x() / x_cam.z(), x_cam.y() / x_cam.z());
  return intrinsics.IdealToPixel(n);
}

double PointDepth(const Pose& pose, const Eigen::Vector3d& x_world) {
  return pose.Apply(x_world).z();
}

bool HasPositiveDepth(const Pose& pose, const Eigen::Vector3d& x_world) {
  return PointDepth(pose, x_world) > kMinDepth;
}

double ReprojectionError(const Pose& pose, const CameraIntrinsics& intrinsics,
                         const Eigen::Vector3d& x_world, const Eigen::Vector2d& observed_px) {
  const auto projected = ProjectPoint(pose, intrinsics, x_world);
  if (!projected) return std::numeric_limits<double>::infinity();
  return (*projected - observed_px).norm();
}

Eigen::Vector3d PixelRayWorld(const Pose& pose, const CameraIntrinsics& intrinsics,
                              const Eigen::Vector2d& px) {
  const Eigen::Vector2d n = intrinsics.PixelToIdeal(px);
  const Eigen::Vector3d ray_cam(n.x(), n.y(), 1.0);
  return (pose.R.transpose() * ray_cam).normalized();
}

Eigen::Vector3d UnprojectPixel(const Pose& pose, const CameraIntrinsics& intrinsics,
                               const Eigen::Vector2d& px, double depth) {
  const Eigen::Vector2d n = intrinsics.PixelToIdeal(px);
  const Eigen::Vector3d x_cam(n.x() * depth, n.y() * depth, depth);
  return pose.R.transpose() * (x_cam - pose.t);
}

double TriangulationAngle(const Eigen::Vector3d& center_a, const Eigen::Vector3d& center_b,
                          const Eigen::Vector3d& x_world) {
  return AngleBetween(center_a - x_world, center_b - x_world);
}

ProjectionDerivatives ProjectWithJacobian(const Pose& pose, const CameraIntrinsics& intrinsics,
                                          const Eigen::Vector3d& x_world) {
  ProjectionDerivatives out;
  const Eigen::Vector3d pc = pose.Apply(x_world);
  if (pc.z() <= kMinDepth) return out;
  out.valid = true;

  const double inv_z = 1.0 / pc.z();
  const Eigen::Vector2d n(pc.x() * inv_z, pc.y() * inv_z);
  const double r2 = n.squaredNorm();
  const double scale = 1.0 + intrinsics.k1 * r2;
  const Eigen::Vector2d d = n * scale;
  out.px = intrinsics.NormalizedToPixel(d);

  // d(n)/d(p_cam)
  Eigen::Matrix<double, 2, 3> dn_dpc;
  dn_dpc << inv_z, 0.0, -pc.x() * inv_z * inv_z,  //
      0.0, inv_z, -pc.y() * inv_z * inv_z;
  // d(d)/d(n) = scale * I + 2 * k1 * n * n^T
  const Eigen::Matrix2d dd_dn =
      scale * Eigen::Matrix2d::Identity() + 2.0 * intrinsics.k1 * n * n.transpose();
  Eigen::Matrix2d dpx_dd = Eigen::Matrix2d::Zero();
  dpx_dd(0, 0) = intrinsics.fx;
  dpx_dd(1, 1) = intrinsics.fy;
  out.d_cam = dpx_dd * dd_dn * dn_dpc;

  out.d_intr.setZero();
  out.d_intr(0, 0) = d.x();  // d(px)/d(fx)
  out.d_intr(1, 1) = d.y();  // d(px)/d(fy)
  out.d_intr(0, 2) = 1.0;    // d(px)/d(cx)
  out.d_intr(1, 3) = 1.0;    // d(px)/d(cy)
  out.d_intr(0, 4) = intrinsics.fx * n.x() * r2;  // d(px)/d(k1)
  out.d_intr(1, 4) = intrinsics.fy * n.y() * r2;
  return out;
}

}  // namespace dfsfm

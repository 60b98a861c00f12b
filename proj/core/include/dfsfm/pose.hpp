#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dfsfm {

/// Rigid world-to-camera transform: x_cam = R * x_world + t.
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  static Pose Identity() { return {}; }

  Eigen::Vector3d Apply(const Eigen::Vector3d& x_world) const { return R * x_world + t; }

  /// Camera center in world coordinates: C = -R^T t.
  Eigen::Vector3d Center() const { return -R.transpose() * t; }

  Pose Inverse() const {
    Pose inv;
    inv.R = R.transpose();
    inv.t = -(R.transpose() * t);
    return inv;
  }

  /// Composition: (a * b).Apply(x) == a.Apply(b.Apply(x)).
  friend Pose operator*(const Pose& a, const Pose& b) {
    Pose out;
    out.R = a.R * b.R;
    out.t = a.R * b.t + a.t;
    return out;
  }

  /// Relative transform mapping camera-a coords to camera-b coords.
  static Pose Between(const Pose& a, const Pose& b) { return b * a.Inverse(); }
};

/// Rodrigues exponential: axis-angle vector -> rotation matrix.
Eigen::Matrix3d ExpSO3(const Eigen::Vector3d& omega);

/// Rodrigues logarithm: rotation matrix -> axis-angle vector.
Eigen::Vector3d LogSO3(const Eigen::Matrix3d& R);

/// Skew-symmetric cross-product matrix [v]_x.
Eigen::Matrix3d Skew(const Eigen::Vector3d& v);

/// Re-orthonormalize a near-rotation via SVD projection onto SO(3).
Eigen::Matrix3d ProjectToSO3(const Eigen::Matrix3d& M);

/// Rotation angle in radians between two rotations.
double RotationAngle(const Eigen::Matrix3d& Ra, const Eigen::Matrix3d& Rb);

/// Angle in radians between two direction vectors, safe for near-parallel input.
double AngleBetween(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

}  // namespace dfsfm

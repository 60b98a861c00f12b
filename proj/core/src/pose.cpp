#include "dfsfm/pose.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace dfsfm {

Eigen::Matrix3d Skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Matrix3d ExpSO3(const Eigen::Vector3d& omega) {
  const double theta = omega.norm();
  if (theta < 1e-12) {
    // First-order expansion keeps the result orthogonal to machine precision
    // after the SVD projection below is unnecessary at this magnitude.
    return Eigen::Matrix3d::Identity() + Skew(omega);
  }
  const Eigen::Vector3d axis = omega / theta;
  return Eigen::AngleAxisd(theta, axis).toRotationMatrix();
}

Eigen::Vector3d LogSO3(const Eigen::Matrix3d& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

Eigen::Matrix3d ProjectToSO3(const Eigen::Matrix3d& M) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return R;
}

double RotationAngle(const Eigen::Matrix3d& Ra, const Eigen::Matrix3d& Rb) {
  const double c = 0.5 * ((Ra.transpose() * Rb).trace() - 1.0);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

double AngleBetween(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  const double c = a.dot(b) / (na * nb);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace dfsfm

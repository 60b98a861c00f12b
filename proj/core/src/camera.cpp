#include "dfsfm/camera.hpp"

#include <algorithm>
#include <cmath>

namespace dfsfm {

CameraIntrinsics CameraIntrinsics::FromImageSize(std::uint32_t width, std::uint32_t height) {
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  const double f = 1.2 * static_cast<double>(std::max(width, height));
  k.fx = f;
  k.fy = f;
  k.cx = 0.5 * static_cast<double>(width);
  k.cy = 0.5 * static_cast<double>(height);
  k.k1 = 0.0;
  return k;
}

Eigen::Matrix3d CameraIntrinsics::K() const {
  Eigen::Matrix3d k = Eigen::Matrix3d::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

Eigen::Vector2d CameraIntrinsics::NormalizedToPixel(const Eigen::Vector2d& n) const {
  return {fx * n.x() + cx, fy * n.y() + cy};
}

Eigen::Vector2d CameraIntrinsics::PixelToNormalized(const Eigen::Vector2d& px) const {
  return {(px.x() - cx) / fx, (px.y() - cy) / fy};
}

Eigen::Vector2d CameraIntrinsics::Distort(const Eigen::Vector2d& n) const {
  return n * (1.0 + k1 * n.squaredNorm());
}

Eigen::Vector2d CameraIntrinsics::Undistort(const Eigen::Vector2d& nd) const {
  if (k1 == 0.0) return nd;
  // Fixed-point iteration n <- nd / (1 + k1 |n|^2), converges for the
  // mild distortion this model is meant for.
  Eigen::Vector2d n = nd;
  for (int i = 0; i < 20; ++i) {
    const double scale = 1.0 + k1 * n.squaredNorm();
    const Eigen::Vector2d next = nd / scale;
    if ((next - n).norm() < 1e-12) {
      n = next;
      break;
    }
    n = next;
  }
  return n;
}

Eigen::Vector2d CameraIntrinsics::PixelToIdeal(const Eigen::Vector2d& px) const {
  return Undistort(PixelToNormalized(px));
}

Eigen::Vector2d CameraIntrinsics::IdealToPixel(const Eigen::Vector2d& n) const {
  return NormalizedToPixel(Distort(n));
}

}  // namespace dfsfm

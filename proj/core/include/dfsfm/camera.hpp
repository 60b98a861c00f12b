#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace dfsfm {

/// Pinhole intrinsics with one radial distortion coefficient.
///
/// Distortion acts on normalized coordinates: for n = (x/z, y/z) the
/// distorted point is n * (1 + k1 * |n|^2), then pixels via focal/center.
/// k1 == 0 gives a pure pinhole model.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double k1 = 0.0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;

  /// Default intrinsics when calibration is unknown: focal = 1.2 * max edge,
  /// principal point at the image center.
  static CameraIntrinsics FromImageSize(std::uint32_t width, std::uint32_t height);

  Eigen::Matrix3d K() const;

  /// Normalized (distorted) coords -> pixel coords.
  Eigen::Vector2d NormalizedToPixel(const Eigen::Vector2d& n) const;
  /// Pixel coords -> normalized (distorted) coords.
  Eigen::Vector2d PixelToNormalized(const Eigen::Vector2d& px) const;

  /// Apply radial distortion to ideal normalized coords.
  Eigen::Vector2d Distort(const Eigen::Vector2d& n) const;
  /// Invert radial distortion (fixed-point iteration; exact for k1 == 0).
  Eigen::Vector2d Undistort(const Eigen::Vector2d& nd) const;

  /// Pixel -> ideal (undistorted) normalized coords.
  Eigen::Vector2d PixelToIdeal(const Eigen::Vector2d& px) const;
  /// Ideal normalized coords -> pixel, applying distortion.
  Eigen::Vector2d IdealToPixel(const Eigen::Vector2d& n) const;

  bool InBounds(const Eigen::Vector2d& px) const {
    return px.x() >= 0.0 && px.y() >= 0.0 && px.x() <= width - 1.0 && px.y() <= height - 1.0;
  }
};

}  // namespace dfsfm

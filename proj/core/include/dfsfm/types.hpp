#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace dfsfm {

using ImageId = std::uint32_t;
using TrackId = std::uint64_t;

inline constexpr ImageId kInvalidImageId = static_cast<ImageId>(-1);
inline constexpr TrackId kInvalidTrackId = static_cast<TrackId>(-1);

/// One 2D measurement of a scene point in a specific image.
struct Observation2D {
  ImageId image_id = kInvalidImageId;
  Eigen::Vector2d xy = Eigen::Vector2d::Zero();
  double confidence = 1.0;
};

/// Triangulated scene point owned by exactly one feature track.
struct Point3D {
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
  TrackId track_id = kInvalidTrackId;
  bool has_color = false;
  Eigen::Matrix<std::uint8_t, 3, 1> color = Eigen::Matrix<std::uint8_t, 3, 1>::Zero();
};

}  // namespace dfsfm

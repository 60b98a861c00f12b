#pragma once

#include <map>
#include <string>
#include <vector>

#include "dfsfm/camera.hpp"
#include "dfsfm/pose.hpp"
#include "dfsfm/track_build.hpp"
#include "dfsfm/types.hpp"

namespace dfsfm {

/// The single mutable reconstruction state: intrinsics, registered poses,
/// triangulated points, and the feature tracks that tie them to 2D
/// observations. Ordered maps keep every iteration order — and therefore
/// every downstream result — independent of insertion history and hashing.
struct SceneModel {
  std::map<ImageId, CameraIntrinsics> cameras;
  std::map<ImageId, std::string> image_names;
  std::map<ImageId, Pose> poses;  // registered subset
  std::map<TrackId, Point3D> points;
  std::map<TrackId, CoarseTrack> tracks;
  std::vector<ImageId> registration_order;

  /// Quantized observations that never joined a track (or were filtered out);
  /// the topology-adjustment completion step draws from this pool.
  std::vector<Observation2D> unassigned;

  TrackId next_track_id = 0;

  bool IsRegistered(ImageId id) const { return poses.count(id) > 0; }

  /// Adds a track (and optional triangulated point) under a fresh id.
  TrackId AddTrack(CoarseTrack track);

  /// Number of registered observations across all tracks.
  std::size_t NumObservations() const;
};

struct FilterReport {
  int removed_observations = 0;
  int removed_tracks = 0;
};

/// Drop observations whose reprojection error exceeds `max_error_px` or
/// that violate cheirality; delete tracks (and their points) that fall below
/// two registered observations. Removed observations return to the
/// unassigned pool. Only observations of registered views are judged.
FilterReport FilterOutliers(SceneModel& model, double max_error_px);

/// Replace every observation of a triangulated point with the point's
/// current projection; drop observations that land behind the camera or
/// outside the image, then apply the minimum-track-length rule.
FilterReport ReprojectKeypoints(SceneModel& model);

/// Mean reprojection error over all registered observations of triangulated
/// points. Returns 0 when there are none.
double MeanReprojectionError(const SceneModel& model);

/// Maximum reprojection error over the same set; 0 when empty.
double MaxReprojectionError(const SceneModel& model);

}  // namespace dfsfm

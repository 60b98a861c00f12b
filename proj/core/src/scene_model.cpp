#include "dfsfm/scene_model.hpp"

#include <algorithm>
#include <cmath>

#include "dfsfm/projection.hpp"

namespace dfsfm {

TrackId SceneModel::AddTrack(CoarseTrack track) {
  const TrackId id = next_track_id++;
  tracks.emplace(id, std::move(track));
  return id;
}

std::size_t SceneModel::NumObservations() const {
  std::size_t n = 0;
  for (const auto& [id, track] : tracks) n += track.observations.size();
  return n;
}

namespace {

// Shared sweep for FilterOutliers / ReprojectKeypoints: per-observation
// verdicts come from `judge`, which may also rewrite the observation.
template <typename Judge>
FilterReport SweepObservations(SceneModel& model, const Judge& judge) {
  FilterReport report;
  std::vector<TrackId> dead_tracks;
  for (auto& [track_id, track] : model.tracks) {
    const auto point_it = model.points.find(track_id);
    if (point_it == model.points.end()) continue;
    const Eigen::Vector3d& xyz = point_it->second.xyz;

    auto& obs_list = track.observations;
    std::size_t write = 0;
    for (std::size_t read = 0; read < obs_list.size(); ++read) {
      Observation2D obs = obs_list[read];
      bool keep = true;
      if (model.IsRegistered(obs.image_id)) {
        keep = judge(model.poses.at(obs.image_id), model.cameras.at(obs.image_id), xyz, obs);
      }
      if (keep) {
        obs_list[write++] = obs;
      } else {
        model.unassigned.push_back(obs_list[read]);
        ++report.removed_observations;
      }
    }
    obs_list.resize(write);

    std::size_t registered = 0;
    for (const auto& obs : obs_list) {
      if (model.IsRegistered(obs.image_id)) ++registered;
    }
    if (registered < 2 || obs_list.size() < 2) dead_tracks.push_back(track_id);
  }

  for (const TrackId id : dead_tracks) {
    // Surviving observations of a deleted track also return to the pool.
    for (const auto& obs : model.tracks.at(id).observations) model.unassigned.push_back(obs);
    model.tracks.erase(id);
    model.points.erase(id);
    ++report.removed_tracks;
  }
  return report;
}

}  // namespace

FilterReport FilterOutliers(SceneModel& model, double max_error_px) {
  return SweepObservations(
      model, [max_error_px](const Pose& pose, const CameraIntrinsics& intr,
                            const Eigen::Vector3d& xyz, Observation2D& obs) {
        const auto proj = ProjectPoint(pose, intr, xyz);
        if (!proj) return false;  // cheirality violation
        return (*proj - obs.xy).norm() <= max_error_px;
      });
}

FilterReport ReprojectKeypoints(SceneModel& model) {
  return SweepObservations(model, [](const Pose& pose, const CameraIntrinsics& intr,
                                     const Eigen::Vector3d& xyz, Observation2D& obs) {
    const auto proj = ProjectPoint(pose, intr, xyz);
    if (!proj || !intr.InBounds(*proj)) return false;
    obs.xy = *proj;
    return true;
  });
}

namespace {

template <typename Reduce>
void ForEachRegisteredResidual(const SceneModel& model, const Reduce& fn) {
  for (const auto& [track_id, track] : model.tracks) {
    const auto point_it = model.points.find(track_id);
    if (point_it == model.points.end()) continue;
    for (const auto& obs : track.observations) {
      if (!model.IsRegistered(obs.image_id)) continue;
      fn(model.poses.at(obs.image_id), model.cameras.at(obs.image_id), point_it->second.xyz,
         obs.xy);
    }
  }
}

}  // namespace

double MeanReprojectionError(const SceneModel& model) {
  double sum = 0.0;
  std::size_t count = 0;
  ForEachRegisteredResidual(model, [&](const Pose& pose, const CameraIntrinsics& intr,
                                       const Eigen::Vector3d& xyz, const Eigen::Vector2d& xy) {
    const double e = ReprojectionError(pose, intr, xyz, xy);
    if (std::isfinite(e)) {
      sum += e;
      ++count;
    }
  });
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

double MaxReprojectionError(const SceneModel& model) {
  double max_e = 0.0;
  ForEachRegisteredResidual(model, [&](const Pose& pose, const CameraIntrinsics& intr,
                                       const Eigen::Vector3d& xyz, const Eigen::Vector2d& xy) {
    const double e = ReprojectionError(pose, intr, xyz, xy);
    if (std::isfinite(e)) max_e = std::max(max_e, e);
  });
  return max_e;
}

}  // namespace dfsfm

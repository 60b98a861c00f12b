#include "dfsfm/topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <tuple>

#include "dfsfm/projection.hpp"
#include "dfsfm/triangulation.hpp"

namespace dfsfm {

namespace {

// Median camera-to-point depth over a sample, used to size the 3D voxel grid
// for merge-candidate pruning.
double TypicalPixelFootprint(const SceneModel& model, double threshold_px) {
  std::vector<double> footprints;
  for (const auto& [track_id, track] : model.tracks) {
    const auto pt = model.points.find(track_id);
    if (pt == model.points.end()) continue;
    for (const auto& obs : track.observations) {
      if (!model.IsRegistered(obs.image_id)) continue;
      const double depth = PointDepth(model.poses.at(obs.image_id), pt->second.xyz);
      if (depth <= kMinDepth) continue;
      const auto& cam = model.cameras.at(obs.image_id);
      footprints.push_back(depth / (0.5 * (cam.fx + cam.fy)) * threshold_px);
      break;  // one view per point suffices for a scale estimate
    }
  }
  if (footprints.empty()) return 0.0;
  std::nth_element(footprints.begin(), footprints.begin() + footprints.size() / 2,
                   footprints.end());
  return footprints[footprints.size() / 2];
}

// True when `point` reprojects within threshold of every registered
// observation in `track`.
bool PointFitsTrack(const SceneModel& model, const Eigen::Vector3d& point,
                    const CoarseTrack& track, double threshold_px) {
  bool any = false;
  for (const auto& obs : track.observations) {
    if (!model.IsRegistered(obs.image_id)) continue;
    const double e = ReprojectionError(model.poses.at(obs.image_id),
                                       model.cameras.at(obs.image_id), point, obs.xy);
    if (!(e <= threshold_px)) return false;
    any = true;
  }
  return any;
}

TriangulationResult RetriangulateTrack(const SceneModel& model, const CoarseTrack& track,
                                       double min_tri_angle_deg) {
  std::vector<ViewObservation> views;
  for (const auto& obs : track.observations) {
    if (!model.IsRegistered(obs.image_id)) continue;
    views.push_back({obs.xy, model.poses.at(obs.image_id), model.cameras.at(obs.image_id)});
  }
  TriangulationOptions topt;
  topt.min_tri_angle_deg = min_tri_angle_deg;
  return TriangulateMultiview(views, topt);
}

// Re-solve every track's point from its current observations; tracks whose
// multiview solve fails keep their previous point (or stay point-less).
int RetriangulateAll(SceneModel& model, double min_tri_angle_deg) {
  int updated = 0;
  for (auto& [track_id, track] : model.tracks) {
    const TriangulationResult tri = RetriangulateTrack(model, track, min_tri_angle_deg);
    if (!tri.ok()) continue;
    const auto it = model.points.find(track_id);
    if (it == model.points.end()) {
      Point3D point;
      point.xyz = tri.point;
      point.track_id = track_id;
      model.points.emplace(track_id, point);
    } else {
      it->second.xyz = tri.point;
    }
    ++updated;
  }
  return updated;
}

int CompleteTracks(SceneModel& model, const TopologyOptions& options) {
  // Project every point into every registered view once and bucket the
  // projections on a grid of threshold-sized cells, so each unassigned
  // observation only inspects its 3x3 neighborhood.
  struct ProjEntry {
    TrackId track;
    Eigen::Vector2d xy;
  };
  const double cell = std::max(options.completion_threshold_px, 1.0);
  const auto cell_key = [cell](const Eigen::Vector2d& xy) {
    return std::make_pair(static_cast<std::int64_t>(std::floor(xy.x() / cell)),
                          static_cast<std::int64_t>(std::floor(xy.y() / cell)));
  };
  std::map<ImageId, std::map<std::pair<std::int64_t, std::int64_t>, std::vector<ProjEntry>>> index;
  for (const auto& [image_id, pose] : model.poses) {
    auto& buckets = index[image_id];
    const CameraIntrinsics& cam = model.cameras.at(image_id);
    for (const auto& [track_id, point] : model.points) {
      const auto proj = ProjectPoint(pose, cam, point.xyz);
      if (!proj) continue;
      buckets[cell_key(*proj)].push_back({track_id, *proj});
    }
  }

  int completed = 0;
  std::vector<Observation2D> still_unassigned;
  still_unassigned.reserve(model.unassigned.size());

  for (const Observation2D& obs : model.unassigned) {
    const auto image_it = index.find(obs.image_id);
    if (image_it == index.end()) {
      still_unassigned.push_back(obs);
      continue;
    }

    double best_error = options.completion_threshold_px;
    TrackId best_track = kInvalidTrackId;
    const auto [cx, cy] = cell_key(obs.xy);
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const auto bucket_it = image_it->second.find({cx + dx, cy + dy});
        if (bucket_it == image_it->second.end()) continue;
        for (const ProjEntry& entry : bucket_it->second) {
          const double e = (entry.xy - obs.xy).norm();
          if (e < best_error ||
              (best_track != kInvalidTrackId && e == best_error && entry.track < best_track)) {
            // Duplicate-image guard against the track's live state.
            if (model.tracks.at(entry.track).HasImage(obs.image_id)) continue;
            best_error = e;
            best_track = entry.track;
          }
        }
      }
    }

    if (best_track == kInvalidTrackId) {
      still_unassigned.push_back(obs);
      continue;
    }
    auto& obs_list = model.tracks.at(best_track).observations;
    obs_list.push_back(obs);
    std::sort(obs_list.begin(), obs_list.end(),
              [](const Observation2D& a, const Observation2D& b) { return a.image_id < b.image_id; });
    ++completed;
  }
  model.unassigned = std::move(still_unassigned);
  return completed;
}

int MergeTracks(SceneModel& model, const TopologyOptions& options) {
  // Voxel hash over point positions; only points within the same or adjacent
  // voxels can possibly pass a few-pixel mutual reprojection test.
  const double voxel = std::max(TypicalPixelFootprint(model, options.merge_threshold_px) * 4.0,
                                1e-9);
  std::map<std::tuple<std::int64_t, std::int64_t, std::int64_t>, std::vector<TrackId>> cells;
  for (const auto& [track_id, point] : model.points) {
    const auto key = std::make_tuple(static_cast<std::int64_t>(std::floor(point.xyz.x() / voxel)),
                                     static_cast<std::int64_t>(std::floor(point.xyz.y() / voxel)),
                                     static_cast<std::int64_t>(std::floor(point.xyz.z() / voxel)));
    cells[key].push_back(track_id);
  }

  // Candidate pairs, deduplicated and ordered for determinism.
  std::vector<std::pair<TrackId, TrackId>> candidates;
  for (const auto& [key, ids] : cells) {
    const auto [kx, ky, kz] = key;
    for (std::int64_t dx = 0; dx <= 1; ++dx) {
      for (std::int64_t dy = (dx == 0 ? 0 : -1); dy <= 1; ++dy) {
        for (std::int64_t dz = ((dx == 0 && dy == 0) ? 0 : -1); dz <= 1; ++dz) {
          const auto nkey = std::make_tuple(kx + dx, ky + dy, kz + dz);
          const auto it = cells.find(nkey);
          if (it == cells.end()) continue;
          const bool same_cell = dx == 0 && dy == 0 && dz == 0;
          for (std::size_t i = 0; i < ids.size(); ++i) {
            const auto& others = it->second;
            for (std::size_t j = same_cell ? i + 1 : 0; j < others.size(); ++j) {
              TrackId a = ids[i], b = others[j];
              if (a == b) continue;
              if (a > b) std::swap(a, b);
              candidates.emplace_back(a, b);
            }
          }
        }
      }
    }
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  int merges = 0;
  std::map<TrackId, char> consumed;
  for (const auto& [id_a, id_b] : candidates) {
    if (consumed.count(id_a) || consumed.count(id_b)) continue;
    const auto pa = model.points.find(id_a);
    const auto pb = model.points.find(id_b);
    if (pa == model.points.end() || pb == model.points.end()) continue;
    const CoarseTrack& ta = model.tracks.at(id_a);
    const CoarseTrack& tb = model.tracks.at(id_b);

    // Duplicate-image guard on the union.
    bool duplicate = false;
    for (const auto& obs : tb.observations) {
      if (ta.HasImage(obs.image_id)) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;

    // Mutual reprojection: each point must fit the other track everywhere.
    if (!PointFitsTrack(model, pa->second.xyz, tb, options.merge_threshold_px)) continue;
    if (!PointFitsTrack(model, pb->second.xyz, ta, options.merge_threshold_px)) continue;

    CoarseTrack merged = ta;
    merged.observations.insert(merged.observations.end(), tb.observations.begin(),
                               tb.observations.end());
    std::sort(merged.observations.begin(), merged.observations.end(),
              [](const Observation2D& x, const Observation2D& y) { return x.image_id < y.image_id; });

    const TriangulationResult tri = RetriangulateTrack(model, merged, options.min_tri_angle_deg);
    if (!tri.ok()) continue;

    // Lower id survives; the other track and point disappear.
    model.tracks.at(id_a) = std::move(merged);
    model.points.at(id_a).xyz = tri.point;
    model.tracks.erase(id_b);
    model.points.erase(id_b);
    consumed[id_a] = 1;
    consumed[id_b] = 1;
    ++merges;
  }
  return merges;
}

}  // namespace

TopologyReport AdjustTopology(SceneModel& model, const TopologyOptions& options) {
  TopologyReport report;
  report.completed_observations = CompleteTracks(model, options);
  report.merged_tracks = MergeTracks(model, options);
  return report;
}

RefineReport RefineGeometry(SceneModel& model, const RefineConfig& config) {
  if (model.tracks.empty() || model.points.empty()) {
    throw std::invalid_argument("refine_geometry: model has no triangulated tracks");
  }

  RefineReport report;
  TopologyOptions topology = config.topology;
  topology.completion_threshold_px = std::min(topology.completion_threshold_px, config.epsilon_px);
  topology.merge_threshold_px = std::min(topology.merge_threshold_px, config.epsilon_px);

  for (int round = 0; round < config.ba_ta_rounds; ++round) {
    RefineRound log;
    log.retriangulated_points = RetriangulateAll(model, topology.min_tri_angle_deg);
    const BAReport ba = BundleAdjust(model, config.ba);
    log.ba_initial_cost = ba.initial_cost;
    log.ba_final_cost = ba.final_cost;
    log.ba_iterations = ba.iterations;
    report.ba_reports.push_back(ba);

    const TopologyReport topo = AdjustTopology(model, topology);
    log.completed_observations = topo.completed_observations;
    log.merged_tracks = topo.merged_tracks;

    const FilterReport filtered = FilterOutliers(model, config.epsilon_px);
    log.filtered_observations = filtered.removed_observations;
    log.filtered_tracks = filtered.removed_tracks;

    report.rounds.push_back(log);
  }

  report.mean_reproj_error_px = MeanReprojectionError(model);
  ReprojectKeypoints(model);
  return report;
}

}  // namespace dfsfm

#include "dfsfm/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "dfsfm/bundle_adjust.hpp"
#include "dfsfm/pnp.hpp"
#include "dfsfm/projection.hpp"
#include "dfsfm/triangulation.hpp"
#include "dfsfm/verify.hpp"

namespace dfsfm {

InitPairResult SelectInitPair(const std::vector<QuantizedMatchPair>& pairs,
                              const std::map<ImageId, CameraIntrinsics>& cameras,
                              const MapperConfig& config) {
  InitPairResult result;
  if (pairs.empty()) {
    result.status = InitPairStatus::kEmptyInput;
    return result;
  }

  // Sorted copy so that the strict > below implements the documented
  // lexicographic tie-break regardless of input order.
  std::vector<const QuantizedMatchPair*> ordered;
  ordered.reserve(pairs.size());
  for (const auto& pair : pairs) ordered.push_back(&pair);
  std::sort(ordered.begin(), ordered.end(),
            [](const QuantizedMatchPair* x, const QuantizedMatchPair* y) {
              return std::make_pair(x->image_a, x->image_b) <
                     std::make_pair(y->image_a, y->image_b);
            });

  int best_inliers = -1;
  result.status = InitPairStatus::kNoValidPair;
  for (const QuantizedMatchPair* pair : ordered) {
    if (static_cast<int>(pair->matches.size()) <= best_inliers) continue;
    std::vector<Eigen::Vector2d> xa, xb;
    xa.reserve(pair->matches.size());
    xb.reserve(pair->matches.size());
    for (const Match& m : pair->matches) {
      xa.push_back(m.a);
      xb.push_back(m.b);
    }
    RelativePoseOptions options;
    options.ransac.threshold_px = config.reproj_threshold_px;
    options.ransac.seed = PairSeed(config.seed, pair->image_a, pair->image_b);
    options.min_tri_angle_deg = config.min_tri_angle_deg;
    options.min_inliers = std::max(8, config.min_registration_inliers);
    const RelativePoseResult rel =
        SolveRelativePoseRansac(xa, xb, cameras.at(pair->image_a), cameras.at(pair->image_b),
                                options);
    if (!rel.ok()) continue;
    if (rel.num_inliers > best_inliers) {
      best_inliers = rel.num_inliers;
      result.image_a = pair->image_a;
      result.image_b = pair->image_b;
      result.relative = rel;
      result.status = InitPairStatus::kOk;
    }
  }
  return result;
}

RegisterStatus RegisterImage(SceneModel& model, ImageId image_id, const MapperConfig& config) {
  std::vector<Eigen::Vector2d> pixels;
  std::vector<Eigen::Vector3d> points;
  for (const auto& [track_id, track] : model.tracks) {
    const auto pt = model.points.find(track_id);
    if (pt == model.points.end()) continue;
    for (const auto& obs : track.observations) {
      if (obs.image_id != image_id) continue;
      pixels.push_back(obs.xy);
      points.push_back(pt->second.xyz);
      break;
    }
  }
  if (pixels.empty()) return RegisterStatus::kNoCandidates;

  PnPOptions options;
  options.ransac.threshold_px = config.reproj_threshold_px;
  options.ransac.seed = PairSeed(config.seed, image_id, image_id);
  options.min_inliers = config.min_registration_inliers;
  const PnPResult pnp = SolvePnPRansac(pixels, points, model.cameras.at(image_id), options);
  if (!pnp.ok()) return RegisterStatus::kDeferred;

  model.poses[image_id] = pnp.pose;
  model.registration_order.push_back(image_id);
  return RegisterStatus::kRegistered;
}

int TriangulateTracks(SceneModel& model, const MapperConfig& config) {
  int added = 0;
  TriangulationOptions options;
  options.min_tri_angle_deg = config.min_tri_angle_deg;
  for (auto& [track_id, track] : model.tracks) {
    if (model.points.count(track_id)) continue;
    std::vector<ViewObservation> views;
    for (const auto& obs : track.observations) {
      if (!model.IsRegistered(obs.image_id)) continue;
      views.push_back({obs.xy, model.poses.at(obs.image_id), model.cameras.at(obs.image_id)});
    }
    if (views.size() < 2) continue;
    const TriangulationResult tri = TriangulateMultiview(views, options);
    if (!tri.ok() || tri.max_reprojection_error_px > config.reproj_threshold_px) continue;
    Point3D point;
    point.xyz = tri.point;
    point.track_id = track_id;
    model.points.emplace(track_id, point);
    ++added;
  }
  return added;
}

namespace {

// Images in the local BA window: the new image plus every registered image
// sharing at least `min_shared` triangulated points with it.
std::set<ImageId> LocalBundleImages(const SceneModel& model, ImageId new_image, int min_shared) {
  std::map<ImageId, int> shared;
  for (const auto& [track_id, track] : model.tracks) {
    if (!model.points.count(track_id)) continue;
    bool sees_new = false;
    for (const auto& obs : track.observations) {
      if (obs.image_id == new_image) {
        sees_new = true;
        break;
      }
    }
    if (!sees_new) continue;
    for (const auto& obs : track.observations) {
      if (obs.image_id != new_image && model.IsRegistered(obs.image_id)) {
        ++shared[obs.image_id];
      }
    }
  }
  std::set<ImageId> window{new_image};
  for (const auto& [id, count] : shared) {
    if (count >= min_shared) window.insert(id);
  }
  return window;
}

BAOptions MakeBAOptions(const MapperConfig& config) {
  BAOptions ba;
  ba.loss_scale_px = config.ba_loss_scale_px;
  ba.refine_intrinsics = !config.intrinsics_known;
  return ba;
}

// Candidate images ranked by the number of triangulated points they observe.
std::vector<std::pair<int, ImageId>> RankCandidates(const SceneModel& model) {
  std::map<ImageId, int> visible;
  for (const auto& [track_id, track] : model.tracks) {
    if (!model.points.count(track_id)) continue;
    for (const auto& obs : track.observations) {
      if (!model.IsRegistered(obs.image_id) && model.cameras.count(obs.image_id)) {
        ++visible[obs.image_id];
      }
    }
  }
  std::vector<std::pair<int, ImageId>> ranked;
  ranked.reserve(visible.size());
  for (const auto& [id, count] : visible) ranked.emplace_back(count, id);
  // Most visible points first; image id breaks ties deterministically.
  std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    return x.first != y.first ? x.first > y.first : x.second < y.second;
  });
  return ranked;
}

}  // namespace

SceneModel RunIncremental(MapperInput input, const MapperConfig& config) {
  if (input.tracks.empty() || input.verified_pairs.empty()) {
    throw std::runtime_error("incremental mapping: empty match input");
  }

  SceneModel model;
  model.cameras = std::move(input.cameras);
  model.image_names = std::move(input.image_names);
  model.unassigned = std::move(input.unassigned);
  for (CoarseTrack& track : input.tracks) model.AddTrack(std::move(track));

  // ---- Bootstrap from the initialization pair --------------------------------
  const InitPairResult init = SelectInitPair(input.verified_pairs, model.cameras, config);
  if (!init.ok()) {
    throw std::runtime_error("incremental mapping: no valid initialization pair");
  }
  model.poses[init.image_a] = Pose::Identity();
  model.poses[init.image_b] = init.relative.pose_b_from_a;  // unit baseline sets scale
  model.registration_order = {init.image_a, init.image_b};

  TriangulateTracks(model, config);
  FilterOutliers(model, config.reproj_threshold_px);
  {
    BAOptions ba = MakeBAOptions(config);
    BundleAdjust(model, ba);
    FilterOutliers(model, config.reproj_threshold_px);
  }

  // ---- Incremental loop -------------------------------------------------------
  std::size_t last_global_ba_size = model.poses.size();
  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& [visible, image_id] : RankCandidates(model)) {
      if (visible < 4) break;  // below the PnP minimum; so is everything after
      if (RegisterImage(model, image_id, config) != RegisterStatus::kRegistered) continue;

      TriangulateTracks(model, config);

      BAOptions local = MakeBAOptions(config);
      local.variable_images = LocalBundleImages(model, image_id, config.local_ba_min_shared_points);
      local.max_iterations = 25;
      BundleAdjust(model, local);
      FilterOutliers(model, config.reproj_threshold_px);

      const double growth = config.global_ba_interval * static_cast<double>(model.poses.size());
      if (static_cast<double>(model.poses.size() - last_global_ba_size) >= std::max(1.0, growth)) {
        TriangulateTracks(model, config);
        BAOptions global = MakeBAOptions(config);
        BundleAdjust(model, global);
        FilterOutliers(model, config.reproj_threshold_px);
        last_global_ba_size = model.poses.size();
      }

      progress = true;
      break;  // re-rank candidates against the grown model
    }
  }

  // ---- Final polish -------------------------------------------------------------
  TriangulateTracks(model, config);
  BAOptions global = MakeBAOptions(config);
  BundleAdjust(model, global);
  FilterOutliers(model, config.reproj_threshold_px);
  return model;
}

}  // namespace dfsfm

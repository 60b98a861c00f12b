#include "dfsfm/track_refiner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "dfsfm/parallel.hpp"
#include "dfsfm/projection.hpp"

namespace dfsfm {
namespace {

// A later candidate replaces the incumbent only when it improves the total
// uncertainty by more than this. Combined with the center-out candidate
// ordering this keeps the selection stable when several reference locations
// are effectively tied (e.g. repeated texture), so an already-good track is
// a fixed point of refinement.
constexpr double kCandidateImprovementPx2 = 1e-6;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Grid offsets around the coarse reference location, nearest first. Ties at
// equal radius break on (dy, dx) so the order is fully determined.
std::vector<Eigen::Vector2i> CenterOutOffsets(int w) {
  const int h = (w - 1) / 2;
  std::vector<Eigen::Vector2i> offsets;
  offsets.reserve(static_cast<std::size_t>(w) * w);
  for (int dy = -h; dy <= h; ++dy) {
    for (int dx = -h; dx <= h; ++dx) offsets.emplace_back(dx, dy);
  }
  std::sort(offsets.begin(), offsets.end(),
            [](const Eigen::Vector2i& a, const Eigen::Vector2i& b) {
              const int ra = a.squaredNorm();
              const int rb = b.squaredNorm();
              if (ra != rb) return ra < rb;
              if (a.y() != b.y()) return a.y() < b.y();
              return a.x() < b.x();
            });
  return offsets;
}

}  // namespace

ImageId SelectReferenceView(const CoarseTrack& track, const SceneModel& model,
                            const Eigen::Vector3d& point) {
  std::vector<std::pair<double, ImageId>> scales;
  scales.reserve(track.observations.size());
  for (const Observation2D& obs : track.observations) {
    if (!model.IsRegistered(obs.image_id)) continue;
    const double depth = PointDepth(model.poses.at(obs.image_id), point);
    if (depth < kMinDepth) continue;
    const CameraIntrinsics& cam = model.cameras.at(obs.image_id);
    const double focal = 0.5 * (cam.fx + cam.fy);
    scales.emplace_back(depth / focal, obs.image_id);
  }
  if (scales.size() < 2) return kInvalidImageId;
  std::sort(scales.begin(), scales.end());
  return scales[(scales.size() - 1) / 2].second;
}

RefineTrackResult RefineTrack(const CoarseTrack& track, const Eigen::Vector3d& point,
                              const SceneModel& model,
                              const std::map<ImageId, ImageBundle>& images,
                              const RefinerConfig& config) {
  RefineTrackResult result;
  result.track = track;
  result.variance_px2.assign(track.observations.size(), kInf);

  const ImageId ref_image = SelectReferenceView(track, model, point);
  if (ref_image == kInvalidImageId) return result;
  const auto ref_bundle = images.find(ref_image);
  if (ref_bundle == images.end()) return result;

  std::size_t ref_index = track.observations.size();
  std::vector<std::size_t> query_indices;
  for (std::size_t i = 0; i < track.observations.size(); ++i) {
    if (track.observations[i].image_id == ref_image && ref_index == track.observations.size()) {
      ref_index = i;
    } else {
      query_indices.push_back(i);
    }
  }
  const Eigen::Vector2d ref_xy = track.observations[ref_index].xy;

  const int p = config.patch_size_p;
  const int center_cell = (p - 1) / 2;

  // Reference feature vectors: one patch extraction per grid offset, taking
  // the center cell of each. Offsets whose window exits the image or lands on
  // flat texture simply drop out of the candidate set.
  struct RefVector {
    Eigen::Vector2i offset;
    CellFeature vec;
  };
  std::vector<RefVector> ref_vectors;
  for (const Eigen::Vector2i& offset : CenterOutOffsets(config.ref_grid_w)) {
    PatchFeature patch;
    if (ExtractPatchFeature(ref_bundle->second, ref_xy + offset.cast<double>(), p, &patch) !=
        PatchStatus::kOk) {
      continue;
    }
    ref_vectors.push_back({offset, patch.CellVector(center_cell, center_cell)});
  }
  if (ref_vectors.empty()) return result;

  // Query patches at the coarse locations; failures keep their coarse spot.
  std::map<std::size_t, PatchFeature> query_patches;
  for (std::size_t i : query_indices) {
    const auto bundle = images.find(track.observations[i].image_id);
    if (bundle == images.end()) continue;
    PatchFeature patch;
    if (ExtractPatchFeature(bundle->second, track.observations[i].xy, p, &patch) ==
        PatchStatus::kOk) {
      query_patches.emplace(i, std::move(patch));
    }
  }
  if (query_patches.empty()) return result;

  // Long tracks: segments of max_views - 1 query views share the reference.
  const std::size_t segment_size = static_cast<std::size_t>(std::max(1, config.max_views - 1));
  bool reference_decided = false;
  for (std::size_t start = 0; start < query_indices.size(); start += segment_size) {
    const std::size_t stop = std::min(start + segment_size, query_indices.size());
    std::vector<std::pair<std::size_t, const PatchFeature*>> segment;
    for (std::size_t k = start; k < stop; ++k) {
      const auto it = query_patches.find(query_indices[k]);
      if (it != query_patches.end()) segment.emplace_back(it->first, &it->second);
    }
    if (segment.empty()) continue;

    CandidateTrack best;
    best.total_uncertainty_px2 = kInf;
    std::vector<PatchHeatmap> best_heatmaps;
    for (const RefVector& ref : ref_vectors) {
      CandidateTrack candidate;
      candidate.reference_px = ref_xy + ref.offset.cast<double>();
      candidate.query_px.reserve(segment.size());
      candidate.query_variance_px2.reserve(segment.size());
      std::vector<PatchHeatmap> heatmaps;
      heatmaps.reserve(segment.size());
      for (const auto& [obs_index, patch] : segment) {
        heatmaps.push_back(CorrelateHeatmap(ref.vec, *patch, config.tau));
        const PatchHeatmap& hm = heatmaps.back();
        candidate.query_px.push_back(hm.expectation_px);
        candidate.query_variance_px2.push_back(hm.variance_px2);
        candidate.total_uncertainty_px2 += hm.variance_px2;
      }
      if (candidate.total_uncertainty_px2 <
          best.total_uncertainty_px2 - kCandidateImprovementPx2) {
        best = std::move(candidate);
        best_heatmaps = std::move(heatmaps);
      }
    }

    for (std::size_t k = 0; k < segment.size(); ++k) {
      result.track.observations[segment[k].first].xy = best.query_px[k];
      result.variance_px2[segment[k].first] = best.query_variance_px2[k];
    }
    if (!reference_decided) {
      result.track.observations[ref_index].xy = best.reference_px;
      result.variance_px2[ref_index] = 0.0;
      reference_decided = true;
    }
  }

  result.refined = reference_decided;
  return result;
}

RefineTracksReport RefineAllTracks(SceneModel* model,
                                   const std::map<ImageId, ImageBundle>& images,
                                   const RefinerConfig& config) {
  RefineTracksReport report;

  std::vector<TrackId> ids;
  ids.reserve(model->tracks.size());
  for (const auto& [track_id, track] : model->tracks) {
    if (model->points.count(track_id) > 0) {
      ids.push_back(track_id);
    } else {
      ++report.tracks_skipped;
    }
  }

  std::vector<RefineTrackResult> results(ids.size());
  ParallelFor(std::size_t{0}, ids.size(), [&](std::size_t i) {
    results[i] = RefineTrack(model->tracks.at(ids[i]), model->points.at(ids[i]).xyz, *model,
                             images, config);
  });

  double move_sum = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!results[i].refined) {
      ++report.tracks_skipped;
      continue;
    }
    ++report.tracks_refined;
    CoarseTrack& track = model->tracks.at(ids[i]);
    for (std::size_t j = 0; j < track.observations.size(); ++j) {
      const double moved = (results[i].track.observations[j].xy - track.observations[j].xy).norm();
      if (moved > 0.0) {
        ++report.observations_moved;
        move_sum += moved;
      }
    }
    track.observations = std::move(results[i].track.observations);
  }
  if (report.observations_moved > 0) {
    report.mean_move_px = move_sum / static_cast<double>(report.observations_moved);
  }
  return report;
}

}  // namespace dfsfm

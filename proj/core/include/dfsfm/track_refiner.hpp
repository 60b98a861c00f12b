#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include <Eigen/Core>

#include "dfsfm/feature_patch.hpp"
#include "dfsfm/scene_model.hpp"
#include "dfsfm/track_build.hpp"
#include "dfsfm/types.hpp"

namespace dfsfm {

// Multi-view track refinement: each coarse track keeps one reference view and
// re-localizes every other (query) view by correlating a reference feature
// vector against the query patch. A small grid of alternative reference
// locations is tried and the one whose heatmaps are collectively most
// peaked (minimum total variance) wins.
struct RefinerConfig {
  int patch_size_p = 15;  // odd; side length of extracted patches
  int ref_grid_w = 7;     // odd; side length of the reference search grid (1 px spacing)
  int max_views = 16;     // tracks with more views are split into segments
  double tau = 0.1;       // softmax temperature on normalized correlation scores
};

// One hypothesis: the reference keypoint sits at `reference_px`, and each
// accepted query view relocates to its heatmap expectation. Uncertainty is
// the sum of heatmap variances across the accepted query views.
struct CandidateTrack {
  Eigen::Vector2d reference_px = Eigen::Vector2d::Zero();
  std::vector<Eigen::Vector2d> query_px;
  std::vector<double> query_variance_px2;
  double total_uncertainty_px2 = 0.0;
};

struct RefineTrackResult {
  CoarseTrack track;                    // refined (or untouched) observations
  std::vector<double> variance_px2;     // per observation; 0 for the reference,
                                        // +inf for views that kept their coarse location
  bool refined = false;
};

struct RefineTracksReport {
  std::size_t tracks_refined = 0;
  std::size_t tracks_skipped = 0;
  std::size_t observations_moved = 0;
  double mean_move_px = 0.0;  // over moved observations
};

// Picks the reference view: the observation whose scale (depth / focal) is the
// median across the track, taking the lower of the two middle values for
// even-length tracks. Views that are unregistered or see the point behind the
// camera are excluded; returns kInvalidImageId when fewer than two usable
// views remain.
ImageId SelectReferenceView(const CoarseTrack& track, const SceneModel& model,
                            const Eigen::Vector3d& point);

// Refines one track against the per-image intensity/gradient bundles. Query
// views whose patch extraction fails (border, low texture, missing image)
// keep their coarse locations. Tracks longer than max_views are split into
// segments of max_views - 1 query views sharing the reference; the first
// segment with usable queries decides where the reference moves. Returns the
// track unchanged with refined=false when no reference can be selected or no
// query view survives extraction.
RefineTrackResult RefineTrack(const CoarseTrack& track, const Eigen::Vector3d& point,
                              const SceneModel& model,
                              const std::map<ImageId, ImageBundle>& images,
                              const RefinerConfig& config);

// Runs RefineTrack over every triangulated track in the model and writes the
// refined observations back. Tracks are processed independently, so the
// result does not depend on processing order or thread count.
RefineTracksReport RefineAllTracks(SceneModel* model,
                                   const std::map<ImageId, ImageBundle>& images,
                                   const RefinerConfig& config);

}  // namespace dfsfm

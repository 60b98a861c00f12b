#pragma once

#include <vector>

#include "dfsfm/bundle_adjust.hpp"
#include "dfsfm/scene_model.hpp"

namespace dfsfm {

struct TopologyOptions {
  double completion_threshold_px = 3.0;
  double merge_threshold_px = 3.0;
  double min_tri_angle_deg = 1.5;
};

struct TopologyReport {
  int completed_observations = 0;
  int merged_tracks = 0;
};

/// Track topology adjustment: (a) completion — unassigned quantized
/// observations whose reprojection error against some triangulated point is
/// below the threshold join that point's track (closest point wins, duplicate
/// image ids never created); (b) merge — two tracks whose points mutually
/// reproject into all of each other's observations within the threshold are
/// merged and re-triangulated, provided the union has no duplicate image.
TopologyReport AdjustTopology(SceneModel& model, const TopologyOptions& options = {});

struct RefineConfig {
  double epsilon_px = 3.0;  // outlier reprojection threshold
  int ba_ta_rounds = 5;
  TopologyOptions topology;
  BAOptions ba;
};

struct RefineRound {
  int retriangulated_points = 0;
  double ba_initial_cost = 0.0;
  double ba_final_cost = 0.0;
  int ba_iterations = 0;
  int completed_observations = 0;
  int merged_tracks = 0;
  int filtered_observations = 0;
  int filtered_tracks = 0;
};

struct RefineReport {
  std::vector<RefineRound> rounds;
  /// Per-BA-call reports in order, for gauge/monotonicity checks.
  std::vector<BAReport> ba_reports;
  /// Mean reprojection error after the final round's filtering, before
  /// reproject_keypoints rewrites observations onto the projections.
  double mean_reproj_error_px = 0.0;
};

/// Geometric refinement of one pipeline iteration: [retriangulate ->
/// bundle_adjust -> adjust_topology -> filter_outliers] repeated
/// ba_ta_rounds times, then reproject_keypoints. The retriangulation step
/// refits every track's point to its current observations, so that keypoints
/// moved by track refinement re-enter bundle adjustment as consistent
/// structure instead of being rejected as outliers. Throws
/// std::invalid_argument on an empty model.
RefineReport RefineGeometry(SceneModel& model, const RefineConfig& config = {});

}  // namespace dfsfm

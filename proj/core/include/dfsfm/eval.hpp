#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "dfsfm/pose.hpp"
#include "dfsfm/types.hpp"

namespace dfsfm {

// Per-pair relative pose errors over all C(N,2) ground-truth image pairs, in
// degrees. The pair error is max(rotation angle error, translation direction
// angle error); the relative-transform formulation makes it invariant to a
// similarity transform of either pose set. Pairs with at least one image
// missing from `estimated` score the maximum error of 180 degrees.
std::vector<double> PairwisePoseErrorsDeg(const std::map<ImageId, Pose>& estimated,
                                          const std::map<ImageId, Pose>& gt);

struct PoseAucResult {
  std::vector<double> auc;  // one value in [0,1] per threshold
  std::size_t num_pairs = 0;
  std::size_t common_images = 0;  // registered in both sets
};

// AUC of the cumulative pose-error curve at each angular threshold, computed
// by exact piecewise integration: AUC(T) = (1 / (n*T)) * sum_i max(0, T - e_i).
// Throws std::invalid_argument when fewer than two images are registered in
// both sets.
PoseAucResult EvalPoseAuc(const std::map<ImageId, Pose>& estimated,
                          const std::map<ImageId, Pose>& gt,
                          const std::vector<double>& thresholds_deg);

struct TriangulationEval {
  std::vector<double> accuracy;      // fraction of reconstructed points near GT
  std::vector<double> completeness;  // fraction of GT points near reconstruction
};

// Nearest-neighbor accuracy/completeness at each distance threshold. Either
// cloud empty -> all zeros (policy). Brute-force distances; intended for
// desk-scale clouds.
TriangulationEval EvalTriangulation(const std::vector<Eigen::Vector3d>& points,
                                    const std::vector<Eigen::Vector3d>& gt_points,
                                    const std::vector<double>& thresholds);

// Similarity transform x -> scale * R * x + t.
struct Similarity {
  double scale = 1.0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d Apply(const Eigen::Vector3d& x) const { return scale * (R * x) + t; }
};

// Least-squares similarity aligning estimated camera centers onto GT centers
// over the common registered images (Umeyama). Requires >= 3 common images
// with non-degenerate geometry; nullopt otherwise. Used to compare point
// clouds across the reconstruction's free similarity gauge.
std::optional<Similarity> AlignCameraCenters(const std::map<ImageId, Pose>& estimated,
                                             const std::map<ImageId, Pose>& gt);

// |intersection of all sets| / min |set|. Throws std::invalid_argument when
// the bag is empty or any set is empty.
double CovisibilityRatio(const std::vector<std::set<TrackId>>& bags);

}  // namespace dfsfm

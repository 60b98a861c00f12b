#include "dfsfm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <stdexcept>

#include <Eigen/Geometry>

namespace dfsfm {
namespace {

constexpr double kMaxPairErrorDeg = 180.0;
constexpr double kRadToDeg = 180.0 / M_PI;

// Angle between two direction vectors, tolerant of near-zero baselines: when
// both baselines vanish the directions carry no information (score 0); when
// only one vanishes the geometries genuinely disagree (max error).
double DirectionAngleDeg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  constexpr double kTiny = 1e-10;
  const double na = a.norm();
  const double nb = b.norm();
  if (na < kTiny && nb < kTiny) return 0.0;
  if (na < kTiny || nb < kTiny) return kMaxPairErrorDeg;
  return std::atan2(a.cross(b).norm(), a.dot(b)) * kRadToDeg;
}

}  // namespace

std::vector<double> PairwisePoseErrorsDeg(const std::map<ImageId, Pose>& estimated,
                                          const std::map<ImageId, Pose>& gt) {
  std::vector<ImageId> ids;
  ids.reserve(gt.size());
  for (const auto& [id, pose] : gt) ids.push_back(id);

  std::vector<double> errors;
  errors.reserve(ids.size() * (ids.size() - 1) / 2);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const auto est_i = estimated.find(ids[i]);
      const auto est_j = estimated.find(ids[j]);
      if (est_i == estimated.end() || est_j == estimated.end()) {
        errors.push_back(kMaxPairErrorDeg);
        continue;
      }
      const Pose rel_est = Pose::Between(est_i->second, est_j->second);
      const Pose rel_gt = Pose::Between(gt.at(ids[i]), gt.at(ids[j]));
      const double rot_deg = RotationAngle(rel_est.R, rel_gt.R) * kRadToDeg;
      const double dir_deg = DirectionAngleDeg(rel_est.t, rel_gt.t);
      errors.push_back(std::max(rot_deg, dir_deg));
    }
  }
  return errors;
}

PoseAucResult EvalPoseAuc(const std::map<ImageId, Pose>& estimated,
                          const std::map<ImageId, Pose>& gt,
                          const std::vector<double>& thresholds_deg) {
  std::size_t common = 0;
  for (const auto& [id, pose] : gt) {
    if (estimated.count(id) > 0) ++common;
  }
  if (common < 2) {
    throw std::invalid_argument("pose AUC needs at least two images registered in both sets");
  }

  const std::vector<double> errors = PairwisePoseErrorsDeg(estimated, gt);

  PoseAucResult result;
  result.num_pairs = errors.size();
  result.common_images = common;
  result.auc.reserve(thresholds_deg.size());
  for (const double threshold : thresholds_deg) {
    double area = 0.0;
    for (const double e : errors) area += std::max(0.0, threshold - e);
    result.auc.push_back(area / (threshold * static_cast<double>(errors.size())));
  }
  return result;
}

TriangulationEval EvalTriangulation(const std::vector<Eigen::Vector3d>& points,
                                    const std::vector<Eigen::Vector3d>& gt_points,
                                    const std::vector<double>& thresholds) {
  TriangulationEval eval;
  eval.accuracy.assign(thresholds.size(), 0.0);
  eval.completeness.assign(thresholds.size(), 0.0);
  if (points.empty() || gt_points.empty()) return eval;

  const auto count_within = [](const std::vector<Eigen::Vector3d>& from,
                               const std::vector<Eigen::Vector3d>& to, double threshold) {
    const double t2 = threshold * threshold;
    std::size_t hits = 0;
    for (const Eigen::Vector3d& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const Eigen::Vector3d& q : to) {
        best = std::min(best, (p - q).squaredNorm());
        if (best <= t2) break;
      }
      if (best <= t2) ++hits;
    }
    return hits;
  };

  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    eval.accuracy[k] = static_cast<double>(count_within(points, gt_points, thresholds[k])) /
                       static_cast<double>(points.size());
    eval.completeness[k] = static_cast<double>(count_within(gt_points, points, thresholds[k])) /
                           static_cast<double>(gt_points.size());
  }
  return eval;
}

std::optional<Similarity> AlignCameraCenters(const std::map<ImageId, Pose>& estimated,
                                             const std::map<ImageId, Pose>& gt) {
  std::vector<Eigen::Vector3d> src;
  std::vector<Eigen::Vector3d> dst;
  for (const auto& [id, gt_pose] : gt) {
    const auto est = estimated.find(id);
    if (est == estimated.end()) continue;
    src.push_back(est->second.Center());
    dst.push_back(gt_pose.Center());
  }
  if (src.size() < 3) return std::nullopt;

  Eigen::Matrix3Xd src_mat(3, static_cast<Eigen::Index>(src.size()));
  Eigen::Matrix3Xd dst_mat(3, static_cast<Eigen::Index>(dst.size()));
  for (std::size_t i = 0; i < src.size(); ++i) {
    src_mat.col(static_cast<Eigen::Index>(i)) = src[i];
    dst_mat.col(static_cast<Eigen::Index>(i)) = dst[i];
  }

  const Eigen::Matrix4d transform = Eigen::umeyama(src_mat, dst_mat, true);
  Similarity sim;
  const Eigen::Matrix3d sR = transform.topLeftCorner<3, 3>();
  sim.scale = std::cbrt(sR.determinant());
  if (!(sim.scale > 0.0) || !std::isfinite(sim.scale)) return std::nullopt;
  sim.R = sR / sim.scale;
  sim.t = transform.topRightCorner<3, 1>();
  return sim;
}

double CovisibilityRatio(const std::vector<std::set<TrackId>>& bags) {
  if (bags.empty()) throw std::invalid_argument("covisibility ratio of an empty bag");
  std::set<TrackId> intersection = bags.front();
  std::size_t min_size = bags.front().size();
  for (const std::set<TrackId>& bag : bags) {
    if (bag.empty()) throw std::invalid_argument("covisibility ratio with an empty point set");
    min_size = std::min(min_size, bag.size());
    std::set<TrackId> next;
    std::set_intersection(intersection.begin(), intersection.end(), bag.begin(), bag.end(),
                          std::inserter(next, next.begin()));
    intersection = std::move(next);
  }
  return static_cast<double>(intersection.size()) / static_cast<double>(min_size);
}

}  // namespace dfsfm

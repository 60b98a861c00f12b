#include "dfsfm/relative_pose.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "dfsfm/projection.hpp"
#include "dfsfm/triangulation.hpp"

namespace dfsfm {

namespace {

// Hartley conditioning transform: centroid to origin, mean radius sqrt(2).
Eigen::Matrix3d NormalizingTransform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d T = Eigen::Matrix3d::Identity();
  T(0, 0) = scale;
  T(1, 1) = scale;
  T(0, 2) = -scale * centroid.x();
  T(1, 2) = -scale * centroid.y();
  return T;
}

// Linear eight-point solve for the epipolar matrix G with x_b^T G x_a = 0.
Eigen::Matrix3d FitEpipolarLinear(const std::vector<Eigen::Vector2d>& xa,
                                  const std::vector<Eigen::Vector2d>& xb) {
  const Eigen::Matrix3d Ta = NormalizingTransform(xa);
  const Eigen::Matrix3d Tb = NormalizingTransform(xb);

  Eigen::MatrixXd A(static_cast<int>(xa.size()), 9);
  for (std::size_t i = 0; i < xa.size(); ++i) {
    const Eigen::Vector3d pa = Ta * xa[i].homogeneous();
    const Eigen::Vector3d pb = Tb * xb[i].homogeneous();
    const double u = pa.x(), v = pa.y();
    const double up = pb.x(), vp = pb.y();
    A.row(static_cast<int>(i)) << up * u, up * v, up, vp * u, vp * v, vp, u, v, 1.0;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> g = svd.matrixV().col(8);
  Eigen::Matrix3d G;
  G << g(0), g(1), g(2), g(3), g(4), g(5), g(6), g(7), g(8);
  return Tb.transpose() * G * Ta;
}

}  // namespace

Eigen::Matrix3d FitFundamental8Point(const std::vector<Eigen::Vector2d>& xa,
                                     const std::vector<Eigen::Vector2d>& xb) {
  Eigen::Matrix3d F = FitEpipolarLinear(xa, xb);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d s = svd.singularValues();
  s(2) = 0.0;
  F = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  const double norm = F.norm();
  return norm > 1e-14 ? Eigen::Matrix3d(F / norm) : F;
}

Eigen::Matrix3d FitEssential8Point(const std::vector<Eigen::Vector2d>& na,
                                   const std::vector<Eigen::Vector2d>& nb) {
  Eigen::Matrix3d E = FitEpipolarLinear(na, nb);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double s = 0.5 * (svd.singularValues()(0) + svd.singularValues()(1));
  return svd.matrixU() * Eigen::Vector3d(s, s, 0.0).asDiagonal() * svd.matrixV().transpose();
}

double SampsonDistance(const Eigen::Matrix3d& F, const Eigen::Vector2d& xa,
                       const Eigen::Vector2d& xb) {
  const Eigen::Vector3d pa = xa.homogeneous();
  const Eigen::Vector3d pb = xb.homogeneous();
  const Eigen::Vector3d Fa = F * pa;
  const Eigen::Vector3d Ftb = F.transpose() * pb;
  const double r = pb.dot(Fa);
  const double denom = Fa.head<2>().squaredNorm() + Ftb.head<2>().squaredNorm();
  if (denom < 1e-24) return std::numeric_limits<double>::infinity();
  return std::abs(r) / std::sqrt(denom);
}

namespace {

struct DecompositionPick {
  Pose pose;
  int support = -1;
  double median_angle = 0.0;
};

// Choose among the four (R, t) factorizations of E by cheirality, and measure
// the parallax the winning pose implies for the inliers.
DecompositionPick DecomposeEssential(const Eigen::Matrix3d& E,
                                     const std::vector<Eigen::Vector2d>& na,
                                     const std::vector<Eigen::Vector2d>& nb) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d U = svd.matrixU();
  Eigen::Matrix3d V = svd.matrixV();
  if (U.determinant() < 0.0) U.col(2) *= -1.0;
  if (V.determinant() < 0.0) V.col(2) *= -1.0;
  Eigen::Matrix3d W;
  W << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;

  const Eigen::Matrix3d R1 = U * W * V.transpose();
  const Eigen::Matrix3d R2 = U * W.transpose() * V.transpose();
  const Eigen::Vector3d t = U.col(2);

  CameraIntrinsics ident;  // fx = fy = 1, c = 0: ideal normalized camera
  ident.width = 0;
  ident.height = 0;

  DecompositionPick best;
  for (const Eigen::Matrix3d& R : {R1, R2}) {
    for (const double sign : {1.0, -1.0}) {
      Pose pose;
      pose.R = R;
      pose.t = sign * t;

      int support = 0;
      std::vector<double> angles;
      angles.reserve(na.size());
      for (std::size_t i = 0; i < na.size(); ++i) {
        ViewObservation va{na[i], Pose::Identity(), ident};
        ViewObservation vb{nb[i], pose, ident};
        TriangulationOptions topt;
        topt.min_tri_angle_deg = 0.0;  // cheirality decided here, not parallax
        topt.refine = false;
        const TriangulationResult tri = TriangulateMultiview({va, vb}, topt);
        if (tri.status == TriangulationStatus::kOk) {
          ++support;
          angles.push_back(tri.tri_angle_rad);
        }
      }
      if (support > best.support) {
        best.support = support;
        best.pose = pose;
        if (!angles.empty()) {
          std::nth_element(angles.begin(), angles.begin() + angles.size() / 2, angles.end());
          best.median_angle = angles[angles.size() / 2];
        } else {
          best.median_angle = 0.0;
        }
      }
    }
  }
  return best;
}

}  // namespace

RelativePoseResult SolveRelativePoseRansac(const std::vector<Eigen::Vector2d>& xa,
                                           const std::vector<Eigen::Vector2d>& xb,
                                           const CameraIntrinsics& intr_a,
                                           const CameraIntrinsics& intr_b,
                                           const RelativePoseOptions& options) {
  RelativePoseResult result;
  const int n = static_cast<int>(xa.size());
  if (n < 8 || xb.size() != xa.size()) {
    result.status = RelPoseStatus::kInsufficientData;
    return result;
  }

  std::vector<Eigen::Vector2d> na(xa.size()), nb(xb.size());
  for (std::size_t i = 0; i < xa.size(); ++i) {
    na[i] = intr_a.PixelToIdeal(xa[i]);
    nb[i] = intr_b.PixelToIdeal(xb[i]);
  }

  // Sampson distance lives in normalized units; convert the pixel threshold
  // with the mean focal length of the two cameras.
  const double mean_focal = 0.25 * (intr_a.fx + intr_a.fy + intr_b.fx + intr_b.fy);
  const double threshold = options.ransac.threshold_px / mean_focal;

  const auto count_inliers = [&](const Eigen::Matrix3d& E, std::vector<char>* mask) {
    int count = 0;
    if (mask) mask->assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      const double d = SampsonDistance(E, na[static_cast<std::size_t>(i)],
                                       nb[static_cast<std::size_t>(i)]);
      if (d <= threshold) {
        ++count;
        if (mask) (*mask)[static_cast<std::size_t>(i)] = 1;
      }
    }
    return count;
  };

  const int iterations =
      RansacIterationCount(options.ransac.confidence, options.ransac.inlier_ratio_guess, 8,
                           options.ransac.min_iterations, options.ransac.max_iterations);
  std::mt19937_64 rng(options.ransac.seed);
  std::vector<int> sample;
  std::vector<Eigen::Vector2d> sa(8), sb(8);
  Eigen::Matrix3d best_E = Eigen::Matrix3d::Zero();
  int best_inliers = -1;

  for (int it = 0; it < iterations; ++it) {
    SampleDistinct(rng, 8, n, sample);
    for (int k = 0; k < 8; ++k) {
      sa[static_cast<std::size_t>(k)] = na[static_cast<std::size_t>(sample[static_cast<std::size_t>(k)])];
      sb[static_cast<std::size_t>(k)] = nb[static_cast<std::size_t>(sample[static_cast<std::size_t>(k)])];
    }
    const Eigen::Matrix3d E = FitEssential8Point(sa, sb);
    const int inliers = count_inliers(E, nullptr);
    if (inliers > best_inliers) {
      best_inliers = inliers;
      best_E = E;
    }
  }

  if (best_inliers < std::max(8, options.min_inliers)) {
    result.status = RelPoseStatus::kNoConsensus;
    return result;
  }

  // Refit on the consensus set for a cleaner model.
  std::vector<char> mask;
  count_inliers(best_E, &mask);
  std::vector<Eigen::Vector2d> ia, ib;
  for (int i = 0; i < n; ++i) {
    if (mask[static_cast<std::size_t>(i)]) {
      ia.push_back(na[static_cast<std::size_t>(i)]);
      ib.push_back(nb[static_cast<std::size_t>(i)]);
    }
  }
  if (static_cast<int>(ia.size()) >= 8) {
    const Eigen::Matrix3d refit = FitEssential8Point(ia, ib);
    if (count_inliers(refit, nullptr) >= best_inliers) {
      best_E = refit;
      best_inliers = count_inliers(best_E, &mask);
      ia.clear();
      ib.clear();
      for (int i = 0; i < n; ++i) {
        if (mask[static_cast<std::size_t>(i)]) {
          ia.push_back(na[static_cast<std::size_t>(i)]);
          ib.push_back(nb[static_cast<std::size_t>(i)]);
        }
      }
    }
  }

  const DecompositionPick pick = DecomposeEssential(best_E, ia, ib);
  result.median_tri_angle_rad = pick.median_angle;
  if (pick.support <= 0 ||
      pick.median_angle < options.min_tri_angle_deg * M_PI / 180.0) {
    result.status = RelPoseStatus::kDegenerate;
    return result;
  }

  result.pose_b_from_a = pick.pose;
  const double tnorm = result.pose_b_from_a.t.norm();
  if (tnorm > 1e-14) result.pose_b_from_a.t /= tnorm;
  result.inlier_mask = std::move(mask);
  result.num_inliers = best_inliers;
  result.status = RelPoseStatus::kOk;
  return result;
}

}  // namespace dfsfm

#include "dfsfm/pnp.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cmath>

#include "dfsfm/projection.hpp"

namespace dfsfm {

namespace {

// Dense polynomial in ascending powers, degree <= 4 after the products below.
using Poly = std::array<double, 5>;

Poly PolyMul(const Poly& a, int deg_a, const Poly& b, int deg_b) {
  Poly out{};
  for (int i = 0; i <= deg_a; ++i) {
    for (int j = 0; j <= deg_b; ++j) out[static_cast<std::size_t>(i + j)] += a[i] * b[j];
  }
  return out;
}

double PolyEval(const Poly& p, int deg, double x) {
  double v = 0.0;
  for (int i = deg; i >= 0; --i) v = v * x + p[static_cast<std::size_t>(i)];
  return v;
}

// Real roots of a polynomial of degree <= 4 via the companion matrix of the
// trimmed polynomial.
std::vector<double> RealRoots(const Poly& p, int degree) {
  double max_coef = 0.0;
  for (int i = 0; i <= degree; ++i) max_coef = std::max(max_coef, std::abs(p[i]));
  if (max_coef == 0.0) return {};
  while (degree > 0 && std::abs(p[degree]) < 1e-14 * max_coef) --degree;
  if (degree == 0) return {};
  if (degree == 1) return {-p[0] / p[1]};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 0; i < degree; ++i) companion(0, i) = -p[degree - 1 - i] / p[degree];
  companion.block(1, 0, degree - 1, degree - 1).setIdentity();

  const Eigen::EigenSolver<Eigen::MatrixXd> solver(companion);
  std::vector<double> roots;
  for (int i = 0; i < degree; ++i) {
    const auto root = solver.eigenvalues()(i);
    if (std::abs(root.imag()) < 1e-8 * (1.0 + std::abs(root.real()))) roots.push_back(root.real());
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

// Rigid absolute orientation (no scale) mapping src -> dst.
Pose RigidAlign(const Eigen::Matrix3d& src, const Eigen::Matrix3d& dst) {
  const Eigen::Vector3d c_src = src.rowwise().mean();
  const Eigen::Vector3d c_dst = dst.rowwise().mean();
  const Eigen::Matrix3d H = (src.colwise() - c_src) * (dst.colwise() - c_dst).transpose();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d R = svd.matrixV() * svd.matrixU().transpose();
  if (R.determinant() < 0.0) {
    Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
    flip(2, 2) = -1.0;
    R = svd.matrixV() * flip * svd.matrixU().transpose();
  }
  Pose pose;
  pose.R = R;
  pose.t = c_dst - R * c_src;
  return pose;
}

}  // namespace

std::vector<Pose> SolveP3P(const std::vector<Eigen::Vector2d>& pixels,
                           const std::vector<Eigen::Vector3d>& points,
                           const CameraIntrinsics& intrinsics) {
  if (pixels.size() != 3 || points.size() != 3) return {};

  std::array<Eigen::Vector3d, 3> f;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector2d n = intrinsics.PixelToIdeal(pixels[static_cast<std::size_t>(i)]);
    f[static_cast<std::size_t>(i)] = Eigen::Vector3d(n.x(), n.y(), 1.0).normalized();
  }

  const double a = (points[1] - points[2]).norm();
  const double b = (points[0] - points[2]).norm();
  const double c = (points[0] - points[1]).norm();
  if (a < 1e-12 || b < 1e-12 || c < 1e-12) return {};

  const double cos_alpha = f[1].dot(f[2]);
  const double cos_beta = f[0].dot(f[2]);
  const double cos_gamma = f[0].dot(f[1]);

  // Grunert's system with s2 = u*s1, s3 = v*s1 reduces to two quadratics in u
  // whose coefficients are polynomials in v:
  //   I:  u^2 + b1(v) u + c1(v) = 0,  b1 = -2 v cos(alpha), c1 = v^2 - A D(v)
  //   II: u^2 + b2    u + c2(v) = 0,  b2 = -2 cos(gamma),   c2 = 1 - C D(v)
  // with D(v) = 1 + v^2 - 2 v cos(beta), A = a^2/b^2, C = c^2/b^2. Their
  // resultant  dc^2 - b1 db dc + c1 db^2  (db = b1-b2, dc = c1-c2) is a
  // quartic in v whose real roots give the admissible depth ratios.
  const double A = (a * a) / (b * b);
  const double C = (c * c) / (b * b);

  const Poly D = {1.0, -2.0 * cos_beta, 1.0, 0.0, 0.0};
  const Poly b1 = {0.0, -2.0 * cos_alpha, 0.0, 0.0, 0.0};
  const Poly c1 = {-A, 2.0 * A * cos_beta, 1.0 - A, 0.0, 0.0};
  const Poly db = {2.0 * cos_gamma, -2.0 * cos_alpha, 0.0, 0.0, 0.0};
  const Poly dc = {C - A - 1.0, 2.0 * (A - C) * cos_beta, 1.0 - A + C, 0.0, 0.0};

  const Poly dc2 = PolyMul(dc, 2, dc, 2);
  const Poly b1_db_dc = PolyMul(PolyMul(b1, 1, db, 1), 2, dc, 2);
  const Poly c1_db2 = PolyMul(c1, 2, PolyMul(db, 1, db, 1), 2);
  Poly quartic{};
  for (std::size_t i = 0; i < quartic.size(); ++i) quartic[i] = dc2[i] - b1_db_dc[i] + c1_db2[i];

  std::vector<Pose> solutions;
  for (const double v : RealRoots(quartic, 4)) {
    if (v <= 0.0) continue;
    const double Dv = PolyEval(D, 2, v);
    if (Dv <= 1e-14) continue;
    const double s1 = b / std::sqrt(Dv);

    const double db_v = PolyEval(db, 1, v);
    std::vector<double> u_candidates;
    if (std::abs(db_v) > 1e-10) {
      u_candidates.push_back(-PolyEval(dc, 2, v) / db_v);
    } else {
      // Common-root elimination degenerates; fall back to quadratic II.
      const double b2 = -2.0 * cos_gamma;
      const double c2 = 1.0 - C * Dv;
      const double disc = b2 * b2 - 4.0 * c2;
      if (disc < 0.0) continue;
      const double sq = std::sqrt(disc);
      u_candidates.push_back(0.5 * (-b2 + sq));
      u_candidates.push_back(0.5 * (-b2 - sq));
    }

    for (const double u : u_candidates) {
      if (u <= 0.0) continue;
      const double s2 = u * s1;
      const double s3 = v * s1;
      Eigen::Matrix3d world;
      world << points[0], points[1], points[2];
      Eigen::Matrix3d cam;
      cam << s1 * f[0], s2 * f[1], s3 * f[2];
      solutions.push_back(RigidAlign(world, cam));
    }
  }
  return solutions;
}

Pose RefinePoseGaussNewton(Pose pose, const std::vector<Eigen::Vector2d>& pixels,
                           const std::vector<Eigen::Vector3d>& points,
                           const CameraIntrinsics& intrinsics, const std::vector<char>& mask,
                           int iterations) {
  const auto cost = [&](const Pose& p) {
    double sum = 0.0;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      if (!mask.empty() && !mask[i]) continue;
      const double e = ReprojectionError(p, intrinsics, points[i], pixels[i]);
      sum += std::isfinite(e) ? e * e : 1e12;
    }
    return sum;
  };

  double current_cost = cost(pose);
  for (int it = 0; it < iterations; ++it) {
    Eigen::Matrix<double, 6, 6> JtJ = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> Jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      if (!mask.empty() && !mask[i]) continue;
      const ProjectionDerivatives d = ProjectWithJacobian(pose, intrinsics, points[i]);
      if (!d.valid) continue;
      Eigen::Matrix<double, 2, 6> J;
      J.leftCols<3>() = d.d_cam * (-Skew(pose.R * points[i]));
      J.rightCols<3>() = d.d_cam;
      const Eigen::Vector2d r = d.px - pixels[i];
      JtJ += J.transpose() * J;
      Jtr += J.transpose() * r;
    }
    JtJ.diagonal().array() += 1e-10;
    Eigen::Matrix<double, 6, 1> delta = JtJ.ldlt().solve(-Jtr);
    if (!delta.allFinite()) break;

    // Backtracking keeps the iteration from overshooting on poor geometry.
    bool accepted = false;
    for (int half = 0; half < 8; ++half) {
      Pose trial;
      trial.R = ExpSO3(delta.head<3>()) * pose.R;
      trial.t = pose.t + delta.tail<3>();
      const double trial_cost = cost(trial);
      if (trial_cost <= current_cost) {
        pose = trial;
        current_cost = trial_cost;
        accepted = true;
        break;
      }
      delta *= 0.5;
    }
    if (!accepted || delta.norm() < 1e-14) break;
  }
  pose.R = ProjectToSO3(pose.R);
  return pose;
}

PnPResult SolvePnPRansac(const std::vector<Eigen::Vector2d>& pixels,
                         const std::vector<Eigen::Vector3d>& points,
                         const CameraIntrinsics& intrinsics, const PnPOptions& options) {
  PnPResult result;
  const int n = static_cast<int>(pixels.size());
  if (n < 4 || points.size() != pixels.size()) {
    result.status = PnPStatus::kInsufficientData;
    return result;
  }

  const double thr2 = options.ransac.threshold_px * options.ransac.threshold_px;
  const auto count_inliers = [&](const Pose& pose, std::vector<char>* mask) {
    int count = 0;
    if (mask) mask->assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      const auto proj = ProjectPoint(pose, intrinsics, points[static_cast<std::size_t>(i)]);
      if (!proj) continue;
      const double e2 = (*proj - pixels[static_cast<std::size_t>(i)]).squaredNorm();
      if (e2 <= thr2) {
        ++count;
        if (mask) (*mask)[static_cast<std::size_t>(i)] = 1;
      }
    }
    return count;
  };

  const int iterations =
      RansacIterationCount(options.ransac.confidence, options.ransac.inlier_ratio_guess, 3,
                           options.ransac.min_iterations, options.ransac.max_iterations);
  std::mt19937_64 rng(options.ransac.seed);
  std::vector<int> sample;
  Pose best_pose;
  int best_inliers = -1;

  for (int it = 0; it < iterations; ++it) {
    SampleDistinct(rng, 3, n, sample);
    const std::vector<Eigen::Vector2d> px = {pixels[static_cast<std::size_t>(sample[0])],
                                             pixels[static_cast<std::size_t>(sample[1])],
                                             pixels[static_cast<std::size_t>(sample[2])]};
    const std::vector<Eigen::Vector3d> pt = {points[static_cast<std::size_t>(sample[0])],
                                             points[static_cast<std::size_t>(sample[1])],
                                             points[static_cast<std::size_t>(sample[2])]};
    for (const Pose& candidate : SolveP3P(px, pt, intrinsics)) {
      const int inliers = count_inliers(candidate, nullptr);
      if (inliers > best_inliers) {
        best_inliers = inliers;
        best_pose = candidate;
      }
    }
  }

  if (best_inliers < std::max(4, options.min_inliers)) {
    result.status = PnPStatus::kNoConsensus;
    return result;
  }

  // Polish on inliers, then recompute the consensus set once and polish again.
  std::vector<char> mask;
  count_inliers(best_pose, &mask);
  Pose refined = RefinePoseGaussNewton(best_pose, pixels, points, intrinsics, mask,
                                       options.refine_iterations);
  const int refined_inliers = count_inliers(refined, &mask);
  if (refined_inliers >= std::max(4, options.min_inliers)) {
    refined = RefinePoseGaussNewton(refined, pixels, points, intrinsics, mask,
                                    options.refine_iterations);
    result.pose = refined;
    result.num_inliers = count_inliers(refined, &mask);
  } else {
    // Refinement degraded the consensus (pathological geometry); keep the
    // RANSAC pose.
    result.pose = best_pose;
    result.num_inliers = count_inliers(best_pose, &mask);
  }
  result.inlier_mask = std::move(mask);
  result.status = PnPStatus::kOk;
  return result;
}

}  // namespace dfsfm

#include "dfsfm/triangulation.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "dfsfm/projection.hpp"

namespace dfsfm {

namespace {

Eigen::Vector3d SolveDlt(const std::vector<ViewObservation>& views) {
  // Rows x*(p3 - p1), y*(p3 - p2) of [R|t] in ideal normalized coordinates.
  Eigen::MatrixXd A(2 * static_cast<int>(views.size()), 4);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& v = views[i];
    Eigen::Matrix<double, 3, 4> P;
    P.leftCols<3>() = v.pose.R;
    P.rightCols<1>() = v.pose.t;
    const Eigen::Vector2d n = v.intrinsics.PixelToIdeal(v.xy);
    A.row(2 * static_cast<int>(i)) = n.x() * P.row(2) - P.row(0);
    A.row(2 * static_cast<int>(i) + 1) = n.y() * P.row(2) - P.row(1);
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h(3)) < 1e-14) {
    // Point at infinity; return a far point along the homogeneous direction.
    return h.head<3>() * 1e12;
  }
  return h.head<3>() / h(3);
}

// Gauss-Newton on pixel reprojection error over the 3D point only.
Eigen::Vector3d RefinePoint(const std::vector<ViewObservation>& views, Eigen::Vector3d point,
                            int max_iterations) {
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::Matrix3d JtJ = Eigen::Matrix3d::Zero();
    Eigen::Vector3d Jtr = Eigen::Vector3d::Zero();
    bool any = false;
    for (const auto& v : views) {
      const ProjectionDerivatives d = ProjectWithJacobian(v.pose, v.intrinsics, point);
      if (!d.valid) continue;
      const Eigen::Matrix<double, 2, 3> J = d.d_cam * v.pose.R;
      const Eigen::Vector2d r = d.px - v.xy;
      JtJ += J.transpose() * J;
      Jtr += J.transpose() * r;
      any = true;
    }
    if (!any) break;
    // Tiny Tikhonov term keeps the solve stable for near-collinear rays.
    JtJ.diagonal().array() += 1e-12;
    const Eigen::Vector3d delta = JtJ.ldlt().solve(Jtr);
    if (!delta.allFinite()) break;
    point -= delta;
    if (delta.norm() < 1e-12) break;
  }
  return point;
}

}  // namespace

TriangulationResult TriangulateMultiview(const std::vector<ViewObservation>& views,
                                         const TriangulationOptions& options) {
  TriangulationResult result;
  if (views.size() < 2) {
    result.status = TriangulationStatus::kInsufficientObservations;
    return result;
  }

  Eigen::Vector3d point = SolveDlt(views);
  if (options.refine) point = RefinePoint(views, point, options.max_refine_iterations);
  result.point = point;

  double max_angle = 0.0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    for (std::size_t j = i + 1; j < views.size(); ++j) {
      max_angle = std::max(max_angle, TriangulationAngle(views[i].pose.Center(),
                                                         views[j].pose.Center(), point));
    }
  }
  result.tri_angle_rad = max_angle;

  double max_error = 0.0;
  for (const auto& v : views) {
    if (!HasPositiveDepth(v.pose, point)) {
      result.status = TriangulationStatus::kCheirality;
      result.max_reprojection_error_px = std::numeric_limits<double>::infinity();
      return result;
    }
    max_error = std::max(max_error, ReprojectionError(v.pose, v.intrinsics, point, v.xy));
  }
  result.max_reprojection_error_px = max_error;

  if (max_angle < options.min_tri_angle_deg * M_PI / 180.0) {
    result.status = TriangulationStatus::kDegenerate;
    return result;
  }
  result.status = TriangulationStatus::kOk;
  return result;
}

}  // namespace dfsfm

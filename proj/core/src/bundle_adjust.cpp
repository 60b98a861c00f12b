#include "dfsfm/bundle_adjust.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "dfsfm/projection.hpp"

namespace dfsfm {

namespace {

// Residual cost cap for observations that fall behind the camera during a
// trial step: equivalent to a 1e4 px residual. The Cauchy loss saturates, so
// this stays far above any plausible inlier cost without exploding.
constexpr double kBehindCameraResidualPx = 1e4;

double CauchyCost(double squared_residual, double c2) {
  return c2 * std::log1p(squared_residual / c2);
}

double CauchyWeight(double squared_residual, double c2) {
  return 1.0 / (1.0 + squared_residual / c2);
}

struct ResidualRef {
  int cam_idx = -1;  // index into variable camera arrays, -1 = fixed camera
  int pt_idx = -1;   // index into variable point array, -1 = fixed point
  ImageId image = kInvalidImageId;
  TrackId track = kInvalidTrackId;
  Eigen::Vector2d observed = Eigen::Vector2d::Zero();
};

// Accumulator for the reduced camera system in either dense or block-sparse
// form. Row/col indices address camera parameters.
struct ReducedSystem {
  bool dense = true;
  int n = 0;
  Eigen::MatrixXd S;                                      // dense storage
  std::map<std::pair<int, int>, Eigen::MatrixXd> blocks;  // sparse block storage
  int chunk = 6;

  void Init(int n_params, int chunk_size, bool use_dense) {
    n = n_params;
    chunk = chunk_size;
    dense = use_dense;
    if (dense) {
      S = Eigen::MatrixXd::Zero(n, n);
    } else {
      blocks.clear();
    }
  }

  void AddDiag(const Eigen::VectorXd& d) {
    if (dense) {
      S.diagonal() += d;
    } else {
      for (int k = 0; k < n / chunk; ++k) {
        auto& blk = BlockRef(k, k);
        blk.diagonal() += d.segment(k * chunk, chunk);
      }
    }
  }

  Eigen::MatrixXd& BlockRef(int cam_row, int cam_col) {
    auto& blk = blocks[{cam_row, cam_col}];
    if (blk.size() == 0) blk = Eigen::MatrixXd::Zero(chunk, chunk);
    return blk;
  }

  void Add(int cam_row, int cam_col, const Eigen::MatrixXd& value) {
    if (dense) {
      S.block(cam_row * chunk, cam_col * chunk, chunk, chunk) += value;
    } else {
      BlockRef(cam_row, cam_col) += value;
    }
  }

  void ZeroMasked(const std::vector<char>& mask) {
    if (dense) {
      for (int i = 0; i < n; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        S.row(i).setZero();
        S.col(i).setZero();
        S(i, i) = 1.0;
      }
      return;
    }
    for (auto& [key, blk] : blocks) {
      const int row_base = key.first * chunk;
      const int col_base = key.second * chunk;
      for (int r = 0; r < chunk; ++r) {
        if (mask[static_cast<std::size_t>(row_base + r)]) blk.row(r).setZero();
      }
      for (int c = 0; c < chunk; ++c) {
        if (mask[static_cast<std::size_t>(col_base + c)]) blk.col(c).setZero();
      }
      if (key.first == key.second) {
        for (int r = 0; r < chunk; ++r) {
          if (mask[static_cast<std::size_t>(row_base + r)]) blk(r, r) = 1.0;
        }
      }
    }
  }

  Eigen::VectorXd Solve(const Eigen::VectorXd& rhs, bool* ok) const {
    if (dense) {
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
      const Eigen::VectorXd x = ldlt.solve(rhs);
      *ok = ldlt.info() == Eigen::Success && x.allFinite();
      return x;
    }
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(blocks.size() * static_cast<std::size_t>(chunk) * chunk * 2);
    for (const auto& [key, blk] : blocks) {
      const int row_base = key.first * chunk;
      const int col_base = key.second * chunk;
      for (int r = 0; r < chunk; ++r) {
        for (int c = 0; c < chunk; ++c) {
          const double v = blk(r, c);
          if (v == 0.0) continue;
          triplets.emplace_back(row_base + r, col_base + c, v);
          if (key.first != key.second) triplets.emplace_back(col_base + c, row_base + r, v);
        }
      }
    }
    Eigen::SparseMatrix<double> sp(n, n);
    sp.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(sp);
    if (ldlt.info() != Eigen::Success) {
      *ok = false;
      return Eigen::VectorXd::Zero(n);
    }
    const Eigen::VectorXd x = ldlt.solve(rhs);
    *ok = ldlt.info() == Eigen::Success && x.allFinite();
    return x;
  }
};

}  // namespace

double RobustReprojectionCost(const SceneModel& model, double loss_scale_px) {
  const double c2 = loss_scale_px * loss_scale_px;
  double cost = 0.0;
  for (const auto& [track_id, track] : model.tracks) {
    const auto point_it = model.points.find(track_id);
    if (point_it == model.points.end()) continue;
    for (const auto& obs : track.observations) {
      if (!model.IsRegistered(obs.image_id)) continue;
      const auto proj = ProjectPoint(model.poses.at(obs.image_id), model.cameras.at(obs.image_id),
                                     point_it->second.xyz);
      const double s = proj ? (*proj - obs.xy).squaredNorm()
                            : kBehindCameraResidualPx * kBehindCameraResidualPx;
      cost += CauchyCost(s, c2);
    }
  }
  return cost;
}

BAReport BundleAdjust(SceneModel& model, const BAOptions& options) {
  BAReport report;

  // ---- Variable sets -------------------------------------------------------
  std::vector<ImageId> cam_images;
  for (const auto& [id, pose] : model.poses) {
    if (options.variable_images.empty() || options.variable_images.count(id)) {
      cam_images.push_back(id);
    }
  }
  const int ncam = static_cast<int>(cam_images.size());
  if (ncam == 0 || model.tracks.empty()) return report;

  std::map<ImageId, int> cam_index;
  for (int k = 0; k < ncam; ++k) cam_index[cam_images[static_cast<std::size_t>(k)]] = k;

  bool has_fixed_camera = false;
  for (const auto& [id, pose] : model.poses) {
    if (!cam_index.count(id)) has_fixed_camera = true;
  }

  const int chunk = 6 + (options.refine_intrinsics ? 5 : 0);
  const int n_cam_params = ncam * chunk;

  // Variable points: triangulated, >=2 registered observations, and at least
  // one observation in a variable image.
  std::vector<TrackId> pt_tracks;
  std::map<TrackId, int> pt_index;
  for (const auto& [track_id, track] : model.tracks) {
    if (!model.points.count(track_id)) continue;
    int registered = 0;
    bool touches_variable = false;
    for (const auto& obs : track.observations) {
      if (!model.IsRegistered(obs.image_id)) continue;
      ++registered;
      if (cam_index.count(obs.image_id)) touches_variable = true;
    }
    if (registered >= 2 && touches_variable) {
      pt_index[track_id] = static_cast<int>(pt_tracks.size());
      pt_tracks.push_back(track_id);
    }
  }
  const int npt = static_cast<int>(pt_tracks.size());
  if (npt == 0) return report;

  // ---- Residual list -------------------------------------------------------
  std::vector<ResidualRef> residuals;
  for (const auto& [track_id, track] : model.tracks) {
    if (!model.points.count(track_id)) continue;
    const auto pt_it = pt_index.find(track_id);
    for (const auto& obs : track.observations) {
      if (!model.IsRegistered(obs.image_id)) continue;
      const auto cam_it = cam_index.find(obs.image_id);
      const bool cam_variable = cam_it != cam_index.end();
      const bool pt_variable = pt_it != pt_index.end();
      if (!cam_variable && !pt_variable) continue;  // constant residual
      ResidualRef ref;
      ref.cam_idx = cam_variable ? cam_it->second : -1;
      ref.pt_idx = pt_variable ? pt_it->second : -1;
      ref.image = obs.image_id;
      ref.track = track_id;
      ref.observed = obs.xy;
      residuals.push_back(ref);
    }
  }
  if (residuals.empty()) return report;

  // ---- Parameter state -----------------------------------------------------
  std::vector<Pose> cur_poses(static_cast<std::size_t>(ncam));
  std::vector<CameraIntrinsics> cur_intr(static_cast<std::size_t>(ncam));
  for (int k = 0; k < ncam; ++k) {
    cur_poses[static_cast<std::size_t>(k)] = model.poses.at(cam_images[static_cast<std::size_t>(k)]);
    cur_intr[static_cast<std::size_t>(k)] = model.cameras.at(cam_images[static_cast<std::size_t>(k)]);
  }
  std::vector<Eigen::Vector3d> cur_pts(static_cast<std::size_t>(npt));
  for (int j = 0; j < npt; ++j) {
    cur_pts[static_cast<std::size_t>(j)] = model.points.at(pt_tracks[static_cast<std::size_t>(j)]).xyz;
  }

  // ---- Gauge ----------------------------------------------------------------
  std::vector<char> mask(static_cast<std::size_t>(n_cam_params), 0);
  if (options.fix_gauge && !has_fixed_camera && ncam >= 2) {
    // Farthest pair of camera centers; lexicographic tie-break via strict >.
    double best_d2 = -1.0;
    int pick_a = 0, pick_b = 1;
    for (int a = 0; a < ncam; ++a) {
      for (int b = a + 1; b < ncam; ++b) {
        const double d2 = (cur_poses[static_cast<std::size_t>(a)].Center() -
                           cur_poses[static_cast<std::size_t>(b)].Center())
                              .squaredNorm();
        if (d2 > best_d2) {
          best_d2 = d2;
          pick_a = a;
          pick_b = b;
        }
      }
    }
    for (int i = 0; i < 6; ++i) mask[static_cast<std::size_t>(pick_a * chunk + i)] = 1;
    const Eigen::Vector3d& tb = cur_poses[static_cast<std::size_t>(pick_b)].t;
    int tdof = 0;
    for (int i = 1; i < 3; ++i) {
      if (std::abs(tb[i]) > std::abs(tb[tdof])) tdof = i;
    }
    mask[static_cast<std::size_t>(pick_b * chunk + 3 + tdof)] = 1;
    report.gauge_full_image = cam_images[static_cast<std::size_t>(pick_a)];
    report.gauge_tdof_image = cam_images[static_cast<std::size_t>(pick_b)];
    report.gauge_tdof_index = tdof;
  }
  const auto flatten_pose = [](const Pose& pose) {
    Eigen::Matrix<double, 12, 1> v;
    for (int row = 0; row < 3; ++row) v.segment<3>(3 * row) = pose.R.row(row);
    v.tail<3>() = pose.t;
    return v;
  };
  const auto snapshot_gauge = [&](Eigen::Matrix<double, 12, 1>* full, double* tdof_value) {
    for (int k = 0; k < ncam; ++k) {
      const ImageId id = cam_images[static_cast<std::size_t>(k)];
      const Pose& pose = cur_poses[static_cast<std::size_t>(k)];
      if (id == report.gauge_full_image) *full = flatten_pose(pose);
      if (id == report.gauge_tdof_image) *tdof_value = pose.t[report.gauge_tdof_index];
    }
  };
  if (report.gauge_full_image != kInvalidImageId) {
    snapshot_gauge(&report.gauge_full_entry, &report.gauge_tdof_entry);
  }

  // ---- Cost evaluation -----------------------------------------------------
  const double c2 = options.loss_scale_px * options.loss_scale_px;
  const auto evaluate_cost = [&](const std::vector<Pose>& poses,
                                 const std::vector<CameraIntrinsics>& intr,
                                 const std::vector<Eigen::Vector3d>& pts) {
    double cost = 0.0;
    for (const ResidualRef& ref : residuals) {
      const Pose& pose =
          ref.cam_idx >= 0 ? poses[static_cast<std::size_t>(ref.cam_idx)] : model.poses.at(ref.image);
      const CameraIntrinsics& cam = (ref.cam_idx >= 0 && options.refine_intrinsics)
                                        ? intr[static_cast<std::size_t>(ref.cam_idx)]
                                        : model.cameras.at(ref.image);
      const Eigen::Vector3d& xyz = ref.pt_idx >= 0 ? pts[static_cast<std::size_t>(ref.pt_idx)]
                                                   : model.points.at(ref.track).xyz;
      const auto proj = ProjectPoint(pose, cam, xyz);
      const double s = proj ? (*proj - ref.observed).squaredNorm()
                            : kBehindCameraResidualPx * kBehindCameraResidualPx;
      cost += CauchyCost(s, c2);
    }
    return cost;
  };

  double current_cost = evaluate_cost(cur_poses, cur_intr, cur_pts);
  report.initial_cost = current_cost;
  report.final_cost = current_cost;

  const bool use_dense = ncam < options.dense_schur_max_images;
  double lambda = options.init_lambda;

  // Per-point reduction scratch, rebuilt at every linearization.
  struct PointBlock {
    Eigen::Matrix3d C = Eigen::Matrix3d::Zero();
    Eigen::Vector3d b = Eigen::Vector3d::Zero();
    std::vector<std::pair<int, Eigen::MatrixXd>> cams;  // (cam_idx, chunk x 3)
  };

  // B is block-diagonal (one residual touches one camera), so it is stored
  // as per-camera blocks; the sparse path never materializes a dense B.
  std::vector<Eigen::MatrixXd> B_blocks;
  Eigen::VectorXd B_diag_cache;
  Eigen::VectorXd b_c;
  std::vector<PointBlock> pt_blocks;

  const auto linearize = [&]() {
    B_blocks.assign(static_cast<std::size_t>(ncam), Eigen::MatrixXd::Zero(chunk, chunk));
    b_c = Eigen::VectorXd::Zero(n_cam_params);
    pt_blocks.assign(static_cast<std::size_t>(npt), PointBlock{});

    for (const ResidualRef& ref : residuals) {
      const Pose& pose = ref.cam_idx >= 0 ? cur_poses[static_cast<std::size_t>(ref.cam_idx)]
                                          : model.poses.at(ref.image);
      const CameraIntrinsics& cam = (ref.cam_idx >= 0 && options.refine_intrinsics)
                                        ? cur_intr[static_cast<std::size_t>(ref.cam_idx)]
                                        : model.cameras.at(ref.image);
      const Eigen::Vector3d& xyz = ref.pt_idx >= 0 ? cur_pts[static_cast<std::size_t>(ref.pt_idx)]
                                                   : model.points.at(ref.track).xyz;
      const ProjectionDerivatives d = ProjectWithJacobian(pose, cam, xyz);
      if (!d.valid) continue;  // behind camera: constant-cost plateau, no gradient

      const Eigen::Vector2d r = d.px - ref.observed;
      const double w = CauchyWeight(r.squaredNorm(), c2);

      Eigen::MatrixXd Jc;  // 2 x chunk
      if (ref.cam_idx >= 0) {
        Jc = Eigen::MatrixXd::Zero(2, chunk);
        Jc.block<2, 3>(0, 0) = d.d_cam * (-Skew(pose.R * xyz));
        Jc.block<2, 3>(0, 3) = d.d_cam;
        if (options.refine_intrinsics) Jc.block<2, 5>(0, 6) = d.d_intr;
        B_blocks[static_cast<std::size_t>(ref.cam_idx)] += w * Jc.transpose() * Jc;
        b_c.segment(ref.cam_idx * chunk, chunk) -= w * Jc.transpose() * r;
      }
      if (ref.pt_idx >= 0) {
        const Eigen::Matrix<double, 2, 3> Jx = d.d_cam * pose.R;
        PointBlock& blk = pt_blocks[static_cast<std::size_t>(ref.pt_idx)];
        blk.C += w * Jx.transpose() * Jx;
        blk.b -= w * Jx.transpose() * r;
        if (ref.cam_idx >= 0) {
          blk.cams.emplace_back(ref.cam_idx, w * Jc.transpose() * Jx);
        }
      }
    }

    // Gauge rows/cols vanish from the system entirely.
    for (int k = 0; k < ncam; ++k) {
      const int base = k * chunk;
      for (int i = 0; i < chunk; ++i) {
        if (!mask[static_cast<std::size_t>(base + i)]) continue;
        B_blocks[static_cast<std::size_t>(k)].row(i).setZero();
        B_blocks[static_cast<std::size_t>(k)].col(i).setZero();
        b_c(base + i) = 0.0;
      }
    }
    for (PointBlock& blk : pt_blocks) {
      for (auto& [cidx, E] : blk.cams) {
        const int base = cidx * chunk;
        for (int r = 0; r < chunk; ++r) {
          if (mask[static_cast<std::size_t>(base + r)]) E.row(r).setZero();
        }
      }
    }
    B_diag_cache = Eigen::VectorXd::Zero(n_cam_params);
    for (int k = 0; k < ncam; ++k) {
      B_diag_cache.segment(k * chunk, chunk) = B_blocks[static_cast<std::size_t>(k)].diagonal();
    }
  };

  const auto try_solve = [&](double damping, bool* ok, Eigen::VectorXd* delta_c,
                             std::vector<Eigen::Vector3d>* delta_x) {
    // Damped point Hessians and their inverses.
    std::vector<Eigen::Matrix3d> C_inv(static_cast<std::size_t>(npt));
    for (int j = 0; j < npt; ++j) {
      Eigen::Matrix3d C = pt_blocks[static_cast<std::size_t>(j)].C;
      C.diagonal() += damping * C.diagonal().cwiseMax(1e-12);
      C_inv[static_cast<std::size_t>(j)] = C.inverse();
    }

    ReducedSystem S;
    S.Init(n_cam_params, chunk, use_dense);
    for (int k = 0; k < ncam; ++k) {
      S.Add(k, k, B_blocks[static_cast<std::size_t>(k)]);
    }
    Eigen::VectorXd rhs = b_c;

    for (int j = 0; j < npt; ++j) {
      const PointBlock& blk = pt_blocks[static_cast<std::size_t>(j)];
      const Eigen::Matrix3d& Ci = C_inv[static_cast<std::size_t>(j)];
      for (std::size_t a = 0; a < blk.cams.size(); ++a) {
        const auto& [ca, Ea] = blk.cams[a];
        const Eigen::MatrixXd EaCi = Ea * Ci;  // chunk x 3
        rhs.segment(ca * chunk, chunk) -= EaCi * blk.b;
        for (std::size_t b = a; b < blk.cams.size(); ++b) {
          const auto& [cb, Eb] = blk.cams[b];
          const Eigen::MatrixXd reduce = EaCi * Eb.transpose();  // chunk x chunk
          if (use_dense) {
            S.S.block(ca * chunk, cb * chunk, chunk, chunk) -= reduce;
            if (ca != cb) {
              S.S.block(cb * chunk, ca * chunk, chunk, chunk) -= reduce.transpose();
            }
          } else {
            if (ca <= cb) {
              S.Add(ca, cb, -reduce);
            } else {
              S.Add(cb, ca, -reduce.transpose());
            }
          }
        }
      }
    }

    // LM damping on the reduced system's camera diagonal, then re-pin gauge.
    Eigen::VectorXd damp = damping * B_diag_cache.cwiseMax(1e-12);
    for (int i = 0; i < n_cam_params; ++i) {
      if (mask[static_cast<std::size_t>(i)]) damp(i) = 0.0;
    }
    S.AddDiag(damp);
    S.ZeroMasked(mask);
    Eigen::VectorXd rhs_masked = rhs;
    for (int i = 0; i < n_cam_params; ++i) {
      if (mask[static_cast<std::size_t>(i)]) rhs_masked(i) = 0.0;
    }

    *delta_c = S.Solve(rhs_masked, ok);
    if (!*ok) return;

    delta_x->assign(static_cast<std::size_t>(npt), Eigen::Vector3d::Zero());
    for (int j = 0; j < npt; ++j) {
      const PointBlock& blk = pt_blocks[static_cast<std::size_t>(j)];
      Eigen::Vector3d rhs_x = blk.b;
      for (const auto& [cidx, E] : blk.cams) {
        rhs_x -= E.transpose() * delta_c->segment(cidx * chunk, chunk);
      }
      (*delta_x)[static_cast<std::size_t>(j)] = C_inv[static_cast<std::size_t>(j)] * rhs_x;
      if (!(*delta_x)[static_cast<std::size_t>(j)].allFinite()) {
        *ok = false;
        return;
      }
    }
  };

  const auto apply_step = [&](const Eigen::VectorXd& delta_c,
                              const std::vector<Eigen::Vector3d>& delta_x,
                              std::vector<Pose>* poses, std::vector<CameraIntrinsics>* intr,
                              std::vector<Eigen::Vector3d>* pts) {
    *poses = cur_poses;
    *intr = cur_intr;
    *pts = cur_pts;
    for (int k = 0; k < ncam; ++k) {
      const int base = k * chunk;
      bool pose_fully_fixed = true;
      for (int i = 0; i < 6; ++i) {
        if (!mask[static_cast<std::size_t>(base + i)]) pose_fully_fixed = false;
      }
      if (!pose_fully_fixed) {
        Pose& p = (*poses)[static_cast<std::size_t>(k)];
        p.R = ExpSO3(delta_c.segment<3>(base)) * p.R;
        // Component-wise guarded add keeps the gauge translation DoF
        // bit-identical (even against -0.0 + 0.0 normalization).
        for (int i = 0; i < 3; ++i) {
          if (!mask[static_cast<std::size_t>(base + 3 + i)]) p.t[i] += delta_c(base + 3 + i);
        }
      }
      if (options.refine_intrinsics) {
        CameraIntrinsics& c = (*intr)[static_cast<std::size_t>(k)];
        c.fx += delta_c(base + 6);
        c.fy += delta_c(base + 7);
        c.cx += delta_c(base + 8);
        c.cy += delta_c(base + 9);
        c.k1 += delta_c(base + 10);
      }
    }
    for (int j = 0; j < npt; ++j) {
      (*pts)[static_cast<std::size_t>(j)] += delta_x[static_cast<std::size_t>(j)];
    }
  };

  // ---- LM loop ---------------------------------------------------------------
  std::vector<Pose> trial_poses;
  std::vector<CameraIntrinsics> trial_intr;
  std::vector<Eigen::Vector3d> trial_pts;
  Eigen::VectorXd delta_c;
  std::vector<Eigen::Vector3d> delta_x;

  while (report.iterations < options.max_iterations) {
    linearize();

    bool stepped = false;
    while (lambda <= options.max_lambda) {
      bool ok = false;
      try_solve(lambda, &ok, &delta_c, &delta_x);
      if (!ok) {
        lambda *= 10.0;
        if (lambda > options.max_lambda) report.rank_deficient = report.iterations == 0;
        continue;
      }

      double step_norm2 = delta_c.squaredNorm();
      for (const auto& dx : delta_x) step_norm2 += dx.squaredNorm();
      if (std::sqrt(step_norm2) < 1e-14) {
        // Stationary point: nothing to move.
        report.converged = true;
        break;
      }

      apply_step(delta_c, delta_x, &trial_poses, &trial_intr, &trial_pts);
      const double trial_cost = evaluate_cost(trial_poses, trial_intr, trial_pts);
      if (trial_cost <= current_cost) {
        const double rel_decrease =
            (current_cost - trial_cost) / std::max(current_cost, 1e-30);
        cur_poses = std::move(trial_poses);
        cur_intr = std::move(trial_intr);
        cur_pts = std::move(trial_pts);
        current_cost = trial_cost;
        ++report.iterations;
        report.accepted_costs.push_back(current_cost);
        lambda = std::max(lambda * 0.1, 1e-18);
        if (rel_decrease < options.rel_cost_tol) report.converged = true;
        stepped = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped || report.converged) break;
  }

  // ---- Write back -------------------------------------------------------------
  for (int k = 0; k < ncam; ++k) {
    model.poses.at(cam_images[static_cast<std::size_t>(k)]) = cur_poses[static_cast<std::size_t>(k)];
    if (options.refine_intrinsics) {
      model.cameras.at(cam_images[static_cast<std::size_t>(k)]) = cur_intr[static_cast<std::size_t>(k)];
    }
  }
  for (int j = 0; j < npt; ++j) {
    model.points.at(pt_tracks[static_cast<std::size_t>(j)]).xyz = cur_pts[static_cast<std::size_t>(j)];
  }
  report.final_cost = current_cost;
  if (report.gauge_full_image != kInvalidImageId) {
    snapshot_gauge(&report.gauge_full_exit, &report.gauge_tdof_exit);
  }
  return report;
}

}  // namespace dfsfm

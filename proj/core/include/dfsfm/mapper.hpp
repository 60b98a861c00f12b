#pragma once

#include <map>
#include <string>
#include <vector>

#include "dfsfm/matches.hpp"
#include "dfsfm/relative_pose.hpp"
#include "dfsfm/scene_model.hpp"

namespace dfsfm {

struct MapperConfig {
  /// Coarse-phase reprojection / RANSAC threshold. Kept deliberately loose:
  /// quantized matches carry up to ~r/sqrt(2) px of rounding error, and the
  /// coarse stage trades accuracy for registration completeness.
  double reproj_threshold_px = 4.0;
  double min_tri_angle_deg = 1.5;
  int min_registration_inliers = 15;
  /// Fraction of newly registered images that triggers a global BA.
  double global_ba_interval = 0.25;
  /// An image joins the local BA window when it shares at least this many
  /// triangulated points with the newly registered image.
  int local_ba_min_shared_points = 20;
  std::uint64_t seed = 0;
  bool intrinsics_known = true;
  /// Cauchy scale of the coarse-phase bundle adjustment.
  double ba_loss_scale_px = 2.0;
};

enum class InitPairStatus { kOk, kEmptyInput, kNoValidPair };

struct InitPairResult {
  InitPairStatus status = InitPairStatus::kEmptyInput;
  ImageId image_a = kInvalidImageId;
  ImageId image_b = kInvalidImageId;
  RelativePoseResult relative;

  bool ok() const { return status == InitPairStatus::kOk; }
};

/// Initialization pair: among verified pairs whose relative geometry has a
/// median triangulation angle above the minimum, the one with the most
/// RANSAC inliers; ties broken by lexicographic (image_a, image_b) order.
InitPairResult SelectInitPair(const std::vector<QuantizedMatchPair>& pairs,
                              const std::map<ImageId, CameraIntrinsics>& cameras,
                              const MapperConfig& config);

enum class RegisterStatus {
  kRegistered,
  kDeferred,      // not enough inliers yet; retry after more triangulation
  kNoCandidates,  // zero 2D-3D correspondences available
};

/// PnP + nonlinear registration of one image against the model's current
/// triangulated points.
RegisterStatus RegisterImage(SceneModel& model, ImageId image_id, const MapperConfig& config);

/// Triangulate every track that has >= 2 registered observations and no 3D
/// point yet; points failing the coarse reprojection threshold or the
/// triangulation-angle minimum are not added. Returns new-point count.
int TriangulateTracks(SceneModel& model, const MapperConfig& config);

struct MapperInput {
  std::vector<QuantizedMatchPair> verified_pairs;
  std::vector<CoarseTrack> tracks;
  std::vector<Observation2D> unassigned;
  std::map<ImageId, CameraIntrinsics> cameras;
  std::map<ImageId, std::string> image_names;
};

/// Full incremental coarse mapping: bootstrap from the init pair, then
/// register-triangulate-BA-filter until no image can be added. Throws
/// std::runtime_error on empty input or initialization failure.
SceneModel RunIncremental(MapperInput input, const MapperConfig& config = {});

}  // namespace dfsfm

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dfsfm/camera.hpp"
#include "dfsfm/image.hpp"
#include "dfsfm/matches.hpp"
#include "dfsfm/pose.hpp"
#include "dfsfm/scene_model.hpp"
#include "dfsfm/track_build.hpp"
#include "dfsfm/types.hpp"

namespace dfsfm {

// Band-limited random texture and low-relief surface controls.
struct TextureSpec {
  int texture_size = 768;         // texels per side of the albedo field
  int height_grid = 48;           // control-grid resolution of the relief field
  int smooth_radius = 3;          // box-blur radius (texels), applied three times
  // Peak surface height in world units. Zero gives a plane; values well above
  // ~0.1 keep the scene usefully non-planar for two-view initialization.
  double relief_amplitude = 0.3;
  double intensity_noise = 0.0;   // per-pixel Gaussian sigma added after rendering
};

// Camera rig layouts. A survey line translates near-nadir cameras across the
// surface: baselines are wide (strong pose leverage against observation
// noise) while relative rotations stay tiny, so appearance warp between
// views is nearly pure translation and template correlation localizes
// reliably. An orbit arc looks at the origin from a ring: every view shares
// every point, but baseline and rotation are coupled, and grid correlation
// degrades once views separate by more than ~20 degrees.
enum class CameraPath { kSurvey, kOrbit };

// Desk-scale multi-view scene: cameras over a textured low-relief surface
// patch around the origin.
struct SyntheticSceneSpec {
  std::uint64_t seed = 1;
  int n_cameras = 10;
  int n_points = 500;
  int width = 640;
  int height = 480;
  double focal = 600.0;
  CameraPath camera_path = CameraPath::kSurvey;
  double orbit_radius = 3.5;  // camera distance (orbit) / altitude (survey)
  // Orbit only: total azimuth span of the camera arc (see CameraPath).
  double orbit_spread_deg = 24.0;
  double elevation_deg = 55.0;  // orbit only: height angle above the plane
  // Survey only: total x-extent of the camera line and the lateral zigzag
  // amplitude. The zigzag keeps camera centers non-collinear, so similarity
  // alignment on centers stays well-posed.
  double survey_span = 3.0;
  double survey_zigzag = 0.25;
  double domain_half_extent = 2.0; // surface patch is [-d, d]^2 in x/y
  double point_half_extent = 1.2;  // 3D points sampled from [-e, e]^2
  TextureSpec texture;
};

struct SyntheticScene {
  SyntheticSceneSpec spec;
  std::map<ImageId, CameraIntrinsics> cameras;
  std::map<ImageId, std::string> image_names;
  std::map<ImageId, Pose> poses;   // ground-truth world-to-camera
  std::map<ImageId, Image> images; // rendered intensity buffers
  std::map<ImageId, DepthMap> depths;
  std::vector<Eigen::Vector3d> points;
  // correspondences[i]: exact subpixel projections of points[i], one per
  // visible view, ascending image id; every point has >= 2 entries.
  std::vector<std::vector<Observation2D>> correspondences;
};

// Deterministic for a fixed spec (bit-identical buffers). Throws
// std::invalid_argument on non-positive sizes or n_cameras < 2, and
// std::runtime_error if it cannot place the requested number of points
// visible in at least two views.
SyntheticScene GenerateSyntheticScene(const SyntheticSceneSpec& spec);

// Pairwise matches read off the correspondence tables. Every image pair
// sharing at least `min_shared` points emits one pair; coordinates receive
// seeded Gaussian noise of sigma `noise_px`, drawn once per (point, image) so
// a keypoint keeps one location across every pair that sees it — the way a
// matcher anchored to each image's own feature grid behaves. Per-pair
// independent draws would make the same keypoint straddle quantization cells
// across pairs and the track builder's conflict policy would then discard
// nearly every component.
MatchSet SynthesizeMatches(const SyntheticScene& scene, std::uint64_t seed, double noise_px,
                           std::size_t min_shared = 8);

// Ground-truth tracks: grid points of a randomly selected reference view are
// carried into every other view via depth map, pose, and intrinsics. A query
// observation is kept only when the relative depth error e_d < 0.005 and the
// cycle projection error e_c < 1 px; tracks need >= 2 observations.
std::vector<CoarseTrack> MakeGtTracks(const SyntheticScene& scene, int grid_step,
                                      std::uint64_t seed);

// The scene's ground truth as a reconstruction: poses, points, and one track
// per point built from the correspondence table.
SceneModel ToSceneModel(const SyntheticScene& scene);

// Dataset directory for the end-to-end pipeline: images/<name>.pgm, a
// matches.txt, and gt/ holding the ground-truth COLMAP-text model plus
// per-view depth maps under gt/depth/.
void WriteSyntheticDataset(const SyntheticScene& scene, const MatchSet& matches,
                           const std::string& dir);

}  // namespace dfsfm

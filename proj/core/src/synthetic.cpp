#include "dfsfm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <stdexcept>

#include "dfsfm/colmap_io.hpp"
#include "dfsfm/parallel.hpp"
#include "dfsfm/projection.hpp"

namespace dfsfm {
namespace {

constexpr double kDegToRad = M_PI / 180.0;

// Three box-blur passes approximate a Gaussian while staying exactly
// reproducible across platforms (pure float sums in fixed order).
Image BoxBlur(const Image& in, int radius) {
  if (radius <= 0) return in;
  const int w = in.Width();
  const int h = in.Height();
  const double inv = 1.0 / (2 * radius + 1);
  Image tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        sum += in.At(std::clamp(x + k, 0, w - 1), y);
      }
      tmp.At(x, y) = static_cast<float>(sum * inv);
    }
  }
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        sum += tmp.At(x, std::clamp(y + k, 0, h - 1));
      }
      out.At(x, y) = static_cast<float>(sum * inv);
    }
  }
  return out;
}

// White noise, band-limited by repeated box blurs, then affinely mapped to
// [lo, hi] so texture contrast is independent of the blur settings.
Image SmoothNoise(int width, int height, int radius, std::mt19937_64& rng, float lo, float hi) {
  Image img(width, height);
  std::uniform_real_distribution<float> dist(0.0f, 1.0f);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) img.At(x, y) = dist(rng);
  }
  for (int pass = 0; pass < 3; ++pass) img = BoxBlur(img, radius);

  float mn = img.Data().front();
  float mx = mn;
  for (const float v : img.Data()) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  const float scale = (mx > mn) ? (hi - lo) / (mx - mn) : 0.0f;
  for (float& v : img.Data()) v = lo + (v - mn) * scale;
  return img;
}

// World-to-camera rotation for a camera at `center` looking at `target`,
// x-axis kept horizontal (world z is up).
Eigen::Matrix3d LookAt(const Eigen::Vector3d& center, const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - center).normalized();
  Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ());
  if (right.norm() < 1e-9) right = Eigen::Vector3d::UnitX();  // looking straight down
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right).normalized();
  Eigen::Matrix3d R;
  R.row(0) = right;
  R.row(1) = down;
  R.row(2) = forward;
  return R;
}

// The scene surface: z = amplitude * field(x, y), with the relief field
// stretched over [-domain, domain]^2 and border-clamped outside.
struct Surface {
  const Image* field = nullptr;
  double amplitude = 0.0;
  double domain = 1.0;

  double HeightAt(double x, double y) const {
    const double u = (x + domain) / (2.0 * domain) * (field->Width() - 1);
    const double v = (y + domain) / (2.0 * domain) * (field->Height() - 1);
    return amplitude * (2.0 * field->Bilinear(u, v) - 1.0);
  }
};

}  // namespace

SyntheticScene GenerateSyntheticScene(const SyntheticSceneSpec& spec) {
  if (spec.n_cameras < 2) throw std::invalid_argument("synthetic scene needs >= 2 cameras");
  if (spec.width <= 0 || spec.height <= 0 || spec.n_points <= 0 ||
      spec.texture.texture_size <= 1 || spec.texture.height_grid <= 1) {
    throw std::invalid_argument("synthetic scene sizes must be positive");
  }

  SyntheticScene scene;
  scene.spec = spec;
  std::mt19937_64 rng(spec.seed);

  // Two-octave albedo: the broad blobs give coarse matching unambiguous
  // structure, the fine grain decorrelates neighboring pixels so sub-pixel
  // localization is well conditioned in every direction instead of sliding
  // along blob contours.
  Image albedo = SmoothNoise(spec.texture.texture_size, spec.texture.texture_size,
                             spec.texture.smooth_radius, rng, 0.0f, 1.0f);
  {
    const Image fine = SmoothNoise(spec.texture.texture_size, spec.texture.texture_size,
                                   /*radius=*/1, rng, 0.0f, 1.0f);
    float mn = 1e9f, mx = -1e9f;
    for (std::size_t i = 0; i < albedo.Data().size(); ++i) {
      const float v = 0.65f * albedo.Data()[i] + 0.35f * fine.Data()[i];
      albedo.Data()[i] = v;
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    const float scale = (mx > mn) ? 0.8f / (mx - mn) : 0.0f;
    for (float& v : albedo.Data()) v = 0.1f + (v - mn) * scale;
  }
  const Image relief = SmoothNoise(spec.texture.height_grid, spec.texture.height_grid,
                                   /*radius=*/2, rng, 0.0f, 1.0f);
  Surface surface{&relief, spec.texture.relief_amplitude, spec.domain_half_extent};

  // Cameras on a jittered arc, all looking near the origin.
  CameraIntrinsics intr;
  intr.fx = intr.fy = spec.focal;
  intr.cx = 0.5 * (spec.width - 1);
  intr.cy = 0.5 * (spec.height - 1);
  intr.k1 = 0.0;
  intr.width = static_cast<std::uint32_t>(spec.width);
  intr.height = static_cast<std::uint32_t>(spec.height);

  std::normal_distribution<double> jitter(0.0, 1.0);
  const double elev = spec.elevation_deg * kDegToRad;
  for (int i = 0; i < spec.n_cameras; ++i) {
    const ImageId id = static_cast<ImageId>(i);
    Eigen::Vector3d center;
    Eigen::Vector3d target;
    if (spec.camera_path == CameraPath::kSurvey) {
      const double x = (spec.n_cameras > 1)
                           ? -0.5 * spec.survey_span + spec.survey_span * i / (spec.n_cameras - 1)
                           : 0.0;
      const double y = (i % 2 == 0 ? 1.0 : -1.0) * spec.survey_zigzag;
      center = {x, y, spec.orbit_radius};
      center += Eigen::Vector3d(0.03 * jitter(rng), 0.03 * jitter(rng), 0.05 * jitter(rng));
      // Each camera looks at the surface below itself (slightly roamed), so
      // relative rotations across the rig stay within a few degrees.
      target = {center.x() + 0.05 * jitter(rng), center.y() + 0.05 * jitter(rng), 0.0};
    } else {
      const double span = spec.orbit_spread_deg * kDegToRad;
      const double theta =
          (spec.n_cameras > 1) ? -0.5 * span + span * i / (spec.n_cameras - 1) : 0.0;
      center = {spec.orbit_radius * std::cos(elev) * std::sin(theta),
                -spec.orbit_radius * std::cos(elev) * std::cos(theta),
                spec.orbit_radius * std::sin(elev)};
      center += 0.01 * spec.orbit_radius * Eigen::Vector3d(jitter(rng), jitter(rng), jitter(rng));
      target = {0.02 * jitter(rng), 0.02 * jitter(rng), 0.0};
    }

    Pose pose;
    if (spec.camera_path == CameraPath::kSurvey) {
      // Near-nadir views leave LookAt's horizon rule ill-conditioned (the
      // jittered tilt would pick an arbitrary roll per camera), so align the
      // image x-axis with world x explicitly.
      const Eigen::Vector3d forward = (target - center).normalized();
      const Eigen::Vector3d right =
          (Eigen::Vector3d::UnitX() - forward * forward.x()).normalized();
      pose.R.row(0) = right;
      pose.R.row(1) = forward.cross(right);
      pose.R.row(2) = forward;
    } else {
      pose.R = LookAt(center, target);
    }
    pose.t = -pose.R * center;

    scene.cameras[id] = intr;
    scene.poses[id] = pose;
    char name[32];
    std::snprintf(name, sizeof(name), "view_%03d.pgm", i);
    scene.image_names[id] = name;
  }

  // Render by casting a ray per pixel and intersecting the height field with
  // a fixed-point iteration (the relief is shallow, so it converges fast).
  for (const auto& [id, pose] : scene.poses) {
    Image img(spec.width, spec.height);
    DepthMap depth;
    depth.width = spec.width;
    depth.height = spec.height;
    depth.data.assign(static_cast<std::size_t>(spec.width) * spec.height, 0.0f);

    const Eigen::Vector3d center = pose.Center();
    const Eigen::Matrix3d R_cw = pose.R.transpose();
    ParallelFor(0, spec.height, [&](int y) {
      for (int x = 0; x < spec.width; ++x) {
        const Eigen::Vector2d n = intr.PixelToIdeal({static_cast<double>(x), static_cast<double>(y)});
        const Eigen::Vector3d dir_cam = Eigen::Vector3d(n.x(), n.y(), 1.0).normalized();
        const Eigen::Vector3d dir = R_cw * dir_cam;
        if (dir.z() > -1e-6) continue;  // ray misses the surface plane
        double t = -center.z() / dir.z();
        for (int it = 0; it < 16; ++it) {
          const Eigen::Vector3d p = center + t * dir;
          t = (surface.HeightAt(p.x(), p.y()) - center.z()) / dir.z();
        }
        const Eigen::Vector3d p = center + t * dir;
        const double u = (p.x() + spec.domain_half_extent) / (2.0 * spec.domain_half_extent) *
                         (albedo.Width() - 1);
        const double v = (p.y() + spec.domain_half_extent) / (2.0 * spec.domain_half_extent) *
                         (albedo.Height() - 1);
        img.At(x, y) = albedo.Bilinear(u, v);
        depth.At(x, y) = static_cast<float>(t * dir_cam.z());
      }
    });

    if (spec.texture.intensity_noise > 0.0) {
      std::normal_distribution<double> noise(0.0, spec.texture.intensity_noise);
      for (float& v : img.Data()) {
        v = static_cast<float>(std::clamp(static_cast<double>(v) + noise(rng), 0.0, 1.0));
      }
    }
    scene.images.emplace(id, std::move(img));
    scene.depths.emplace(id, std::move(depth));
  }

  // Ground-truth points on the surface, each visible (in bounds, unoccluded)
  // in at least two views. The margin keeps room for patch extraction and
  // quantization shifts around every projection.
  constexpr double kVisibilityMarginPx = 16.0;
  std::uniform_real_distribution<double> coord(-spec.point_half_extent, spec.point_half_extent);
  const long max_attempts = 200L * spec.n_points;
  long attempts = 0;
  while (static_cast<int>(scene.points.size()) < spec.n_points) {
    if (++attempts > max_attempts) {
      throw std::runtime_error("synthetic scene: could not place enough visible points");
    }
    const double x = coord(rng);
    const double y = coord(rng);
    const Eigen::Vector3d point(x, y, surface.HeightAt(x, y));

    std::vector<Observation2D> obs;
    for (const auto& [id, pose] : scene.poses) {
      const auto px = ProjectPoint(pose, scene.cameras.at(id), point);
      if (!px.has_value()) continue;
      if (px->x() < kVisibilityMarginPx || px->y() < kVisibilityMarginPx ||
          px->x() > spec.width - 1 - kVisibilityMarginPx ||
          px->y() > spec.height - 1 - kVisibilityMarginPx) {
        continue;
      }
      const double depth_proj = PointDepth(pose, point);
      const float depth_map = scene.depths.at(id).Bilinear(px->x(), px->y());
      if (depth_map <= 0.0f) continue;
      if (std::abs(depth_map - depth_proj) / depth_map >= 0.005) continue;  // occluded
      Observation2D o;
      o.image_id = id;
      o.xy = *px;
      o.confidence = 1.0;
      obs.push_back(o);
    }
    if (obs.size() < 2) continue;
    scene.points.push_back(point);
    scene.correspondences.push_back(std::move(obs));
  }
  return scene;
}

MatchSet SynthesizeMatches(const SyntheticScene& scene, std::uint64_t seed, double noise_px,
                           std::size_t min_shared) {
  MatchSet set;
  for (const auto& [id, name] : scene.image_names) set.AddImage(name);

  // One noise draw per (point, image): each keypoint has a single perturbed
  // location reused by every pair, mirroring a matcher whose coordinates come
  // from the image's own feature grid.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_px > 0.0 ? noise_px : 1.0);
  std::vector<std::map<ImageId, Eigen::Vector2d>> noisy(scene.correspondences.size());
  for (std::size_t k = 0; k < scene.correspondences.size(); ++k) {
    for (const Observation2D& o : scene.correspondences[k]) {
      Eigen::Vector2d xy = o.xy;
      if (noise_px > 0.0) xy += Eigen::Vector2d(noise(rng), noise(rng));
      noisy[k].emplace(o.image_id, xy);
    }
  }

  std::vector<ImageId> ids;
  for (const auto& [id, name] : scene.image_names) ids.push_back(id);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      RawMatchPair pair;
      pair.image_a = ids[i];
      pair.image_b = ids[j];
      for (const auto& track : noisy) {
        const auto in_a = track.find(ids[i]);
        const auto in_b = track.find(ids[j]);
        if (in_a == track.end() || in_b == track.end()) continue;
        Match m;
        m.a = in_a->second;
        m.b = in_b->second;
        m.confidence = 1.0;
        pair.matches.push_back(m);
      }
      if (pair.matches.size() >= min_shared) set.pairs.push_back(std::move(pair));
    }
  }
  return set;
}

std::vector<CoarseTrack> MakeGtTracks(const SyntheticScene& scene, int grid_step,
                                      std::uint64_t seed) {
  if (grid_step <= 0) throw std::invalid_argument("grid step must be positive");

  std::vector<ImageId> ids;
  for (const auto& [id, pose] : scene.poses) ids.push_back(id);
  std::mt19937_64 rng(seed);
  const ImageId ref_id = ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)];

  const Pose& ref_pose = scene.poses.at(ref_id);
  const CameraIntrinsics& ref_cam = scene.cameras.at(ref_id);
  const DepthMap& ref_depth = scene.depths.at(ref_id);

  std::vector<CoarseTrack> tracks;
  for (int gy = grid_step / 2; gy < scene.spec.height; gy += grid_step) {
    for (int gx = grid_step / 2; gx < scene.spec.width; gx += grid_step) {
      const Eigen::Vector2d x_r(gx, gy);
      const double d_r = ref_depth.At(gx, gy);
      if (d_r <= 0.0) continue;

      // Reference pixel -> world point via the reference depth map.
      const Eigen::Vector3d p_world = UnprojectPixel(ref_pose, ref_cam, x_r, d_r);

      CoarseTrack track;
      Observation2D ref_obs;
      ref_obs.image_id = ref_id;
      ref_obs.xy = x_r;
      ref_obs.confidence = 1.0;
      track.observations.push_back(ref_obs);

      for (const ImageId q : ids) {
        if (q == ref_id) continue;
        const Pose& q_pose = scene.poses.at(q);
        const CameraIntrinsics& q_cam = scene.cameras.at(q);
        const DepthMap& q_depth = scene.depths.at(q);

        const auto x_proj = ProjectPoint(q_pose, q_cam, p_world);
        if (!x_proj.has_value() || !q_cam.InBounds(*x_proj)) continue;
        const double d_proj = PointDepth(q_pose, p_world);
        const double d_q = q_depth.Bilinear(x_proj->x(), x_proj->y());
        if (d_q <= 0.0) continue;

        // Relative depth error: filters occlusions and bad depth samples.
        const double e_d = std::abs(d_q - d_proj) / d_q;
        if (e_d >= 0.005) continue;

        // Cycle projection: back through the query depth into the reference.
        const Eigen::Vector3d p_back_world = UnprojectPixel(q_pose, q_cam, *x_proj, d_q);
        const auto x_back = ProjectPoint(ref_pose, ref_cam, p_back_world);
        if (!x_back.has_value()) continue;
        const double e_c = (x_r - *x_back).norm();
        if (e_c >= 1.0) continue;

        Observation2D o;
        o.image_id = q;
        o.xy = *x_proj;
        o.confidence = 1.0;
        track.observations.push_back(o);
      }

      if (track.observations.size() < 2) continue;
      std::sort(track.observations.begin(), track.observations.end(),
                [](const Observation2D& a, const Observation2D& b) {
                  return a.image_id < b.image_id;
                });
      tracks.push_back(std::move(track));
    }
  }
  return tracks;
}

SceneModel ToSceneModel(const SyntheticScene& scene) {
  SceneModel model;
  model.cameras = scene.cameras;
  model.image_names = scene.image_names;
  model.poses = scene.poses;
  for (const auto& [id, pose] : scene.poses) model.registration_order.push_back(id);
  for (std::size_t i = 0; i < scene.points.size(); ++i) {
    CoarseTrack track;
    track.observations = scene.correspondences[i];
    const TrackId track_id = model.AddTrack(std::move(track));
    Point3D point;
    point.xyz = scene.points[i];
    point.track_id = track_id;
    model.points[track_id] = point;
  }
  return model;
}

void WriteSyntheticDataset(const SyntheticScene& scene, const MatchSet& matches,
                           const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root / "images");
  fs::create_directories(root / "gt" / "depth");

  for (const auto& [id, image] : scene.images) {
    WritePgm(image, (root / "images" / scene.image_names.at(id)).string());
  }
  for (const auto& [id, depth] : scene.depths) {
    fs::path name(scene.image_names.at(id));
    name.replace_extension(".dmap");
    WriteDepthMap(depth, (root / "gt" / "depth" / name).string());
  }
  WriteMatchFile(matches, (root / "matches.txt").string());
  WriteColmapModel(ToSceneModel(scene), (root / "gt").string());
}

}  // namespace dfsfm

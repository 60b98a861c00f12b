#include "dfsfm/colmap_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <Eigen/Geometry>

#include "dfsfm/projection.hpp"

namespace dfsfm {
namespace {

// COLMAP ids are conventionally 1-based; ours are 0-based.
constexpr std::int64_t kIdOffset = 1;
constexpr std::int64_t kNoPoint3D = -1;

std::string FormatDouble(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", v);
  return buf;
}

std::ofstream OpenForWrite(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::vector<std::string> ReadAllLines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

bool IsComment(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t");
  return pos != std::string::npos && line[pos] == '#';
}

bool IsBlank(const std::string& line) {
  return line.find_first_not_of(" \t") == std::string::npos;
}

[[noreturn]] void ParseError(const std::filesystem::path& path, std::size_t line_no,
                             const std::string& message) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line_no + 1) + ": " + message);
}

// Sign-canonical unit quaternion (w >= 0; ties broken on x, y, z) so the
// written text is a pure function of the rotation.
Eigen::Quaterniond CanonicalQuaternion(const Eigen::Matrix3d& R) {
  Eigen::Quaterniond q(R);
  q.normalize();
  const double c[4] = {q.w(), q.x(), q.y(), q.z()};
  for (double v : c) {
    if (v > 0.0) break;
    if (v < 0.0) {
      q.coeffs() = -q.coeffs();
      break;
    }
  }
  return q;
}

struct ImagePoint {
  Eigen::Vector2d xy;
  std::int64_t point3d_id = kNoPoint3D;
};

}  // namespace

void WriteColmapModel(const SceneModel& model, const std::string& dir) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);

  // Per-image 2D point lists and, per track, the (image, index) pairs that
  // the points3D TRACK column references. Only registered images can appear
  // in images.txt, so observations of unregistered views are not exported.
  std::map<ImageId, std::vector<ImagePoint>> per_image;
  std::map<TrackId, std::vector<std::pair<ImageId, std::size_t>>> track_entries;
  for (const auto& [image_id, pose] : model.poses) per_image[image_id];
  for (const auto& [track_id, track] : model.tracks) {
    const bool has_point = model.points.count(track_id) > 0;
    for (const Observation2D& obs : track.observations) {
      const auto slot = per_image.find(obs.image_id);
      if (slot == per_image.end()) continue;
      ImagePoint ip;
      ip.xy = obs.xy;
      ip.point3d_id = has_point ? static_cast<std::int64_t>(track_id) + kIdOffset : kNoPoint3D;
      if (has_point) track_entries[track_id].emplace_back(obs.image_id, slot->second.size());
      slot->second.push_back(ip);
    }
  }
  for (const Observation2D& obs : model.unassigned) {
    const auto slot = per_image.find(obs.image_id);
    if (slot == per_image.end()) continue;
    slot->second.push_back({obs.xy, kNoPoint3D});
  }

  {
    std::ofstream out = OpenForWrite(root / "cameras.txt");
    out << "# Camera list with one line of data per camera:\n"
        << "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n";
    for (const auto& [image_id, cam] : model.cameras) {
      out << (static_cast<std::int64_t>(image_id) + kIdOffset);
      if (cam.k1 == 0.0) {
        out << " PINHOLE " << cam.width << ' ' << cam.height << ' ' << FormatDouble(cam.fx) << ' '
            << FormatDouble(cam.fy) << ' ' << FormatDouble(cam.cx) << ' ' << FormatDouble(cam.cy);
      } else {
        out << " OPENCV " << cam.width << ' ' << cam.height << ' ' << FormatDouble(cam.fx) << ' '
            << FormatDouble(cam.fy) << ' ' << FormatDouble(cam.cx) << ' ' << FormatDouble(cam.cy)
            << ' ' << FormatDouble(cam.k1) << " 0.000000000 0.000000000 0.000000000";
      }
      out << '\n';
    }
  }

  {
    std::ofstream out = OpenForWrite(root / "images.txt");
    out << "# Image list with two lines of data per image:\n"
        << "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n"
        << "#   POINTS2D[] as (X, Y, POINT3D_ID)\n";
    for (const auto& [image_id, pose] : model.poses) {
      const Eigen::Quaterniond q = CanonicalQuaternion(pose.R);
      const auto name_it = model.image_names.find(image_id);
      out << (static_cast<std::int64_t>(image_id) + kIdOffset) << ' ' << FormatDouble(q.w()) << ' '
          << FormatDouble(q.x()) << ' ' << FormatDouble(q.y()) << ' ' << FormatDouble(q.z()) << ' '
          << FormatDouble(pose.t.x()) << ' ' << FormatDouble(pose.t.y()) << ' '
          << FormatDouble(pose.t.z()) << ' ' << (static_cast<std::int64_t>(image_id) + kIdOffset)
          << ' '
          << (name_it != model.image_names.end() ? name_it->second
                                                 : "image_" + std::to_string(image_id))
          << '\n';
      const std::vector<ImagePoint>& pts = per_image.at(image_id);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (i > 0) out << ' ';
        out << FormatDouble(pts[i].xy.x()) << ' ' << FormatDouble(pts[i].xy.y()) << ' '
            << pts[i].point3d_id;
      }
      out << '\n';
    }
  }

  {
    std::ofstream out = OpenForWrite(root / "points3D.txt");
    out << "# 3D point list with one line of data per point:\n"
        << "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n";
    for (const auto& [track_id, point] : model.points) {
      double error_sum = 0.0;
      int error_count = 0;
      const auto track_it = model.tracks.find(track_id);
      if (track_it != model.tracks.end()) {
        for (const Observation2D& obs : track_it->second.observations) {
          if (!model.IsRegistered(obs.image_id)) continue;
          const double e = ReprojectionError(model.poses.at(obs.image_id),
                                             model.cameras.at(obs.image_id), point.xyz, obs.xy);
          if (std::isfinite(e)) {
            error_sum += e;
            ++error_count;
          }
        }
      }
      const double error = error_count > 0 ? error_sum / error_count : -1.0;

      const int r = point.has_color ? point.color[0] : 128;
      const int g = point.has_color ? point.color[1] : 128;
      const int b = point.has_color ? point.color[2] : 128;
      out << (static_cast<std::int64_t>(track_id) + kIdOffset) << ' '
          << FormatDouble(point.xyz.x()) << ' ' << FormatDouble(point.xyz.y()) << ' '
          << FormatDouble(point.xyz.z()) << ' ' << r << ' ' << g << ' ' << b << ' '
          << FormatDouble(error);
      const auto entries = track_entries.find(track_id);
      if (entries != track_entries.end()) {
        for (const auto& [image_id, idx] : entries->second) {
          out << ' ' << (static_cast<std::int64_t>(image_id) + kIdOffset) << ' ' << idx;
        }
      }
      out << '\n';
    }
  }
}

SceneModel ReadColmapModel(const std::string& dir) {
  const std::filesystem::path root(dir);
  SceneModel model;

  std::map<std::int64_t, CameraIntrinsics> cameras_by_id;
  {
    const auto path = root / "cameras.txt";
    const std::vector<std::string> lines = ReadAllLines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (IsComment(lines[i]) || IsBlank(lines[i])) continue;
      std::istringstream ss(lines[i]);
      std::int64_t camera_id = 0;
      std::string model_name;
      CameraIntrinsics cam;
      if (!(ss >> camera_id >> model_name >> cam.width >> cam.height)) {
        ParseError(path, i, "malformed camera line");
      }
      std::vector<double> params;
      double v = 0.0;
      while (ss >> v) params.push_back(v);
      if (model_name == "SIMPLE_PINHOLE" && params.size() == 3) {
        cam.fx = cam.fy = params[0];
        cam.cx = params[1];
        cam.cy = params[2];
      } else if (model_name == "PINHOLE" && params.size() == 4) {
        cam.fx = params[0];
        cam.fy = params[1];
        cam.cx = params[2];
        cam.cy = params[3];
      } else if (model_name == "SIMPLE_RADIAL" && params.size() == 4) {
        cam.fx = cam.fy = params[0];
        cam.cx = params[1];
        cam.cy = params[2];
        cam.k1 = params[3];
      } else if (model_name == "OPENCV" && params.size() == 8) {
        cam.fx = params[0];
        cam.fy = params[1];
        cam.cx = params[2];
        cam.cy = params[3];
        cam.k1 = params[4];
        if (std::abs(params[5]) + std::abs(params[6]) + std::abs(params[7]) > 1e-12) {
          ParseError(path, i, "unsupported distortion parameters (only k1 is modeled)");
        }
      } else {
        ParseError(path, i, "unsupported camera model " + model_name);
      }
      cameras_by_id[camera_id] = cam;
    }
  }

  std::map<ImageId, std::vector<ImagePoint>> per_image;
  {
    const auto path = root / "images.txt";
    const std::vector<std::string> lines = ReadAllLines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (IsComment(lines[i]) || IsBlank(lines[i])) continue;

      std::istringstream ss(lines[i]);
      std::int64_t image_id = 0;
      std::int64_t camera_id = 0;
      double qw = 0, qx = 0, qy = 0, qz = 0, tx = 0, ty = 0, tz = 0;
      if (!(ss >> image_id >> qw >> qx >> qy >> qz >> tx >> ty >> tz >> camera_id)) {
        ParseError(path, i, "malformed image line");
      }
      std::string name;
      std::getline(ss, name);
      const auto start = name.find_first_not_of(" \t");
      name = (start == std::string::npos) ? "" : name.substr(start);

      const auto cam = cameras_by_id.find(camera_id);
      if (cam == cameras_by_id.end()) {
        ParseError(path, i, "image references unknown camera " + std::to_string(camera_id));
      }
      const ImageId id = static_cast<ImageId>(image_id - kIdOffset);
      Eigen::Quaterniond q(qw, qx, qy, qz);
      if (q.norm() < 1e-12) ParseError(path, i, "zero quaternion");
      q.normalize();
      Pose pose;
      pose.R = q.toRotationMatrix();
      pose.t = Eigen::Vector3d(tx, ty, tz);
      model.cameras[id] = cam->second;
      model.image_names[id] = name;
      model.poses[id] = pose;

      // The very next line (possibly empty) lists this image's 2D points.
      if (++i >= lines.size()) ParseError(path, i - 1, "missing POINTS2D line");
      std::istringstream ps(lines[i]);
      std::vector<ImagePoint>& pts = per_image[id];
      double x = 0, y = 0;
      std::int64_t point3d_id = 0;
      while (ps >> x >> y >> point3d_id) pts.push_back({{x, y}, point3d_id});
      if (!ps.eof()) ParseError(path, i, "malformed POINTS2D line");
    }
  }

  {
    const auto path = root / "points3D.txt";
    const std::vector<std::string> lines = ReadAllLines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (IsComment(lines[i]) || IsBlank(lines[i])) continue;
      std::istringstream ss(lines[i]);
      std::int64_t point3d_id = 0;
      double x = 0, y = 0, z = 0, error = 0;
      int r = 0, g = 0, b = 0;
      if (!(ss >> point3d_id >> x >> y >> z >> r >> g >> b >> error)) {
        ParseError(path, i, "malformed point line");
      }
      const TrackId track_id = static_cast<TrackId>(point3d_id - kIdOffset);
      Point3D point;
      point.xyz = Eigen::Vector3d(x, y, z);
      point.track_id = track_id;
      point.has_color = true;
      point.color = Eigen::Matrix<std::uint8_t, 3, 1>(static_cast<std::uint8_t>(r),
                                                      static_cast<std::uint8_t>(g),
                                                      static_cast<std::uint8_t>(b));

      CoarseTrack track;
      std::int64_t image_id = 0;
      std::int64_t idx = 0;
      while (ss >> image_id >> idx) {
        const ImageId id = static_cast<ImageId>(image_id - kIdOffset);
        const auto pts = per_image.find(id);
        if (pts == per_image.end() || idx < 0 ||
            idx >= static_cast<std::int64_t>(pts->second.size())) {
          ParseError(path, i, "track references unknown 2D point");
        }
        Observation2D obs;
        obs.image_id = id;
        obs.xy = pts->second[static_cast<std::size_t>(idx)].xy;
        obs.confidence = 1.0;
        track.observations.push_back(obs);
      }
      if (!ss.eof()) ParseError(path, i, "malformed track entries");
      std::sort(track.observations.begin(), track.observations.end(),
                [](const Observation2D& a, const Observation2D& b) {
                  return a.image_id < b.image_id;
                });
      model.points[track_id] = point;
      model.tracks[track_id] = std::move(track);
      model.next_track_id = std::max(model.next_track_id, track_id + 1);
    }
  }

  // 2D points that carry no 3D association return to the unassigned pool.
  for (const auto& [image_id, pts] : per_image) {
    for (const ImagePoint& ip : pts) {
      if (ip.point3d_id == kNoPoint3D) {
        Observation2D obs;
        obs.image_id = image_id;
        obs.xy = ip.xy;
        obs.confidence = 1.0;
        model.unassigned.push_back(obs);
      }
    }
  }

  for (const auto& [image_id, pose] : model.poses) model.registration_order.push_back(image_id);
  return model;
}

void WritePly(const SceneModel& model, const std::string& path) {
  std::ofstream out = OpenForWrite(path);
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << model.points.size() << '\n'
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  for (const auto& [track_id, point] : model.points) {
    const int r = point.has_color ? point.color[0] : 128;
    const int g = point.has_color ? point.color[1] : 128;
    const int b = point.has_color ? point.color[2] : 128;
    out << FormatDouble(point.xyz.x()) << ' ' << FormatDouble(point.xyz.y()) << ' '
        << FormatDouble(point.xyz.z()) << ' ' << r << ' ' << g << ' ' << b << '\n';
  }
}

}  // namespace dfsfm

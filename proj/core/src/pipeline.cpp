#include "dfsfm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dfsfm/colmap_io.hpp"
#include "dfsfm/eval.hpp"
#include "dfsfm/parallel.hpp"
#include "dfsfm/verify.hpp"

namespace dfsfm {
namespace {

namespace fs = std::filesystem;

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

int ParseInt(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  int parsed = 0;
  try {
    parsed = std::stoi(value, &used);
  } catch (const std::exception&) {
    used = std::string::npos;
  }
  if (used != value.size()) {
    throw std::invalid_argument("config key '" + key + "': not an integer: '" + value + "'");
  }
  return parsed;
}

double ParseDouble(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &used);
  } catch (const std::exception&) {
    used = std::string::npos;
  }
  if (used != value.size()) {
    throw std::invalid_argument("config key '" + key + "': not a number: '" + value + "'");
  }
  return parsed;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config key '" + key + "': expected true/false: '" + value + "'");
}

void RequireOdd(const std::string& key, int value, int min) {
  if (value < min || value % 2 == 0) {
    throw std::invalid_argument("config key '" + key + "': must be an odd integer >= " +
                                std::to_string(min));
  }
}

void RequirePositive(const std::string& key, double value) {
  if (!(value > 0.0)) {
    throw std::invalid_argument("config key '" + key + "': must be > 0");
  }
}

std::string FormatMetric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Stopwatch that appends "<name> took <seconds>" entries in call order.
class StageTimer {
 public:
  explicit StageTimer(std::vector<std::pair<std::string, double>>* out) : out_(out) {}

  template <typename Fn>
  auto Run(const std::string& name, const Fn& fn) {
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      Record(name, start);
    } else {
      auto result = fn();
      Record(name, start);
      return result;
    }
  }

 private:
  void Record(const std::string& name, std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    out_->emplace_back(name, elapsed.count());
  }

  std::vector<std::pair<std::string, double>>* out_;
};

}  // namespace

void ApplyConfigLine(PipelineConfig* config, const std::string& line) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("expected 'key = value', got '" + Trim(line) + "'");
  }
  const std::string key = Trim(line.substr(0, eq));
  const std::string value = Trim(line.substr(eq + 1));
  if (key.empty()) throw std::invalid_argument("empty config key");
  if (value.empty()) throw std::invalid_argument("config key '" + key + "': empty value");

  if (key == "grid_size_r") {
    const int v = ParseInt(key, value);
    if (v < 1) throw std::invalid_argument("config key 'grid_size_r': must be >= 1");
    config->grid_size_r = v;
    config->matcher.r = v;
  } else if (key == "patch_size_p") {
    const int v = ParseInt(key, value);
    RequireOdd(key, v, 3);
    config->refiner.patch_size_p = v;
  } else if (key == "ref_grid_w") {
    const int v = ParseInt(key, value);
    RequireOdd(key, v, 1);
    config->refiner.ref_grid_w = v;
  } else if (key == "epsilon_px") {
    const double v = ParseDouble(key, value);
    RequirePositive(key, v);
    config->geo.epsilon_px = v;
    config->geo.topology.completion_threshold_px = v;
    config->geo.topology.merge_threshold_px = v;
  } else if (key == "max_views") {
    const int v = ParseInt(key, value);
    if (v < 2) throw std::invalid_argument("config key 'max_views': must be >= 2");
    config->refiner.max_views = v;
  } else if (key == "ba_ta_rounds") {
    const int v = ParseInt(key, value);
    if (v < 1) throw std::invalid_argument("config key 'ba_ta_rounds': must be >= 1");
    config->geo.ba_ta_rounds = v;
  } else if (key == "refine_iterations") {
    const int v = ParseInt(key, value);
    if (v < 0) throw std::invalid_argument("config key 'refine_iterations': must be >= 0");
    config->refine_iterations = v;
  } else if (key == "ransac_threshold_px") {
    const double v = ParseDouble(key, value);
    RequirePositive(key, v);
    config->mapper.reproj_threshold_px = v;
  } else if (key == "min_tri_angle_deg") {
    const double v = ParseDouble(key, value);
    if (v < 0.0) throw std::invalid_argument("config key 'min_tri_angle_deg': must be >= 0");
    config->mapper.min_tri_angle_deg = v;
    config->geo.topology.min_tri_angle_deg = v;
  } else if (key == "intrinsics_known") {
    const bool v = ParseBool(key, value);
    config->intrinsics_known = v;
    config->mapper.intrinsics_known = v;
  } else {
    throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

void LoadConfigFile(PipelineConfig* config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string trimmed = Trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    try {
      ApplyConfigLine(config, trimmed);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void WriteMetrics(const EvalReport& report, std::ostream& out) {
  out << "num_registered = " << report.num_registered << "\n";
  out << "registration_rate = " << FormatMetric(report.registration_rate) << "\n";
  out << "num_points = " << report.num_points << "\n";
  out << "num_observations = " << report.num_observations << "\n";
  out << "mean_reproj_error_px = " << FormatMetric(report.mean_reproj_error_px) << "\n";
  for (std::size_t i = 0; i < report.pose_auc.size(); ++i) {
    out << "pose_auc_" << FormatMetric(report.auc_thresholds_deg[i]) << "deg = "
        << FormatMetric(report.pose_auc[i]) << "\n";
  }
  for (std::size_t i = 0; i < report.accuracy.size(); ++i) {
    out << "accuracy_" << FormatMetric(report.tri_thresholds[i]) << " = "
        << FormatMetric(report.accuracy[i]) << "\n";
  }
  for (std::size_t i = 0; i < report.completeness.size(); ++i) {
    out << "completeness_" << FormatMetric(report.tri_thresholds[i]) << " = "
        << FormatMetric(report.completeness[i]) << "\n";
  }
  for (const auto& [name, seconds] : report.stage_seconds) {
    out << "time_" << name << "_s = " << FormatMetric(seconds) << "\n";
  }
  for (const auto& [key, value] : report.extra) {
    out << key << " = " << FormatMetric(value) << "\n";
  }
}

void WriteMetrics(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  WriteMetrics(report, out);
}

std::vector<QuantizedMatchPair> IngestMatches(const MatchSet& matches,
                                              const std::map<ImageId, ImageExtent>& extents,
                                              const PipelineConfig& config) {
  const auto extent_of = [&extents](ImageId id) {
    const auto it = extents.find(id);
    return it == extents.end() ? ImageExtent{} : it->second;
  };

  // Pairs verify independently into per-index slots; the RANSAC seed is a
  // function of the pair identity alone, so the surviving set is the same
  // for any thread count or pair order.
  std::vector<std::optional<QuantizedMatchPair>> slots(matches.pairs.size());
  ParallelFor(0, static_cast<std::int64_t>(matches.pairs.size()), [&](std::int64_t i) {
    const RawMatchPair& raw = matches.pairs[static_cast<std::size_t>(i)];
    const QuantizedMatchPair quantized =
        QuantizeMatches(raw, config.grid_size_r, extent_of(raw.image_a), extent_of(raw.image_b));
    VerifyOptions options;
    options.ransac.threshold_px = config.mapper.reproj_threshold_px;
    options.ransac.seed = PairSeed(config.seed, raw.image_a, raw.image_b);
    options.min_inliers = config.mapper.min_registration_inliers;
    slots[static_cast<std::size_t>(i)] = VerifyPairGeometric(quantized, options);
  });

  std::vector<QuantizedMatchPair> verified;
  verified.reserve(slots.size());
  for (auto& slot : slots) {
    if (slot) verified.push_back(std::move(*slot));
  }
  return verified;
}

SceneModel BuildCoarseModel(const MatchSet& matches,
                            const std::map<ImageId, CameraIntrinsics>& cameras,
                            const PipelineConfig& config) {
  std::map<ImageId, ImageExtent> extents;
  for (const auto& [id, camera] : cameras) extents[id] = {camera.width, camera.height};

  MapperInput input;
  input.verified_pairs = IngestMatches(matches, extents, config);
  input.tracks = BuildTracks(input.verified_pairs, &input.unassigned);
  input.cameras = cameras;
  for (ImageId id = 0; id < matches.image_names.size(); ++id) {
    input.image_names[id] = matches.image_names[id];
  }

  MapperConfig mapper = config.mapper;
  mapper.seed = config.seed;
  mapper.intrinsics_known = config.intrinsics_known;
  return RunIncremental(std::move(input), mapper);
}

RefineReport RefineIteration(SceneModel& model, const std::map<ImageId, ImageBundle>& images,
                             const PipelineConfig& config, std::vector<BAReport>* ba_log) {
  RefineAllTracks(&model, images, config.refiner);

  RefineConfig geo = config.geo;
  geo.ba.refine_intrinsics = !config.intrinsics_known;
  RefineReport report = RefineGeometry(model, geo);
  if (ba_log != nullptr) {
    ba_log->insert(ba_log->end(), report.ba_reports.begin(), report.ba_reports.end());
  }
  return report;
}

namespace {

struct GroundTruth {
  std::map<ImageId, CameraIntrinsics> cameras;  // keyed by pipeline image id
  std::map<ImageId, Pose> poses;
  std::vector<Eigen::Vector3d> points;
};

// Reads the COLMAP-text ground truth and rekeys it onto the pipeline's
// image ids by matching image names, so the two models compare directly.
std::optional<GroundTruth> LoadGroundTruth(const std::string& gt_dir, const MatchSet& matches) {
  if (gt_dir.empty() || !fs::exists(fs::path(gt_dir) / "cameras.txt")) return std::nullopt;
  const SceneModel gt_model = ReadColmapModel(gt_dir);

  std::map<std::string, ImageId> gt_by_name;
  for (const auto& [id, name] : gt_model.image_names) gt_by_name[name] = id;

  GroundTruth gt;
  for (ImageId id = 0; id < matches.image_names.size(); ++id) {
    const auto it = gt_by_name.find(matches.image_names[id]);
    if (it == gt_by_name.end()) continue;
    gt.cameras[id] = gt_model.cameras.at(it->second);
    const auto pose_it = gt_model.poses.find(it->second);
    if (pose_it != gt_model.poses.end()) gt.poses[id] = pose_it->second;
  }
  for (const auto& [track_id, point] : gt_model.points) gt.points.push_back(point.xyz);
  return gt;
}

void EvaluateAgainstGroundTruth(const SceneModel& model, const GroundTruth& gt,
                                EvalReport* report) {
  report->auc_thresholds_deg = {1.0, 3.0, 5.0};
  if (model.poses.size() >= 2 && gt.poses.size() >= 2) {
    const PoseAucResult auc = EvalPoseAuc(model.poses, gt.poses, report->auc_thresholds_deg);
    report->pose_auc = auc.auc;
  }

  report->tri_thresholds = {0.005, 0.01, 0.02};
  const std::optional<Similarity> align = AlignCameraCenters(model.poses, gt.poses);
  if (align) {
    std::vector<Eigen::Vector3d> aligned;
    aligned.reserve(model.points.size());
    for (const auto& [track_id, point] : model.points) aligned.push_back(align->Apply(point.xyz));
    const TriangulationEval tri = EvalTriangulation(aligned, gt.points, report->tri_thresholds);
    report->accuracy = tri.accuracy;
    report->completeness = tri.completeness;
  }
}

}  // namespace

PipelineResult RunPipeline(const PipelineConfig& config) {
  SetThreadCount(config.threads);
  if (config.dataset_dir.empty() && config.match_file.empty()) {
    throw std::runtime_error("no dataset directory or match file configured");
  }
  const fs::path dataset(config.dataset_dir);
  const fs::path match_file =
      config.match_file.empty() ? dataset / "matches.txt" : fs::path(config.match_file);
  const fs::path image_dir =
      config.image_dir.empty() ? dataset / "images" : fs::path(config.image_dir);
  fs::path gt_dir(config.gt_dir);
  if (gt_dir.empty() && !config.dataset_dir.empty() && fs::exists(dataset / "gt")) {
    gt_dir = dataset / "gt";
  }
  if (!fs::exists(match_file)) {
    throw std::runtime_error("match file not found: " + match_file.string());
  }
  if (!fs::exists(image_dir)) {
    throw std::runtime_error("image directory not found: " + image_dir.string());
  }

  PipelineResult result;
  EvalReport& report = result.report;
  StageTimer timer(&report.stage_seconds);

  const MatchSet matches = ReadMatchFile(match_file.string());
  const std::optional<GroundTruth> gt = LoadGroundTruth(gt_dir.string(), matches);

  // Per-image intensity/gradient bundles drive the track refinement; the
  // image sizes also supply the default intrinsics when no calibration is
  // given.
  std::map<ImageId, ImageBundle> images;
  timer.Run("load_images", [&] {
    for (ImageId id = 0; id < matches.image_names.size(); ++id) {
      const fs::path path = image_dir / matches.image_names[id];
      if (!fs::exists(path)) throw std::runtime_error("image not found: " + path.string());
      images[id] = ImageBundle::From(ReadPgm(path.string()));
    }
  });

  std::map<ImageId, CameraIntrinsics> cameras;
  if (config.intrinsics_known) {
    if (!gt) {
      throw std::runtime_error("intrinsics_known requires ground-truth cameras at " +
                               (gt_dir.empty() ? (dataset / "gt").string() : gt_dir.string()));
    }
    for (ImageId id = 0; id < matches.image_names.size(); ++id) {
      const auto it = gt->cameras.find(id);
      if (it == gt->cameras.end()) {
        throw std::runtime_error("no ground-truth intrinsics for image " +
                                 matches.image_names[id]);
      }
      cameras[id] = it->second;
    }
  } else {
    for (ImageId id = 0; id < matches.image_names.size(); ++id) {
      const Image& intensity = images.at(id).intensity;
      cameras[id] = CameraIntrinsics::FromImageSize(intensity.Width(), intensity.Height());
    }
  }

  std::map<ImageId, ImageExtent> extents;
  for (const auto& [id, camera] : cameras) extents[id] = {camera.width, camera.height};

  const std::vector<QuantizedMatchPair> verified =
      timer.Run("match_ingest", [&] { return IngestMatches(matches, extents, config); });

  MapperInput input;
  input.verified_pairs = verified;
  timer.Run("track_build", [&] { input.tracks = BuildTracks(verified, &input.unassigned); });
  input.cameras = cameras;
  for (ImageId id = 0; id < matches.image_names.size(); ++id) {
    input.image_names[id] = matches.image_names[id];
  }

  MapperConfig mapper = config.mapper;
  mapper.seed = config.seed;
  mapper.intrinsics_known = config.intrinsics_known;
  result.model =
      timer.Run("coarse_map", [&] { return RunIncremental(std::move(input), mapper); });
  if (config.export_coarse) result.coarse = result.model;

  report.mean_reproj_error_px = MeanReprojectionError(result.model);
  for (int iter = 1; iter <= config.refine_iterations; ++iter) {
    const std::string tag = "refine_iter_" + std::to_string(iter);
    const RefineReport refine =
        timer.Run(tag, [&] { return RefineIteration(result.model, images, config, &result.ba_log); });
    // The headline error is measured before reproject_keypoints rewrites the
    // observations onto the projections (which would zero it by definition).
    report.mean_reproj_error_px = refine.mean_reproj_error_px;
    int completed = 0;
    int merged = 0;
    int filtered = 0;
    for (const RefineRound& round : refine.rounds) {
      completed += round.completed_observations;
      merged += round.merged_tracks;
      filtered += round.filtered_observations;
    }
    report.extra.emplace_back(tag + "_completed_obs", completed);
    report.extra.emplace_back(tag + "_merged_tracks", merged);
    report.extra.emplace_back(tag + "_filtered_obs", filtered);
  }
  for (std::size_t i = 0; i < result.ba_log.size(); ++i) {
    const BAReport& ba = result.ba_log[i];
    report.extra.emplace_back("ba_" + std::to_string(i + 1) + "_initial_cost", ba.initial_cost);
    report.extra.emplace_back("ba_" + std::to_string(i + 1) + "_final_cost", ba.final_cost);
  }

  report.num_registered = result.model.poses.size();
  report.registration_rate =
      matches.image_names.empty()
          ? 0.0
          : static_cast<double>(report.num_registered) / matches.image_names.size();
  report.num_points = result.model.points.size();
  report.num_observations = result.model.NumObservations();
  if (config.refine_iterations == 0) {
    report.mean_reproj_error_px = MeanReprojectionError(result.model);
  }

  if (gt) {
    timer.Run("evaluate", [&] { EvaluateAgainstGroundTruth(result.model, *gt, &report); });
  }

  if (!config.output_dir.empty()) {
    timer.Run("export", [&] {
      const fs::path out_dir(config.output_dir);
      fs::create_directories(out_dir);
      WriteColmapModel(result.model, out_dir.string());
      WritePly(result.model, (out_dir / "points.ply").string());
      if (config.export_coarse) {
        WriteColmapModel(result.coarse, (out_dir / "coarse").string());
      }
      WriteMetrics(report, (out_dir / "metrics.txt").string());
    });
  }
  return result;
}

}  // namespace dfsfm

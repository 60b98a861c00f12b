// Command-line front end for the detector-free SfM pipeline.
//
//   dfsfm match <image_dir> <out_match_file>      images -> match file
//   dfsfm map <dataset_dir> <out_model_dir>       matches -> coarse model
//   dfsfm refine <dataset_dir> <model_dir> <out>  existing model -> refined
//   dfsfm run <dataset_dir> <out_model_dir>       end-to-end
//   dfsfm eval <model_dir> <gt_dir>               model vs ground truth
//   dfsfm synth <out_dataset_dir>                 synthetic dataset
//
// Every subcommand accepts --config <file> (key = value lines), --seed,
// --threads, and --export-coarse where it applies.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dfsfm/colmap_io.hpp"
#include "dfsfm/eval.hpp"
#include "dfsfm/grid_matcher.hpp"
#include "dfsfm/parallel.hpp"
#include "dfsfm/pipeline.hpp"
#include "dfsfm/synthetic.hpp"

namespace fs = std::filesystem;
using namespace dfsfm;

namespace {

// Flags shared by every subcommand; folded into a PipelineConfig after parse.
struct CommonArgs {
  std::string config_file;
  std::uint64_t seed = 0;
  int threads = 1;
  bool export_coarse = false;
};

void AddCommonFlags(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_file, "key = value config file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args->seed, "run seed (default 0)");
  cmd->add_option("--threads", args->threads, "worker threads (default 1)");
  cmd->add_flag("--export-coarse", args->export_coarse,
                "also export the pre-refinement model under <out>/coarse");
}

PipelineConfig MakeConfig(const CommonArgs& args) {
  PipelineConfig config;
  if (!args.config_file.empty()) LoadConfigFile(&config, args.config_file);
  config.seed = args.seed;
  config.threads = args.threads;
  config.export_coarse = args.export_coarse;
  config.mapper.seed = args.seed;
  config.mapper.intrinsics_known = config.intrinsics_known;
  return config;
}

int RunMatch(const std::string& image_dir, const std::string& out_file,
             const CommonArgs& args) {
  const PipelineConfig config = MakeConfig(args);
  SetThreadCount(config.threads);

  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(image_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  if (names.size() < 2) {
    std::cerr << "need at least two .pgm images in " << image_dir << "\n";
    return 1;
  }

  MatchSet set;
  std::vector<Image> images;
  images.reserve(names.size());
  for (const std::string& name : names) {
    set.AddImage(name);
    images.push_back(ReadPgm((fs::path(image_dir) / name).string()));
  }

  std::vector<std::pair<ImageId, ImageId>> pairs;
  for (ImageId a = 0; a < names.size(); ++a) {
    for (ImageId b = a + 1; b < names.size(); ++b) pairs.emplace_back(a, b);
  }
  std::vector<RawMatchPair> results(pairs.size());
  ParallelFor(0, static_cast<std::int64_t>(pairs.size()), [&](std::int64_t i) {
    const auto [a, b] = pairs[static_cast<std::size_t>(i)];
    results[static_cast<std::size_t>(i)] =
        CoarseGridMatch(images[a], images[b], a, b, config.matcher);
  });

  std::size_t total = 0;
  for (RawMatchPair& pair : results) {
    if (pair.matches.empty()) continue;
    total += pair.matches.size();
    set.pairs.push_back(std::move(pair));
  }
  WriteMatchFile(set, out_file);
  std::cout << "matched " << names.size() << " images, " << set.pairs.size() << " pairs, "
            << total << " matches -> " << out_file << "\n";
  return 0;
}

int RunPipelineCommand(const std::string& dataset_dir, const std::string& out_dir,
                       const CommonArgs& args, int refine_iterations_override) {
  PipelineConfig config = MakeConfig(args);
  config.dataset_dir = dataset_dir;
  config.output_dir = out_dir;
  if (refine_iterations_override >= 0) config.refine_iterations = refine_iterations_override;

  const PipelineResult result = RunPipeline(config);
  WriteMetrics(result.report, std::cout);
  std::cout << "model written to " << out_dir << "\n";
  return 0;
}

int RunRefine(const std::string& dataset_dir, const std::string& model_dir,
              const std::string& out_dir, const CommonArgs& args) {
  PipelineConfig config = MakeConfig(args);
  SetThreadCount(config.threads);

  SceneModel model = ReadColmapModel(model_dir);
  const fs::path image_dir = fs::path(dataset_dir) / "images";
  std::map<ImageId, ImageBundle> images;
  for (const auto& [id, name] : model.image_names) {
    const fs::path path = image_dir / name;
    if (!fs::exists(path)) throw std::runtime_error("image not found: " + path.string());
    images[id] = ImageBundle::From(ReadPgm(path.string()));
  }

  RefineReport last;
  for (int iter = 0; iter < std::max(1, config.refine_iterations); ++iter) {
    last = RefineIteration(model, images, config);
  }
  fs::create_directories(out_dir);
  WriteColmapModel(model, out_dir);
  WritePly(model, (fs::path(out_dir) / "points.ply").string());
  std::cout << "refined model written to " << out_dir << " (mean reprojection error "
            << last.mean_reproj_error_px << " px)\n";
  return 0;
}

int RunEval(const std::string& model_dir, const std::string& gt_dir, const std::string& out_file) {
  const SceneModel model = ReadColmapModel(model_dir);
  const SceneModel gt = ReadColmapModel(gt_dir);

  // Ground-truth ids are rekeyed by image name onto the model's ids so the
  // two reconstructions can disagree on numbering.
  std::map<std::string, ImageId> by_name;
  for (const auto& [id, name] : model.image_names) by_name[name] = id;
  std::map<ImageId, Pose> gt_poses;
  for (const auto& [id, pose] : gt.poses) {
    const auto it = by_name.find(gt.image_names.at(id));
    if (it != by_name.end()) gt_poses[it->second] = pose;
  }

  EvalReport report;
  report.num_registered = model.poses.size();
  report.registration_rate =
      gt.poses.empty() ? 0.0 : static_cast<double>(model.poses.size()) / gt.poses.size();
  report.num_points = model.points.size();
  report.num_observations = model.NumObservations();
  report.mean_reproj_error_px = MeanReprojectionError(model);

  report.auc_thresholds_deg = {1.0, 3.0, 5.0};
  if (model.poses.size() >= 2 && gt_poses.size() >= 2) {
    report.pose_auc = EvalPoseAuc(model.poses, gt_poses, report.auc_thresholds_deg).auc;
  }
  report.tri_thresholds = {0.005, 0.01, 0.02};
  if (const auto align = AlignCameraCenters(model.poses, gt_poses)) {
    std::vector<Eigen::Vector3d> aligned;
    aligned.reserve(model.points.size());
    for (const auto& [track_id, point] : model.points) aligned.push_back(align->Apply(point.xyz));
    std::vector<Eigen::Vector3d> gt_points;
    gt_points.reserve(gt.points.size());
    for (const auto& [track_id, point] : gt.points) gt_points.push_back(point.xyz);
    const TriangulationEval tri = EvalTriangulation(aligned, gt_points, report.tri_thresholds);
    report.accuracy = tri.accuracy;
    report.completeness = tri.completeness;
  }

  WriteMetrics(report, std::cout);
  if (!out_file.empty()) WriteMetrics(report, out_file);
  return 0;
}

int RunSynth(const std::string& out_dir, const CommonArgs& args, int cameras, int points,
             double noise_px, double image_noise, const std::string& path_kind) {
  SyntheticSceneSpec spec;
  spec.seed = args.seed == 0 ? 1 : args.seed;  // scene generation rejects nothing; keep 1 default
  spec.n_cameras = cameras;
  spec.n_points = points;
  spec.texture.intensity_noise = image_noise;
  if (path_kind == "orbit") {
    spec.camera_path = CameraPath::kOrbit;
  } else if (path_kind != "survey") {
    std::cerr << "unknown camera path '" << path_kind << "' (expected survey or orbit)\n";
    return 1;
  }

  const SyntheticScene scene = GenerateSyntheticScene(spec);
  const MatchSet matches = SynthesizeMatches(scene, spec.seed, noise_px);
  WriteSyntheticDataset(scene, matches, out_dir);
  std::cout << "synthetic dataset with " << cameras << " cameras, " << scene.points.size()
            << " points, " << matches.pairs.size() << " match pairs -> " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detector-free structure-from-motion pipeline"};
  app.require_subcommand(1);

  CommonArgs common;

  std::string image_dir;
  std::string dataset_dir;
  std::string model_dir;
  std::string gt_dir;
  std::string out_path;
  int synth_cameras = 10;
  int synth_points = 500;
  double synth_noise_px = 0.0;
  double synth_image_noise = 0.0;
  std::string synth_path = "survey";

  CLI::App* match = app.add_subcommand("match", "match all image pairs with the built-in matcher");
  match->add_option("image_dir", image_dir, "directory of .pgm images")->required();
  match->add_option("out_file", out_path, "output match file")->required();
  AddCommonFlags(match, &common);

  CLI::App* map_cmd = app.add_subcommand("map", "coarse reconstruction from quantized matches");
  map_cmd->add_option("dataset_dir", dataset_dir, "dataset directory")->required();
  map_cmd->add_option("out_dir", out_path, "output model directory")->required();
  AddCommonFlags(map_cmd, &common);

  CLI::App* refine = app.add_subcommand("refine", "refine an existing model");
  refine->add_option("dataset_dir", dataset_dir, "dataset directory (for images/)")->required();
  refine->add_option("model_dir", model_dir, "input COLMAP-text model")->required();
  refine->add_option("out_dir", out_path, "output model directory")->required();
  AddCommonFlags(refine, &common);

  CLI::App* run = app.add_subcommand("run", "end-to-end: ingest, map, refine, export");
  run->add_option("dataset_dir", dataset_dir, "dataset directory")->required();
  run->add_option("out_dir", out_path, "output model directory")->required();
  AddCommonFlags(run, &common);

  CLI::App* eval = app.add_subcommand("eval", "compare a model against ground truth");
  eval->add_option("model_dir", model_dir, "estimated COLMAP-text model")->required();
  eval->add_option("gt_dir", gt_dir, "ground-truth COLMAP-text model")->required();
  eval->add_option("--out", out_path, "also write metrics to this file");
  AddCommonFlags(eval, &common);

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("out_dir", out_path, "output dataset directory")->required();
  synth->add_option("--cameras", synth_cameras, "number of cameras (default 10)");
  synth->add_option("--points", synth_points, "number of scene points (default 500)");
  synth->add_option("--noise-px", synth_noise_px, "Gaussian sigma on match coordinates");
  synth->add_option("--image-noise", synth_image_noise, "Gaussian sigma on pixel intensities");
  synth->add_option("--path", synth_path, "camera path: survey (default) or orbit");
  AddCommonFlags(synth, &common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (match->parsed()) return RunMatch(image_dir, out_path, common);
    if (map_cmd->parsed()) return RunPipelineCommand(dataset_dir, out_path, common, 0);
    if (refine->parsed()) return RunRefine(dataset_dir, model_dir, out_path, common);
    if (run->parsed()) return RunPipelineCommand(dataset_dir, out_path, common, -1);
    if (eval->parsed()) return RunEval(model_dir, gt_dir, out_path);
    if (synth->parsed()) return RunSynth(out_path, common, synth_cameras, synth_points,
                                         synth_noise_px, synth_image_noise, synth_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

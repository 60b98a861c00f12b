#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "dfsfm/grid_matcher.hpp"
#include "dfsfm/mapper.hpp"
#include "dfsfm/matches.hpp"
#include "dfsfm/scene_model.hpp"
#include "dfsfm/topology.hpp"
#include "dfsfm/track_refiner.hpp"

namespace dfsfm {

// Everything the end-to-end run needs: algorithm knobs for each stage plus
// the file locations it reads and writes.
struct PipelineConfig {
  int grid_size_r = 8;        // match quantization step, px
  int refine_iterations = 2;  // track-refine + geometry-refine cycles
  std::uint64_t seed = 0;
  bool intrinsics_known = true;
  int threads = 1;

  MapperConfig mapper;
  RefinerConfig refiner;
  RefineConfig geo;
  GridMatcherOptions matcher;

  // Inputs: a dataset directory with images/ and matches.txt (and gt/ with a
  // COLMAP-text ground-truth model when available). Individual paths override
  // the dataset-relative defaults.
  std::string dataset_dir;
  std::string match_file;  // default: <dataset_dir>/matches.txt
  std::string image_dir;   // default: <dataset_dir>/images
  std::string gt_dir;      // default: <dataset_dir>/gt when present

  // Outputs.
  std::string output_dir = "model";
  bool export_coarse = false;
};

// Applies one `key = value` config line / file to the nested stage configs.
// Unknown keys are rejected (std::invalid_argument). Supported keys:
// grid_size_r, patch_size_p, ref_grid_w, epsilon_px, max_views, ba_ta_rounds,
// refine_iterations, ransac_threshold_px, min_tri_angle_deg, intrinsics_known.
void ApplyConfigLine(PipelineConfig* config, const std::string& line);
void LoadConfigFile(PipelineConfig* config, const std::string& path);

struct EvalReport {
  double registration_rate = 0.0;
  double mean_reproj_error_px = 0.0;
  std::size_t num_registered = 0;
  std::size_t num_points = 0;
  std::size_t num_observations = 0;

  // Populated only when a ground-truth model is available.
  std::vector<double> auc_thresholds_deg;
  std::vector<double> pose_auc;
  std::vector<double> tri_thresholds;
  std::vector<double> accuracy;
  std::vector<double> completeness;

  std::vector<std::pair<std::string, double>> stage_seconds;  // in execution order
  std::vector<std::pair<std::string, double>> extra;          // per-round logs etc.
};

// Flat `key = value` metrics listing, one entry per line.
void WriteMetrics(const EvalReport& report, std::ostream& out);
void WriteMetrics(const EvalReport& report, const std::string& path);

struct PipelineResult {
  SceneModel model;
  SceneModel coarse;  // snapshot before refinement when export_coarse is set
  EvalReport report;
  std::vector<BAReport> ba_log;  // every BA call of every refinement iteration
};

// Match ingestion: quantize raw pairs to the r-grid (clamped to the given
// per-image extents) and verify each pair with a seeded fundamental-matrix
// RANSAC. Pairs failing verification drop out.
std::vector<QuantizedMatchPair> IngestMatches(const MatchSet& matches,
                                              const std::map<ImageId, ImageExtent>& extents,
                                              const PipelineConfig& config);

// Coarse reconstruction from a match set (quantize -> verify -> tracks ->
// incremental mapping). Throws std::runtime_error when initialization fails.
SceneModel BuildCoarseModel(const MatchSet& matches,
                            const std::map<ImageId, CameraIntrinsics>& cameras,
                            const PipelineConfig& config);

// One refinement iteration over an existing model: multi-view track
// refinement against the images, then geometric refinement.
RefineReport RefineIteration(SceneModel& model, const std::map<ImageId, ImageBundle>& images,
                             const PipelineConfig& config, std::vector<BAReport>* ba_log = nullptr);

// End-to-end run against the configured dataset: ingest matches, map, refine
// refine_iterations times, export the model directory (COLMAP text + PLY) and
// metrics. An empty output_dir skips the export. Throws std::runtime_error
// naming any missing input path.
PipelineResult RunPipeline(const PipelineConfig& config);

}  // namespace dfsfm

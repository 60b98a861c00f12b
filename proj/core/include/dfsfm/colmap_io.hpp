#pragma once

#include <string>

#include "dfsfm/scene_model.hpp"

namespace dfsfm {

// COLMAP text-model layout: cameras.txt, images.txt, points3D.txt inside
// `dir` (created if missing). Ids are written 1-based per COLMAP convention;
// unregistered images are omitted from images.txt. Numbers carry 9 decimal
// places, so a write/read cycle preserves the model to 1e-9.
void WriteColmapModel(const SceneModel& model, const std::string& dir);

// Reads a model previously written by WriteColmapModel (or by COLMAP itself,
// for the PINHOLE and OPENCV camera models). Throws std::runtime_error with
// the offending file and line on malformed input.
SceneModel ReadColmapModel(const std::string& dir);

// ASCII PLY point cloud: x y z red green blue per vertex. Points without a
// stored color export as mid-gray.
void WritePly(const SceneModel& model, const std::string& path);

}  // namespace dfsfm

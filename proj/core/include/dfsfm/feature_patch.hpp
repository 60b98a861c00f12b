#pragma once

#include <Eigen/Core>

#include "dfsfm/image.hpp"
#include "dfsfm/types.hpp"

namespace dfsfm {

/// Base channels of the hand-crafted patch descriptor: intensity plus the
/// two image-gradient components.
inline constexpr int kPatchBaseChannels = 3;
/// Side length and pixel step of the spatial context window folded into each
/// cell's feature vector. A single (intensity, gx, gy) triple is far too
/// ambiguous to rank 15x15 candidate cells by inner product, so every base
/// channel is carried at each offset of a kPatchContext x kPatchContext grid
/// (kPatchContextStep px apart) around the cell; this plays the role of the
/// context aggregation a learned feature map would provide. The extraction
/// interface is the only coupling, so a learned extractor could replace it
/// without touching the refiner.
inline constexpr int kPatchContext = 5;
inline constexpr int kPatchContextStep = 1;
inline constexpr int kPatchChannels = kPatchBaseChannels * kPatchContext * kPatchContext;

/// One cell's feature vector across all channels.
using CellFeature = Eigen::Matrix<double, kPatchChannels, 1>;

/// Grayscale image with its precomputed central-difference gradients.
struct ImageBundle {
  Image intensity;
  Image grad_x;
  Image grad_y;

  static ImageBundle From(Image image);
};

/// p x p x c local feature patch, standardized per channel to zero mean and
/// unit RMS (channels with no variance are left at zero). Data layout is
/// channel-major, row-major within a channel.
struct PatchFeature {
  int p = 0;
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  ImageId image_id = kInvalidImageId;
  std::vector<float> data;

  /// Feature vector of the cell at column ix, row iy.
  CellFeature CellVector(int ix, int iy) const {
    const std::size_t pp = static_cast<std::size_t>(p) * p;
    const std::size_t at = static_cast<std::size_t>(iy) * p + ix;
    CellFeature v;
    for (int c = 0; c < kPatchChannels; ++c) {
      v[c] = static_cast<double>(data[static_cast<std::size_t>(c) * pp + at]);
    }
    return v;
  }
};

enum class PatchStatus {
  kOk,
  kBorderExcluded,   // window leaves the image
  kLowTextureExcluded,  // total variance below threshold
};

/// Sample a p x p window (bilinear) around `center` and standardize each
/// channel. The window must lie fully inside the image.
PatchStatus ExtractPatchFeature(const ImageBundle& image, const Eigen::Vector2d& center, int p,
                                PatchFeature* out);

/// Probability heatmap over the cells of a query patch.
struct PatchHeatmap {
  int p = 0;
  Eigen::MatrixXd weights;  // (row iy, col ix), nonnegative, sums to 1
  Eigen::Vector2d expectation_cell = Eigen::Vector2d::Zero();  // (x, y) cell units
  Eigen::Vector2d expectation_px = Eigen::Vector2d::Zero();
  double variance_px2 = 0.0;  // trace of the 2x2 coordinate covariance
};

/// Expectation (x, y) in cell units and covariance trace of a normalized
/// weight grid. Throws std::invalid_argument when the weights are negative
/// or do not sum to 1 within 1e-9.
void HeatmapStats(const Eigen::MatrixXd& weights, Eigen::Vector2d* expectation_cell,
                  double* variance);

/// Correlation heatmap: score(cell) is the zero-mean normalized correlation
/// between the reference vector and the query cell vector — both are first
/// centered per base channel (removing local brightness) and rescaled to
/// unit norm (removing contrast), so the score is a pure shape match in
/// [-1, 1]; either norm ~0 scores 0. Weights = softmax(score / tau) after a
/// fixed gain on the score, statistics per HeatmapStats. The gain/tau pair
/// is calibrated so the peak dominates without collapsing onto a single
/// integer cell: an over-sharp softmax snaps expectations to the grid and
/// the quantization bias survives into the refined tracks. Cell spacing is
/// 1 px, so cell-unit variance is already px^2.
PatchHeatmap CorrelateHeatmap(const CellFeature& ref_vector, const PatchFeature& query,
                              double tau);

}  // namespace dfsfm

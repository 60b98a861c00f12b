#include "dfsfm/feature_patch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dfsfm {

ImageBundle ImageBundle::From(Image image) {
  ImageBundle bundle;
  bundle.grad_x = image.GradientX();
  bundle.grad_y = image.GradientY();
  bundle.intensity = std::move(image);
  return bundle;
}

PatchStatus ExtractPatchFeature(const ImageBundle& image, const Eigen::Vector2d& center, int p,
                                PatchFeature* out) {
  const double half = 0.5 * (p - 1);
  const Image& intensity = image.intensity;
  if (center.x() - half < 0.0 || center.y() - half < 0.0 ||
      center.x() + half > intensity.Width() - 1.0 ||
      center.y() + half > intensity.Height() - 1.0) {
    return PatchStatus::kBorderExcluded;
  }

  // Sample the base channels once on a grid padded by the context reach on
  // every side; the context channels are shifted views into it. The padding
  // may poke outside the image when the window sits exactly on the
  // border-check margin; Bilinear clamps there, which just repeats the edge.
  const int pad = (kPatchContext / 2) * kPatchContextStep;
  const int ext = p + 2 * pad;
  const Image* base[kPatchBaseChannels] = {&image.intensity, &image.grad_x, &image.grad_y};
  std::vector<float> sampled(static_cast<std::size_t>(kPatchBaseChannels) * ext * ext);
  for (int b = 0; b < kPatchBaseChannels; ++b) {
    float* dst = sampled.data() + static_cast<std::size_t>(b) * ext * ext;
    for (int iy = 0; iy < ext; ++iy) {
      for (int ix = 0; ix < ext; ++ix) {
        dst[static_cast<std::size_t>(iy) * ext + ix] =
            base[b]->Bilinear(center.x() + ix - pad - half, center.y() + iy - pad - half);
      }
    }
  }

  const std::size_t pp = static_cast<std::size_t>(p) * p;
  out->p = p;
  out->center = center;
  out->data.assign(kPatchChannels * pp, 0.0f);

  double total_variance = 0.0;
  for (int c = 0; c < kPatchChannels; ++c) {
    const int b = c / (kPatchContext * kPatchContext);
    const int dy = ((c / kPatchContext) % kPatchContext - kPatchContext / 2) * kPatchContextStep;
    const int dx = (c % kPatchContext - kPatchContext / 2) * kPatchContextStep;
    const float* src = sampled.data() + static_cast<std::size_t>(b) * ext * ext;
    float* dst = out->data.data() + static_cast<std::size_t>(c) * pp;
    double sum = 0.0;
    for (int iy = 0; iy < p; ++iy) {
      for (int ix = 0; ix < p; ++ix) {
        const float v = src[static_cast<std::size_t>(iy + pad + dy) * ext + (ix + pad + dx)];
        dst[static_cast<std::size_t>(iy) * p + ix] = v;
        sum += v;
      }
    }
    const double mean = sum / static_cast<double>(pp);
    double sq = 0.0;
    for (std::size_t i = 0; i < pp; ++i) {
      dst[i] -= static_cast<float>(mean);
      sq += static_cast<double>(dst[i]) * dst[i];
    }
    const double variance = sq / static_cast<double>(pp);
    total_variance += variance;
    if (variance > 1e-12) {
      // Unit RMS keeps every channel on the same footing in the correlation
      // scores below.
      const float inv_rms = static_cast<float>(1.0 / std::sqrt(variance));
      for (std::size_t i = 0; i < pp; ++i) dst[i] *= inv_rms;
    } else {
      for (std::size_t i = 0; i < pp; ++i) dst[i] = 0.0f;
    }
  }

  if (total_variance < 1e-8) return PatchStatus::kLowTextureExcluded;
  return PatchStatus::kOk;
}

void HeatmapStats(const Eigen::MatrixXd& weights, Eigen::Vector2d* expectation_cell,
                  double* variance) {
  const double sum = weights.sum();
  if (std::abs(sum - 1.0) > 1e-9 || weights.minCoeff() < -1e-12) {
    throw std::invalid_argument("heatmap weights must be nonnegative and sum to 1");
  }
  double ex = 0.0, ey = 0.0, ex2 = 0.0, ey2 = 0.0;
  for (int iy = 0; iy < weights.rows(); ++iy) {
    for (int ix = 0; ix < weights.cols(); ++ix) {
      const double w = weights(iy, ix);
      ex += w * ix;
      ey += w * iy;
      ex2 += w * ix * ix;
      ey2 += w * iy * iy;
    }
  }
  *expectation_cell = {ex, ey};
  *variance = std::max(0.0, ex2 - ex * ex) + std::max(0.0, ey2 - ey * ey);
}

PatchHeatmap CorrelateHeatmap(const CellFeature& ref_vector, const PatchFeature& query,
                              double tau) {
  const int p = query.p;
  PatchHeatmap heatmap;
  heatmap.p = p;
  heatmap.weights.resize(p, p);

  // Score = kScoreScale * ZNCC of the two context blocks: each cell vector
  // loses its local mean per base-channel group, then both are
  // direction-normalized. A raw inner product lets high-energy cells outbid
  // the true match whenever the keypoint sits on modest contrast, while
  // plain cosine lets flat cells win on their DC component alone; ZNCC
  // suffers neither. The scale, together with tau, sets how softly the
  // winning cells blend: too sharp locks expectations onto integer cell
  // centers (sawtooth subpixel bias), too soft smears mass across the
  // correlation ridge.
  constexpr double kScoreScale = 1.5;
  constexpr double kMinNorm = 1e-9;
  const auto zero_mean = [](CellFeature v) {
    constexpr int kGroup = kPatchContext * kPatchContext;
    for (int b = 0; b < kPatchBaseChannels; ++b) {
      auto seg = v.segment<kGroup>(b * kGroup);
      seg.array() -= seg.mean();
    }
    return v;
  };
  const CellFeature ref_z = zero_mean(ref_vector);
  const double ref_norm = ref_z.norm();
  double max_score = -std::numeric_limits<double>::infinity();
  for (int iy = 0; iy < p; ++iy) {
    for (int ix = 0; ix < p; ++ix) {
      const CellFeature cell = zero_mean(query.CellVector(ix, iy));
      const double cell_norm = cell.norm();
      const double s = (ref_norm > kMinNorm && cell_norm > kMinNorm)
                           ? kScoreScale * ref_z.dot(cell) / (ref_norm * cell_norm)
                           : 0.0;
      heatmap.weights(iy, ix) = s;
      max_score = std::max(max_score, s);
    }
  }
  // Stable softmax over scores / tau.
  double sum = 0.0;
  for (int iy = 0; iy < p; ++iy) {
    for (int ix = 0; ix < p; ++ix) {
      const double e = std::exp((heatmap.weights(iy, ix) - max_score) / tau);
      heatmap.weights(iy, ix) = e;
      sum += e;
    }
  }
  heatmap.weights /= sum;

  HeatmapStats(heatmap.weights, &heatmap.expectation_cell, &heatmap.variance_px2);
  const double half = 0.5 * (p - 1);
  heatmap.expectation_px = query.center + (heatmap.expectation_cell - Eigen::Vector2d(half, half));
  return heatmap;
}

}  // namespace dfsfm

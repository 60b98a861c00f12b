#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dfsfm {

/// Shared RANSAC tuning knobs. The iteration budget is fixed up front from
/// the confidence target and an inlier-ratio guess so that runs are
/// reproducible for a fixed seed regardless of the data.
struct RansacOptions {
  double threshold_px = 4.0;
  double confidence = 0.9999;
  double inlier_ratio_guess = 0.5;
  int min_iterations = 32;
  int max_iterations = 4096;
  std::uint64_t seed = 0;
};

/// Number of iterations needed to draw at least one all-inlier sample of size
/// `sample_size` with the given confidence, clamped to [min_iters, max_iters].
int RansacIterationCount(double confidence, double inlier_ratio, int sample_size, int min_iters,
                         int max_iters);

/// Draw `k` distinct indices from [0, n) into `out` (deterministic for a
/// given generator state).
void SampleDistinct(std::mt19937_64& rng, int k, int n, std::vector<int>& out);

}  // namespace dfsfm

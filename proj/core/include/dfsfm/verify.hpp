#pragma once

#include <optional>

#include "dfsfm/matches.hpp"
#include "dfsfm/ransac.hpp"

namespace dfsfm {

struct VerifyOptions {
  RansacOptions ransac;
  int min_inliers = 15;
};

/// Two-view geometric verification: fundamental-matrix RANSAC over the
/// quantized matches, Sampson distance in pixels. Returns the surviving
/// inlier subset, or nullopt when the pair has fewer than `min_inliers`
/// consistent matches (pair excluded from the scene graph).
std::optional<QuantizedMatchPair> VerifyPairGeometric(const QuantizedMatchPair& pair,
                                                      const VerifyOptions& options = {});

/// Deterministic per-pair RANSAC seed derived from a run-wide seed and the
/// pair's identity, so verification results do not depend on the order or
/// thread schedule in which pairs are processed.
std::uint64_t PairSeed(std::uint64_t run_seed, ImageId image_a, ImageId image_b);

}  // namespace dfsfm

#pragma once

#include "dfsfm/image.hpp"
#include "dfsfm/matches.hpp"

namespace dfsfm {

/// Classical stand-in for a semi-dense learned matcher: zero-normalized
/// cross-correlation between grid-node patches with a mutual-nearest check.
struct GridMatcherOptions {
  double r = 8.0;               // grid step in pixels
  double min_confidence = 0.6;  // NCC mapped to [0,1]: (ncc + 1) / 2
  int patch_radius_px = 8;      // correlation window half-size
  int search_radius_px = 96;    // candidate window around the source node
};

/// Match every r-grid node of image a against image b's grid nodes inside the
/// search window. A correspondence is kept when it is mutual-nearest and its
/// confidence clears min_confidence. Textureless (near-zero variance) nodes
/// never match.
RawMatchPair CoarseGridMatch(const Image& a, const Image& b, ImageId id_a, ImageId id_b,
                             const GridMatcherOptions& options = {});

}  // namespace dfsfm

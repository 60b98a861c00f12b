#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "dfsfm/types.hpp"

namespace dfsfm {

/// One pairwise correspondence in pixel coordinates.
struct Match {
  Eigen::Vector2d a = Eigen::Vector2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
  double confidence = 1.0;
};

/// Semi-dense matches between two images, subpixel positions as ingested.
struct RawMatchPair {
  ImageId image_a = kInvalidImageId;
  ImageId image_b = kInvalidImageId;
  std::vector<Match> matches;
};

/// Matches snapped to the r-pixel grid; at most one match per cell pair.
struct QuantizedMatchPair {
  ImageId image_a = kInvalidImageId;
  ImageId image_b = kInvalidImageId;
  double grid_size = 8.0;
  std::vector<Match> matches;
};

/// Pixel extent used to clamp quantized nodes back inside the image.
/// A zero extent disables clamping on that side of the pair.
struct ImageExtent {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
};

/// Snap both endpoints of every match to round(x/r)*r, clamp the nodes to the
/// in-bounds grid, and collapse duplicates within a cell pair keeping the
/// highest confidence. Input order is preserved (first occurrence wins the
/// slot), which makes the operation idempotent.
QuantizedMatchPair QuantizeMatches(const RawMatchPair& pair, double r, ImageExtent extent_a,
                                   ImageExtent extent_b);

/// A match file plus the image-name table its pairs reference.
/// Image ids index into `image_names` in file order of first appearance.
struct MatchSet {
  std::vector<std::string> image_names;
  std::vector<RawMatchPair> pairs;

  ImageId FindImage(const std::string& name) const;
  ImageId AddImage(const std::string& name);
};

/// Text match file: blocks of `PAIR <name_a> <name_b> <N>` followed by N
/// lines `x_a y_a x_b y_b conf`. Round-trips bit-exactly at 6 decimals.
MatchSet ReadMatchFile(const std::string& path);
void WriteMatchFile(const MatchSet& set, const std::string& path);

}  // namespace dfsfm

#pragma once

#include <vector>

#include "dfsfm/matches.hpp"
#include "dfsfm/types.hpp"

namespace dfsfm {

/// Multi-view feature track: at most one observation per image, length >= 2.
struct CoarseTrack {
  std::vector<Observation2D> observations;

  bool HasImage(ImageId id) const {
    for (const auto& obs : observations) {
      if (obs.image_id == id) return true;
    }
    return false;
  }
};

/// Transitive closure of verified matches over (image, grid-node) vertices.
/// Any connected component that joins two distinct nodes of the same image is
/// dropped entirely; the surviving components of size >= 2 become tracks.
/// Output is deterministic: observations sorted by image id within a track,
/// tracks sorted by their first observation.
///
/// When `leftovers` is non-null it receives the observations of dropped
/// components (conflicts and singletons), sorted by (image, x, y) — the seed
/// for the unassigned pool that topology completion later draws from.
std::vector<CoarseTrack> BuildTracks(const std::vector<QuantizedMatchPair>& pairs,
                                     std::vector<Observation2D>* leftovers = nullptr);

}  // namespace dfsfm

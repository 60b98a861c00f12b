#include "dfsfm/track_build.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace dfsfm {

namespace {

// (image, grid node) vertex; grid nodes are integral after quantization.
using NodeKey = std::tuple<ImageId, std::int64_t, std::int64_t>;

struct UnionFind {
  std::vector<int> parent;
  std::vector<int> rank;

  int Add() {
    parent.push_back(static_cast<int>(parent.size()));
    rank.push_back(0);
    return parent.back();
  }

  int Find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  }

  void Union(int a, int b) {
    a = Find(a);
    b = Find(b);
    if (a == b) return;
    if (rank[static_cast<std::size_t>(a)] < rank[static_cast<std::size_t>(b)]) std::swap(a, b);
    parent[static_cast<std::size_t>(b)] = a;
    if (rank[static_cast<std::size_t>(a)] == rank[static_cast<std::size_t>(b)])
      ++rank[static_cast<std::size_t>(a)];
  }
};

}  // namespace

std::vector<CoarseTrack> BuildTracks(const std::vector<QuantizedMatchPair>& pairs,
                                     std::vector<Observation2D>* leftovers) {
  // Ordered map keeps vertex ids (and thus everything downstream)
  // independent of hash-table iteration order.
  std::map<NodeKey, int> vertex_of;
  std::vector<NodeKey> key_of;
  std::vector<double> confidence_of;
  UnionFind uf;

  const auto intern = [&](ImageId image, const Eigen::Vector2d& xy, double conf) {
    const NodeKey key{image, std::llround(xy.x()), std::llround(xy.y())};
    const auto [it, inserted] = vertex_of.try_emplace(key, static_cast<int>(key_of.size()));
    if (inserted) {
      key_of.push_back(key);
      confidence_of.push_back(conf);
      uf.Add();
    } else {
      confidence_of[static_cast<std::size_t>(it->second)] =
          std::max(confidence_of[static_cast<std::size_t>(it->second)], conf);
    }
    return it->second;
  };

  for (const QuantizedMatchPair& pair : pairs) {
    for (const Match& m : pair.matches) {
      const int va = intern(pair.image_a, m.a, m.confidence);
      const int vb = intern(pair.image_b, m.b, m.confidence);
      uf.Union(va, vb);
    }
  }

  // Group members per component root.
  std::map<int, std::vector<int>> components;
  for (int v = 0; v < static_cast<int>(key_of.size()); ++v) {
    components[uf.Find(v)].push_back(v);
  }

  const auto make_observation = [&](int v) {
    const auto& [image, ix, iy] = key_of[static_cast<std::size_t>(v)];
    Observation2D obs;
    obs.image_id = image;
    obs.xy = Eigen::Vector2d(static_cast<double>(ix), static_cast<double>(iy));
    obs.confidence = confidence_of[static_cast<std::size_t>(v)];
    return obs;
  };

  std::vector<CoarseTrack> tracks;
  for (auto& [root, members] : components) {
    CoarseTrack track;
    track.observations.reserve(members.size());
    bool conflict = false;
    for (const int v : members) {
      const Observation2D obs = make_observation(v);
      if (track.HasImage(obs.image_id)) conflict = true;
      track.observations.push_back(obs);
    }
    if (conflict || members.size() < 2) {
      if (leftovers != nullptr) {
        leftovers->insert(leftovers->end(), track.observations.begin(),
                          track.observations.end());
      }
      continue;
    }
    std::sort(track.observations.begin(), track.observations.end(),
              [](const Observation2D& a, const Observation2D& b) { return a.image_id < b.image_id; });
    tracks.push_back(std::move(track));
  }

  if (leftovers != nullptr) {
    std::sort(leftovers->begin(), leftovers->end(),
              [](const Observation2D& a, const Observation2D& b) {
                return std::tie(a.image_id, a.xy.x(), a.xy.y()) <
                       std::tie(b.image_id, b.xy.x(), b.xy.y());
              });
  }

  std::sort(tracks.begin(), tracks.end(), [](const CoarseTrack& a, const CoarseTrack& b) {
    const auto& oa = a.observations.front();
    const auto& ob = b.observations.front();
    return std::tie(oa.image_id, oa.xy.x(), oa.xy.y()) <
           std::tie(ob.image_id, ob.xy.x(), ob.xy.y());
  });
  return tracks;
}

}  // namespace dfsfm

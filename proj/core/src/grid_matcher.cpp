#include "dfsfm/grid_matcher.hpp"

#include <cmath>
#include <vector>

#include "dfsfm/parallel.hpp"

namespace dfsfm {

namespace {

// Grid nodes with a full correlation window inside the image, row-major over
// the grid, each holding its zero-mean unit-norm patch vector (empty when the
// node is textureless).
struct NodeGrid {
  int step = 8;
  int radius = 8;
  int nx = 0, ny = 0;
  int x0 = 0, y0 = 0;  // first node with full window margin
  std::vector<std::vector<float>> patch;  // nx*ny entries

  int NodeX(int ix) const { return x0 + ix * step; }
  int NodeY(int iy) const { return y0 + iy * step; }
  int Index(int ix, int iy) const { return iy * nx + ix; }
};

NodeGrid BuildGrid(const Image& image, int step, int radius) {
  NodeGrid grid;
  grid.step = step;
  grid.radius = radius;
  // First in-margin grid node at or after `radius`.
  grid.x0 = ((radius + step - 1) / step) * step;
  grid.y0 = grid.x0;
  const int max_x = image.Width() - 1 - radius;
  const int max_y = image.Height() - 1 - radius;
  if (max_x < grid.x0 || max_y < grid.y0) return grid;
  grid.nx = (max_x - grid.x0) / step + 1;
  grid.ny = (max_y - grid.y0) / step + 1;
  grid.patch.resize(static_cast<std::size_t>(grid.nx) * grid.ny);

  const int side = 2 * radius + 1;
  const int area = side * side;
  ParallelFor(0, grid.ny, [&](std::int64_t iy) {
    for (int ix = 0; ix < grid.nx; ++ix) {
      const int cx = grid.NodeX(ix);
      const int cy = grid.NodeY(static_cast<int>(iy));
      std::vector<float> values(static_cast<std::size_t>(area));
      double sum = 0.0;
      int k = 0;
      for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
          const float v = image.At(cx + dx, cy + dy);
          values[static_cast<std::size_t>(k++)] = v;
          sum += v;
        }
      }
      const float mean = static_cast<float>(sum / area);
      double sq = 0.0;
      for (float& v : values) {
        v -= mean;
        sq += static_cast<double>(v) * v;
      }
      if (sq < 1e-10) continue;  // textureless: leave patch empty
      const float inv_norm = static_cast<float>(1.0 / std::sqrt(sq));
      for (float& v : values) v *= inv_norm;
      grid.patch[static_cast<std::size_t>(grid.Index(ix, static_cast<int>(iy)))] = std::move(values);
    }
  });
  return grid;
}

// For each source node, the best-NCC node of `dst` within the search window.
// Returns flat dst indices (-1 = no candidate) and the NCC scores.
void BestPeers(const NodeGrid& src, const NodeGrid& dst, int search_radius,
               std::vector<int>& best, std::vector<float>& score) {
  const std::size_t n = src.patch.size();
  best.assign(n, -1);
  score.assign(n, -2.0f);
  const int window = search_radius / dst.step;
  ParallelFor(0, src.ny, [&](std::int64_t sy) {
    for (int sx = 0; sx < src.nx; ++sx) {
      const auto& p = src.patch[static_cast<std::size_t>(src.Index(sx, static_cast<int>(sy)))];
      if (p.empty()) continue;
      // Nearest dst grid index to this node's pixel position.
      const int px = src.NodeX(sx);
      const int py = src.NodeY(static_cast<int>(sy));
      const int cx = (px - dst.x0 + dst.step / 2) / dst.step;
      const int cy = (py - dst.y0 + dst.step / 2) / dst.step;
      float best_ncc = -2.0f;
      int best_idx = -1;
      for (int dy = cy - window; dy <= cy + window; ++dy) {
        if (dy < 0 || dy >= dst.ny) continue;
        for (int dx = cx - window; dx <= cx + window; ++dx) {
          if (dx < 0 || dx >= dst.nx) continue;
          const auto& q = dst.patch[static_cast<std::size_t>(dst.Index(dx, dy))];
          if (q.empty()) continue;
          float ncc = 0.0f;
          for (std::size_t k = 0; k < p.size(); ++k) ncc += p[k] * q[k];
          if (ncc > best_ncc) {
            best_ncc = ncc;
            best_idx = dst.Index(dx, dy);
          }
        }
      }
      const std::size_t flat = static_cast<std::size_t>(src.Index(sx, static_cast<int>(sy)));
      best[flat] = best_idx;
      score[flat] = best_ncc;
    }
  });
}

}  // namespace

RawMatchPair CoarseGridMatch(const Image& a, const Image& b, ImageId id_a, ImageId id_b,
                             const GridMatcherOptions& options) {
  RawMatchPair out;
  out.image_a = id_a;
  out.image_b = id_b;

  const int step = static_cast<int>(options.r);
  const NodeGrid grid_a = BuildGrid(a, step, options.patch_radius_px);
  const NodeGrid grid_b = BuildGrid(b, step, options.patch_radius_px);
  if (grid_a.patch.empty() || grid_b.patch.empty()) return out;

  std::vector<int> fwd, rev;
  std::vector<float> fwd_score, rev_score;
  BestPeers(grid_a, grid_b, options.search_radius_px, fwd, fwd_score);
  BestPeers(grid_b, grid_a, options.search_radius_px, rev, rev_score);

  for (int ay = 0; ay < grid_a.ny; ++ay) {
    for (int ax = 0; ax < grid_a.nx; ++ax) {
      const int ia = grid_a.Index(ax, ay);
      const int ib = fwd[static_cast<std::size_t>(ia)];
      if (ib < 0) continue;
      if (rev[static_cast<std::size_t>(ib)] != ia) continue;  // not mutual
      const double confidence = 0.5 * (static_cast<double>(fwd_score[static_cast<std::size_t>(ia)]) + 1.0);
      if (confidence < options.min_confidence) continue;
      Match m;
      m.a = Eigen::Vector2d(grid_a.NodeX(ax), grid_a.NodeY(ay));
      m.b = Eigen::Vector2d(grid_b.NodeX(ib % grid_b.nx), grid_b.NodeY(ib / grid_b.nx));
      m.confidence = confidence;
      out.matches.push_back(m);
    }
  }
  return out;
}

}  // namespace dfsfm

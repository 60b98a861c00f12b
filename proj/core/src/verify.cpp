#include "dfsfm/verify.hpp"

#include <algorithm>

#include "dfsfm/relative_pose.hpp"

namespace dfsfm {

std::uint64_t PairSeed(std::uint64_t run_seed, ImageId image_a, ImageId image_b) {
  // splitmix64 over the combined identity; avalanche keeps nearby ids apart.
  std::uint64_t z = run_seed ^ (static_cast<std::uint64_t>(image_a) << 32 | image_b);
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::optional<QuantizedMatchPair> VerifyPairGeometric(const QuantizedMatchPair& pair,
                                                      const VerifyOptions& options) {
  const int n = static_cast<int>(pair.matches.size());
  if (n < 8 || n < options.min_inliers) return std::nullopt;

  std::vector<Eigen::Vector2d> xa(pair.matches.size()), xb(pair.matches.size());
  for (std::size_t i = 0; i < pair.matches.size(); ++i) {
    xa[i] = pair.matches[i].a;
    xb[i] = pair.matches[i].b;
  }

  const double threshold = options.ransac.threshold_px;
  const auto count_inliers = [&](const Eigen::Matrix3d& F, std::vector<char>* mask) {
    int count = 0;
    if (mask) mask->assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      if (SampsonDistance(F, xa[static_cast<std::size_t>(i)], xb[static_cast<std::size_t>(i)]) <=
          threshold) {
        ++count;
        if (mask) (*mask)[static_cast<std::size_t>(i)] = 1;
      }
    }
    return count;
  };

  const int iterations =
      RansacIterationCount(options.ransac.confidence, options.ransac.inlier_ratio_guess, 8,
                           options.ransac.min_iterations, options.ransac.max_iterations);
  std::mt19937_64 rng(options.ransac.seed);
  std::vector<int> sample;
  std::vector<Eigen::Vector2d> sa(8), sb(8);
  Eigen::Matrix3d best_F = Eigen::Matrix3d::Zero();
  int best_inliers = -1;
  for (int it = 0; it < iterations; ++it) {
    SampleDistinct(rng, 8, n, sample);
    for (int k = 0; k < 8; ++k) {
      sa[static_cast<std::size_t>(k)] = xa[static_cast<std::size_t>(sample[static_cast<std::size_t>(k)])];
      sb[static_cast<std::size_t>(k)] = xb[static_cast<std::size_t>(sample[static_cast<std::size_t>(k)])];
    }
    const Eigen::Matrix3d F = FitFundamental8Point(sa, sb);
    const int inliers = count_inliers(F, nullptr);
    if (inliers > best_inliers) {
      best_inliers = inliers;
      best_F = F;
    }
  }

  if (best_inliers < std::max(8, options.min_inliers)) return std::nullopt;

  // Refit on the consensus set; keep the refit only if it does not shrink it.
  std::vector<char> mask;
  count_inliers(best_F, &mask);
  std::vector<Eigen::Vector2d> ia, ib;
  for (int i = 0; i < n; ++i) {
    if (mask[static_cast<std::size_t>(i)]) {
      ia.push_back(xa[static_cast<std::size_t>(i)]);
      ib.push_back(xb[static_cast<std::size_t>(i)]);
    }
  }
  if (static_cast<int>(ia.size()) >= 8) {
    const Eigen::Matrix3d refit = FitFundamental8Point(ia, ib);
    if (count_inliers(refit, nullptr) >= best_inliers) {
      best_F = refit;
      best_inliers = count_inliers(best_F, &mask);
    } else {
      count_inliers(best_F, &mask);
    }
  }

  if (best_inliers < options.min_inliers) return std::nullopt;

  QuantizedMatchPair out;
  out.image_a = pair.image_a;
  out.image_b = pair.image_b;
  out.grid_size = pair.grid_size;
  out.matches.reserve(static_cast<std::size_t>(best_inliers));
  for (int i = 0; i < n; ++i) {
    if (mask[static_cast<std::size_t>(i)]) out.matches.push_back(pair.matches[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace dfsfm

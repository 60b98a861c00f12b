#include "dfsfm/ransac.hpp"

#include <algorithm>
#include <cmath>

namespace dfsfm {

int RansacIterationCount(double confidence, double inlier_ratio, int sample_size, int min_iters,
                         int max_iters) {
  inlier_ratio = std::clamp(inlier_ratio, 1e-3, 1.0);
  confidence = std::clamp(confidence, 0.0, 1.0 - 1e-12);
  const double p_good = std::pow(inlier_ratio, sample_size);
  if (p_good >= 1.0) return min_iters;
  const double denom = std::log1p(-p_good);
  if (denom >= 0.0) return max_iters;
  const double n = std::log1p(-confidence) / denom;
  if (!(n < static_cast<double>(max_iters))) return max_iters;
  return std::clamp(static_cast<int>(std::ceil(n)), min_iters, max_iters);
}

void SampleDistinct(std::mt19937_64& rng, int k, int n, std::vector<int>& out) {
  out.clear();
  // Rejection sampling; k is tiny (3 or 8) compared to n in every caller.
  while (static_cast<int>(out.size()) < k) {
    const int idx = static_cast<int>(rng() % static_cast<std::uint64_t>(n));
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
}

}  // namespace dfsfm

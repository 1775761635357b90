#pragma once

#include <algorithm>
#include <vector>

#include "mulopt/profile.hpp"
#include "mulopt/tree.hpp"

namespace mulopt {

// Column-height Wallace reduction: every stage puts floor(h/3) full adders in
// each column and one half adder where h mod 3 == 2. At least one stage runs.
inline CompressorCounts wallace(const PPProfile& profile) {
  const int cols = profile.num_columns();
  auto counts = CompressorCounts::zeros(cols);
  std::vector<int> heights = profile.counts;
  do {
    std::vector<int> next(cols, 0);
    for (int j = 0; j < cols; ++j) {
      const int full = heights[j] / 3;
      const int half = heights[j] % 3 == 2 ? 1 : 0;
      counts.f[j] += full;
      counts.h[j] += half;
      next[j] += heights[j] - 2 * full - half;
      if (j + 1 < cols) next[j + 1] += full + half;
    }
    heights = std::move(next);
  } while (*std::max_element(heights.begin(), heights.end()) > 2);
  return counts;
}

// Dadda target heights 2, 3, 4, 6, 9, 13, ... (d_{k+1} = floor(1.5 d_k)).
inline std::vector<int> dadda_targets(int max_height) {
  std::vector<int> targets{2};
  while (targets.back() < max_height) targets.push_back(targets.back() * 3 / 2);
  return targets;
}

// Classic Dadda reduction: per stage, reduce every column (plus the carries
// it receives this stage) to the next target height using as few compressors
// as possible.
inline CompressorCounts dadda(const PPProfile& profile) {
  const int cols = profile.num_columns();
  auto counts = CompressorCounts::zeros(cols);
  if (cols == 0) return counts;
  std::vector<int> heights = profile.counts;
  const int max_height = *std::max_element(heights.begin(), heights.end());
  auto targets = dadda_targets(max_height);
  for (auto it = targets.rbegin(); it != targets.rend(); ++it) {
    const int target = *it;
    if (target >= *std::max_element(heights.begin(), heights.end())) continue;
    std::vector<int> next(cols, 0);
    int carry_in = 0;
    for (int j = 0; j < cols; ++j) {
      int total = heights[j] + carry_in;
      int free_bits = heights[j];
      int full = 0, half = 0;
      while (total > target) {
        if (total - target >= 2 && free_bits >= 3) {
          ++full;
          free_bits -= 3;
          total -= 2;
        } else if (free_bits >= 2) {
          ++half;
          free_bits -= 2;
          total -= 1;
        } else {
          break;
        }
      }
      counts.f[j] += full;
      counts.h[j] += half;
      next[j] = total;
      carry_in = full + half;
    }
    heights = std::move(next);
  }
  return counts;
}

}  // namespace mulopt

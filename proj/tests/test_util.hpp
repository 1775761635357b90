#pragma once

#include <random>
#include <vector>

#include "mulopt/profile.hpp"
#include "mulopt/tree.hpp"

namespace mulopt::testutil {

// Random legal compressor counts built column by column, independent of the
// environment's action machinery: pick a residual in {1, 2}, then split the
// remaining reduction between full and half adders.
inline CompressorCounts random_legal_counts(const PPProfile& profile, std::mt19937_64& rng) {
  auto counts = CompressorCounts::zeros(profile.num_columns());
  for (int j = 0; j < profile.num_columns(); ++j) {
    const int activity = column_activity(profile, counts, j);
    if (activity == 0) continue;
    const int res = activity == 1 ? 1 : 1 + static_cast<int>(rng() % 2);
    const int reduce = activity - res;
    const int full = static_cast<int>(rng() % (reduce / 2 + 1));
    counts.f[j] = full;
    counts.h[j] = reduce - 2 * full;
  }
  return counts;
}

inline const std::vector<PpgKind>& all_ppgs() {
  static const std::vector<PpgKind> kinds{PpgKind::And, PpgKind::Booth4};
  return kinds;
}

}  // namespace mulopt::testutil

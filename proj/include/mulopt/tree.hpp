#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mulopt/error.hpp"
#include "mulopt/profile.hpp"

namespace mulopt {

// Per-column totals of 3:2 (f) and 2:2 (h) compressors.
struct CompressorCounts {
  std::vector<int> f;
  std::vector<int> h;

  static CompressorCounts zeros(int columns) {
    return {std::vector<int>(columns, 0), std::vector<int>(columns, 0)};
  }
  int num_columns() const { return static_cast<int>(f.size()); }
  int total_full() const { return std::accumulate(f.begin(), f.end(), 0); }
  int total_half() const { return std::accumulate(h.begin(), h.end(), 0); }
  int total() const { return total_full() + total_half(); }

  friend bool operator==(const CompressorCounts&, const CompressorCounts&) = default;
};

// Stage-resolved compressor placement; t32/t22 are indexed [stage][column].
struct StagedTree {
  PPProfile profile;
  int stages = 0;
  std::vector<std::vector<int>> t32;
  std::vector<std::vector<int>> t22;

  int num_columns() const { return profile.num_columns(); }

  CompressorCounts column_sums() const {
    auto sums = CompressorCounts::zeros(num_columns());
    for (int i = 0; i < stages; ++i)
      for (int j = 0; j < num_columns(); ++j) {
        sums.f[j] += t32[i][j];
        sums.h[j] += t22[i][j];
      }
    return sums;
  }

  friend bool operator==(const StagedTree&, const StagedTree&) = default;
};

inline int stage_count(const StagedTree& tree) { return tree.stages; }

// Carry bits entering column j: every compressor in column j-1 emits one.
inline int carries_into(const CompressorCounts& counts, int j) {
  return j == 0 ? 0 : counts.f[j - 1] + counts.h[j - 1];
}

inline int column_activity(const PPProfile& profile, const CompressorCounts& counts, int j) {
  return profile.counts[j] + carries_into(counts, j);
}

inline int residual(const PPProfile& profile, const CompressorCounts& counts, int j) {
  return column_activity(profile, counts, j) - 2 * counts.f[j] - counts.h[j];
}

inline std::vector<int> residuals(const PPProfile& profile, const CompressorCounts& counts) {
  if (counts.num_columns() != profile.num_columns() ||
      counts.h.size() != counts.f.size())
    throw InvalidArgument("compressor counts do not match the profile's column count");
  std::vector<int> res(profile.num_columns());
  for (int j = 0; j < profile.num_columns(); ++j) res[j] = residual(profile, counts, j);
  return res;
}

// A column is legal when it leaves one or two bits, or when it sees no bits at
// all and holds no compressors.
inline bool column_legal(const PPProfile& profile, const CompressorCounts& counts, int j) {
  if (counts.f[j] < 0 || counts.h[j] < 0) return false;
  if (column_activity(profile, counts, j) == 0) return counts.f[j] == 0 && counts.h[j] == 0;
  const int res = residual(profile, counts, j);
  return res == 1 || res == 2;
}

// First violated column with a description, or nullopt when legal.
inline std::optional<std::string> legality_violation(const PPProfile& profile,
                                                     const CompressorCounts& counts) {
  if (counts.num_columns() != profile.num_columns() || counts.h.size() != counts.f.size())
    return "expected " + std::to_string(profile.num_columns()) + " columns, got " +
           std::to_string(counts.num_columns());
  for (int j = 0; j < profile.num_columns(); ++j)
    if (!column_legal(profile, counts, j))
      return "column " + std::to_string(j) + ": f=" + std::to_string(counts.f[j]) +
             " h=" + std::to_string(counts.h[j]) +
             " residual=" + std::to_string(residual(profile, counts, j));
  return std::nullopt;
}

inline bool is_legal(const PPProfile& profile, const CompressorCounts& counts) {
  return !legality_violation(profile, counts).has_value();
}

inline constexpr int kMaxStages = 64;

// Deterministic stage assignment. Columns are processed from the LSB up; each
// column walks the stages and greedily places 3:2 compressors, then 2:2
// compressors, wherever enough bits are present.
inline StagedTree assign(const PPProfile& profile, const CompressorCounts& counts,
                         int max_stages = kMaxStages) {
  if (auto why = legality_violation(profile, counts)) throw IllegalCounts(*why);
  const int cols = profile.num_columns();
  StagedTree tree{profile, 0, {}, {}};
  auto ensure_stage = [&](int i) {
    while (static_cast<int>(tree.t32.size()) <= i) {
      tree.t32.emplace_back(cols, 0);
      tree.t22.emplace_back(cols, 0);
    }
  };
  for (int j = 0; j < cols; ++j) {
    int full_left = counts.f[j];
    int half_left = counts.h[j];
    int bits = profile.counts[j];
    for (int i = 0; full_left + half_left > 0; ++i) {
      if (i >= max_stages)
        throw AssignmentStall("column " + std::to_string(j) + " still has " +
                              std::to_string(full_left + half_left) +
                              " unplaced compressors after " + std::to_string(max_stages) +
                              " stages");
      ensure_stage(i);
      const int full = std::min(full_left, bits / 3);
      bits -= 3 * full;
      const int half = std::min(half_left, bits / 2);
      bits -= 2 * half;
      full_left -= full;
      half_left -= half;
      tree.t32[i][j] = full;
      tree.t22[i][j] = half;
      const int carry_in =
          (j > 0 && i < static_cast<int>(tree.t32.size())) ? tree.t32[i][j - 1] + tree.t22[i][j - 1] : 0;
      bits += full + half + carry_in;
      if (full + half > 0) tree.stages = std::max(tree.stages, i + 1);
    }
  }
  tree.t32.resize(tree.stages);
  tree.t22.resize(tree.stages);
  return tree;
}

// Bits present at the input of every stage, [stage][column], with one extra
// row for the tree output. Carries out of the top column are dropped.
inline std::vector<std::vector<int>> stage_heights(const StagedTree& tree) {
  const int cols = tree.num_columns();
  std::vector<std::vector<int>> heights(tree.stages + 1, std::vector<int>(cols, 0));
  heights[0] = tree.profile.counts;
  for (int i = 0; i < tree.stages; ++i)
    for (int j = 0; j < cols; ++j) {
      const int used = tree.t32[i][j] + tree.t22[i][j];
      heights[i + 1][j] += heights[i][j] - 2 * tree.t32[i][j] - tree.t22[i][j];
      if (j + 1 < cols) heights[i + 1][j + 1] += used;
    }
  return heights;
}

// Every stage places only compressors whose inputs are present.
inline bool stages_feasible(const StagedTree& tree) {
  if (static_cast<int>(tree.t32.size()) != tree.stages ||
      static_cast<int>(tree.t22.size()) != tree.stages)
    return false;
  for (int i = 0; i < tree.stages; ++i)
    if (static_cast<int>(tree.t32[i].size()) != tree.num_columns() ||
        static_cast<int>(tree.t22[i].size()) != tree.num_columns())
      return false;
  const auto heights = stage_heights(tree);
  for (int i = 0; i < tree.stages; ++i)
    for (int j = 0; j < tree.num_columns(); ++j)
      if (tree.t32[i][j] < 0 || tree.t22[i][j] < 0 ||
          3 * tree.t32[i][j] + 2 * tree.t22[i][j] > heights[i][j])
        return false;
  return true;
}

}  // namespace mulopt

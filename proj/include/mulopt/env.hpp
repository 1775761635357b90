#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mulopt/baseline.hpp"
#include "mulopt/cost.hpp"
#include "mulopt/design.hpp"
#include "mulopt/error.hpp"
#include "mulopt/tree.hpp"

namespace mulopt {

enum class ActionKind : int {
  AddHalf = 0,
  RemoveHalf = 1,
  ReplaceFullWithHalf = 2,
  ReplaceHalfWithFull = 3,
};

inline constexpr int kActionsPerColumn = 4;

inline std::string_view to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::AddHalf: return "add_half";
    case ActionKind::RemoveHalf: return "remove_half";
    case ActionKind::ReplaceFullWithHalf: return "full_to_half";
    case ActionKind::ReplaceHalfWithFull: return "half_to_full";
  }
  return "?";
}

struct Action {
  int column = 0;
  ActionKind kind = ActionKind::AddHalf;

  int flat() const { return kActionsPerColumn * column + static_cast<int>(kind); }
  static Action from_flat(int index) {
    return {index / kActionsPerColumn, static_cast<ActionKind>(index % kActionsPerColumn)};
  }
  friend bool operator==(const Action&, const Action&) = default;
};

inline int action_space_size(int columns) { return kActionsPerColumn * columns; }

struct ActionMask {
  std::vector<std::uint8_t> bits;

  std::size_t size() const { return bits.size(); }
  bool operator[](std::size_t i) const { return bits[i] != 0; }
  int count() const {
    int n = 0;
    for (auto b : bits) n += b != 0;
    return n;
  }
  std::vector<int> indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) out.push_back(static_cast<int>(i));
    return out;
  }
};

// Change in the acted column's residual for each action kind.
inline int residual_delta(ActionKind kind) {
  switch (kind) {
    case ActionKind::AddHalf:
    case ActionKind::ReplaceHalfWithFull:
      return -1;
    case ActionKind::RemoveHalf:
    case ActionKind::ReplaceFullWithHalf:
      return +1;
  }
  return 0;
}

// Structural precondition plus the acted column staying in {1, 2}.
inline bool action_locally_valid(const PPProfile& profile, const CompressorCounts& counts,
                                 Action a) {
  if (a.column < 0 || a.column >= profile.num_columns()) return false;
  const int j = a.column;
  if (column_activity(profile, counts, j) == 0) return false;
  if ((a.kind == ActionKind::RemoveHalf || a.kind == ActionKind::ReplaceHalfWithFull) &&
      counts.h[j] < 1)
    return false;
  if (a.kind == ActionKind::ReplaceFullWithHalf && counts.f[j] < 1) return false;
  const int res = residual(profile, counts, j) + residual_delta(a.kind);
  return res == 1 || res == 2;
}

// Repairs columns above `from_column` until one is already legal. Columns that
// need more than one fix are repaired repeatedly.
inline CompressorCounts legalize(const PPProfile& profile, CompressorCounts counts,
                                 int from_column) {
  for (int j = from_column + 1; j < profile.num_columns(); ++j) {
    if (column_legal(profile, counts, j)) return counts;
    for (int guard = 0; !column_legal(profile, counts, j); ++guard) {
      if (guard > 4 * (profile.counts[j] + carries_into(counts, j) + counts.f[j] + counts.h[j]) + 8)
        throw LegalizationFailure("column " + std::to_string(j) + " does not converge");
      const int res = residual(profile, counts, j);
      if (res >= 3) {
        if (counts.h[j] > 0) {
          --counts.h[j];
          ++counts.f[j];
        } else {
          ++counts.f[j];
        }
      } else if (counts.h[j] > 0) {
        --counts.h[j];
      } else if (counts.f[j] > 0) {
        --counts.f[j];
      } else {
        throw LegalizationFailure("column " + std::to_string(j) + " has residual " +
                                  std::to_string(res) + " and no compressor to delete");
      }
    }
  }
  return counts;
}

// Applies `a` and legalizes the columns above it. Throws InvalidAction when the
// action is structurally impossible or breaks its own column.
inline CompressorCounts apply_action(const PPProfile& profile, const CompressorCounts& counts,
                                     Action a) {
  if (!action_locally_valid(profile, counts, a))
    throw InvalidAction(std::string(to_string(a.kind)) + " at column " + std::to_string(a.column));
  auto next = counts;
  const int j = a.column;
  switch (a.kind) {
    case ActionKind::AddHalf: ++next.h[j]; break;
    case ActionKind::RemoveHalf: --next.h[j]; break;
    case ActionKind::ReplaceFullWithHalf: --next.f[j]; ++next.h[j]; break;
    case ActionKind::ReplaceHalfWithFull: --next.h[j]; ++next.f[j]; break;
  }
  return legalize(profile, std::move(next), j);
}

// Legal-action mask. An entry is set only when the action applies, the
// legalized result is legal and assignable, and (with a cap) the assigned tree
// has at most `stage_cap` stages.
inline ActionMask compute_mask(const PPProfile& profile, const CompressorCounts& counts,
                               std::optional<int> stage_cap = std::nullopt) {
  ActionMask mask{std::vector<std::uint8_t>(action_space_size(profile.num_columns()), 0)};
  for (int idx = 0; idx < static_cast<int>(mask.size()); ++idx) {
    const auto a = Action::from_flat(idx);
    if (!action_locally_valid(profile, counts, a)) continue;
    try {
      const auto next = apply_action(profile, counts, a);
      if (!is_legal(profile, next)) continue;
      if (stage_cap && assign(profile, next).stages > *stage_cap) continue;
      if (!stage_cap) assign(profile, next);
      mask.bits[idx] = 1;
    } catch (const LegalizationFailure&) {
    } catch (const AssignmentStall&) {
    }
  }
  return mask;
}

struct EnvState {
  PPProfile profile;
  CompressorCounts counts;
  StagedTree tree;
  CostReport cost;
  int step = 0;
};

inline int default_stage_cap(const PPProfile& profile) {
  return assign(profile, wallace(profile)).stages + 1;
}

inline ActionMask mask(const EnvState& state, std::optional<int> stage_cap = std::nullopt) {
  return compute_mask(state.profile, state.counts, stage_cap);
}

struct EnvConfig {
  RewardConfig reward;           // baseline filled in from Wallace when empty
  std::optional<int> stage_cap;  // nullopt: Wallace stages + 1; <= 0: uncapped
};

// Reset/step wrapper binding a profile, a cost backend, and reward weights.
// Immutable after construction; states are values.
class Environment {
 public:
  Environment(PPProfile profile, std::shared_ptr<CostBackend> backend, EnvConfig cfg = {},
              std::optional<CompressorCounts> initial = std::nullopt)
      : profile_(std::move(profile)), backend_(std::move(backend)), reward_(cfg.reward) {
    if (!backend_) throw InvalidArgument("environment needs a cost backend");
    const auto wallace_counts = wallace(profile_);
    wallace_stages_ = assign(profile_, wallace_counts).stages;
    if (initial) {
      if (auto why = legality_violation(profile_, *initial)) throw IllegalCounts(*why);
      initial_ = *initial;
    } else {
      initial_ = wallace_counts;
    }
    if (!cfg.stage_cap)
      stage_cap_ = wallace_stages_ + 1;
    else if (*cfg.stage_cap > 0)
      stage_cap_ = *cfg.stage_cap;
    if (reward_.baseline.scenarios.empty())
      reward_.baseline = backend_->evaluate(make_design(assign(profile_, wallace_counts)));
    reward_.validate();
    scalar_cost(reward_.baseline, reward_);  // fails fast on a zero baseline
  }

  EnvState reset() const { return make_state(initial_, 0); }

  EnvState apply(const EnvState& state, Action a) const {
    return make_state(apply_action(profile_, state.counts, a), state.step + 1);
  }

  ActionMask mask(const EnvState& state) const {
    return compute_mask(profile_, state.counts, stage_cap_);
  }

  EnvState make_state(CompressorCounts counts, int step) const {
    EnvState s{profile_, std::move(counts), {}, {}, step};
    s.tree = assign(profile_, s.counts);
    s.cost = backend_->evaluate(make_design(s.tree));
    s.cost.scalar_cost = scalar_cost(s.cost, reward_);
    return s;
  }

  const PPProfile& profile() const { return profile_; }
  const RewardConfig& reward_config() const { return reward_; }
  std::optional<int> stage_cap() const { return stage_cap_; }
  int wallace_stages() const { return wallace_stages_; }
  const CompressorCounts& initial_counts() const { return initial_; }
  CostBackend& backend() const { return *backend_; }
  int num_actions() const { return action_space_size(profile_.num_columns()); }

 private:
  PPProfile profile_;
  std::shared_ptr<CostBackend> backend_;
  RewardConfig reward_;
  CompressorCounts initial_;
  std::optional<int> stage_cap_;
  int wallace_stages_ = 0;
};

}  // namespace mulopt

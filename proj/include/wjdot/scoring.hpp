#pragma once

#include <span>

#include "wjdot/core.hpp"

namespace wjdot::scoring {

// Mass of alpha on each source group. hs + ds = 1.
struct GroupScores {
  double hs = 0.0;  // group A
  double ds = 0.0;  // group B
};

// Throws Error if any source is untagged or lengths differ.
GroupScores group_scores(const SimplexWeights& alpha, std::span<const SourceDomain> sources);
GroupScores group_scores(const SimplexWeights& alpha, std::span<const Group> groups);

enum class TieRule { kGroupA, kGroupB };

// Group B iff ds > hs; ties go to `tie` (group A by default).
Group detect_group(const GroupScores& scores, TieRule tie = TieRule::kGroupA);

// Percentage of mismatched predictions.
double command_error_rate(std::span<const std::size_t> predictions,
                          std::span<const std::size_t> references);

double average_cer(std::span<const double> cers);

}  // namespace wjdot::scoring

#include "wjdot/scoring.hpp"

#include <string>
#include <vector>

namespace wjdot::scoring {

GroupScores group_scores(const SimplexWeights& alpha, std::span<const Group> groups) {
  if (groups.size() != alpha.size())
    throw DimensionError("alpha has " + std::to_string(alpha.size()) + " entries for " +
                         std::to_string(groups.size()) + " sources");
  GroupScores s;
  for (std::size_t j = 0; j < groups.size(); ++j) {
    switch (groups[j]) {
      case Group::kA: s.hs += alpha[j]; break;
      case Group::kB: s.ds += alpha[j]; break;
      case Group::kUntagged:
        throw Error("source " + std::to_string(j) + " has no group tag");
    }
  }
  return s;
}

GroupScores group_scores(const SimplexWeights& alpha, std::span<const SourceDomain> sources) {
  std::vector<Group> groups;
  groups.reserve(sources.size());
  for (const auto& s : sources) {
    if (s.group == Group::kUntagged) throw Error("source '" + s.id + "' has no group tag");
    groups.push_back(s.group);
  }
  return group_scores(alpha, groups);
}

Group detect_group(const GroupScores& scores, TieRule tie) {
  if (scores.ds > scores.hs) return Group::kB;
  if (scores.ds < scores.hs) return Group::kA;
  return tie == TieRule::kGroupA ? Group::kA : Group::kB;
}

double command_error_rate(std::span<const std::size_t> predictions,
                          std::span<const std::size_t> references) {
  if (predictions.empty()) throw DimensionError("no predictions to score");
  if (predictions.size() != references.size())
    throw DimensionError(std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(references.size()) + " references");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] != references[i]) ++wrong;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(predictions.size());
}

double average_cer(std::span<const double> cers) {
  if (cers.empty()) throw DimensionError("no error rates to average");
  double sum = 0.0;
  for (double c : cers) sum += c;
  return sum / static_cast<double>(cers.size());
}

}  // namespace wjdot::scoring

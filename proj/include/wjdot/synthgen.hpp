#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wjdot/core.hpp"

// Seeded multi-source benchmark with planted group structure.
//
// Every source j draws class k samples from N(mu_k + o_j, sigma^2 I), where
// mu_k are shared class means and o_j = group centroid + individual offset.
// Group centroids sit group_separation * sigma apart; individual offsets
// have norm within_group_spread * sigma.
namespace wjdot::synthgen {

struct TargetRecipe {
  enum class Kind { kClone, kBlend, kMember };

  Kind kind = Kind::kClone;
  std::string id;
  std::size_t clone_of = 0;       // kClone
  std::vector<double> blend;      // kBlend: weights over sources
  Group group = Group::kA;        // kMember: group to draw a fresh speaker from
  double noise = 0.0;             // extra isotropic noise (in sigma units) per sample
  double extra_shift = 0.0;       // additional offset of this norm (sigma units)
};

struct ScenarioSpec {
  std::string name;
  std::size_t num_classes = 10;
  std::size_t input_dim = 8;
  std::size_t samples_per_class = 12;         // per source
  std::size_t target_samples_per_class = 10;  // per target, before the split
  double sigma = 1.0;
  double class_spread = 1.5;          // class means ~ N(0, (class_spread sigma)^2 I)
  double group_separation = 6.0;
  double within_group_spread = 1.5;
  std::vector<Group> groups;          // one per source
  std::vector<TargetRecipe> targets;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  std::size_t num_sources() const { return groups.size(); }
  void validate() const;
};

struct Scenario {
  std::vector<SourceDomain> sources;
  std::vector<TargetDomain> targets;
  std::vector<VectorXd> ground_truth;  // planted mixture weights per target
};

Scenario generate_scenario(const ScenarioSpec& spec);

// Named specs: "planted-clone", "two-group-detect", "covariate-shift".
std::vector<std::string> scenario_names();
ScenarioSpec scenario_catalog(const std::string& name, std::uint64_t seed = 0);

// Splits labelled samples into an unlabelled adaptation set and a labelled
// test set: per class, max(1, round(fraction * n_k)) test samples (classes
// with a single sample keep it for testing). Deterministic per seed.
TargetDomain split_target(std::string id, Group group, std::span<const JointSample> samples,
                          double test_fraction, std::uint64_t seed);

}  // namespace wjdot::synthgen

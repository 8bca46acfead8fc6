#include "wjdot/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wjdot/rng.hpp"

namespace wjdot::synthgen {

namespace {

VectorXd gaussian(std::size_t d, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  VectorXd v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = n01(rng);
  return v;
}

VectorXd unit(std::size_t d, Rng& rng) {
  VectorXd v = gaussian(d, rng);
  const double norm = v.norm();
  return norm > 0.0 ? VectorXd(v / norm) : VectorXd(VectorXd::Unit(static_cast<Eigen::Index>(d), 0));
}

// Largest-remainder apportionment of n items by weights.
std::vector<std::size_t> apportion(const std::vector<double>& w, std::size_t n) {
  std::vector<std::size_t> out(w.size(), 0);
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double exact = w[j] * static_cast<double>(n);
    out[j] = static_cast<std::size_t>(std::floor(exact));
    used += out[j];
    rem.emplace_back(exact - std::floor(exact), j);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t r = 0; used < n && r < rem.size(); ++r, ++used) ++out[rem[r].second];
  return out;
}

}  // namespace

void ScenarioSpec::validate() const {
  if (num_classes == 0) throw ConfigError("scenario needs at least one class");
  if (groups.empty()) throw ConfigError("scenario needs at least one source");
  if (input_dim == 0) throw ConfigError("input dimension must be positive");
  if (samples_per_class == 0 || target_samples_per_class == 0)
    throw ConfigError("sample counts must be positive");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (class_spread < 0.0 || group_separation < 0.0 || within_group_spread < 0.0)
    throw ConfigError("shift scales must be nonnegative");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must be in [0,1)");
  for (Group g : groups)
    if (g == Group::kUntagged) throw ConfigError("every source needs a group");
  for (const auto& t : targets) {
    if (t.noise < 0.0 || t.extra_shift < 0.0) throw ConfigError("target noise/shift must be nonnegative");
    switch (t.kind) {
      case TargetRecipe::Kind::kClone:
        if (t.clone_of >= groups.size()) throw ConfigError("clone source index out of range");
        break;
      case TargetRecipe::Kind::kBlend: {
        if (t.blend.size() != groups.size()) throw ConfigError("blend weights need one entry per source");
        double s = 0.0;
        for (double w : t.blend) {
          if (!(w >= 0.0)) throw ConfigError("blend weights must be nonnegative");
          s += w;
        }
        if (std::abs(s - 1.0) > 1e-9) throw ConfigError("blend weights must sum to 1");
        break;
      }
      case TargetRecipe::Kind::kMember:
        if (t.group == Group::kUntagged) throw ConfigError("member target needs a group");
        break;
    }
  }
}

TargetDomain split_target(std::string id, Group group, std::span<const JointSample> samples,
                          double test_fraction, std::uint64_t seed) {
  if (samples.empty()) throw DimensionError("target has no samples");
  const std::size_t k = static_cast<std::size_t>(samples.front().label.size());
  std::vector<std::vector<std::size_t>> by_class(k);
  for (std::size_t i = 0; i < samples.size(); ++i) by_class[argmax(samples[i].label)].push_back(i);
  Rng rng = make_rng(seed, 0x5350);
  std::vector<bool> is_test(samples.size(), false);
  for (auto& members : by_class) {
    if (members.empty()) continue;
    const auto n_test = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(members.size()))));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t r = 0; r < std::min(n_test, members.size()); ++r) is_test[members[r]] = true;
  }
  TargetDomain t;
  t.id = std::move(id);
  t.group = group;
  std::vector<std::size_t> adapt_idx;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (is_test[i])
      t.test.push_back(samples[i]);
    else
      adapt_idx.push_back(i);
  }
  if (adapt_idx.empty()) throw DimensionError("target split leaves no adaptation samples");
  std::shuffle(adapt_idx.begin(), adapt_idx.end(), rng);
  for (std::size_t i : adapt_idx) t.embeddings.push_back(samples[i].embedding);
  return t;
}

Scenario generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  const std::size_t d = spec.input_dim, k = spec.num_classes, j_count = spec.num_sources();
  const double sigma = spec.sigma;

  Rng class_rng = make_rng(spec.seed, 1);
  std::vector<VectorXd> means;
  for (std::size_t c = 0; c < k; ++c)
    means.push_back(spec.class_spread * sigma * gaussian(d, class_rng));

  Rng group_rng = make_rng(spec.seed, 2);
  const VectorXd axis = unit(d, group_rng);
  auto centroid = [&](Group g) -> VectorXd {
    const double half = 0.5 * spec.group_separation * sigma;
    return g == Group::kA ? VectorXd(-half * axis) : VectorXd(half * axis);
  };

  Scenario out;
  std::vector<VectorXd> offsets;
  for (std::size_t j = 0; j < j_count; ++j) {
    Rng rng = make_rng(spec.seed, 100 + j);
    offsets.push_back(centroid(spec.groups[j]) + spec.within_group_spread * sigma * unit(d, rng));
    SourceDomain src{"s" + std::to_string(j), {}, spec.groups[j]};
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t n = 0; n < spec.samples_per_class; ++n)
        src.samples.push_back({VectorXd(means[c] + offsets[j] + sigma * gaussian(d, rng)), one_hot(c, k)});
    out.sources.push_back(std::move(src));
  }

  for (std::size_t t = 0; t < spec.targets.size(); ++t) {
    const TargetRecipe& recipe = spec.targets[t];
    Rng rng = make_rng(spec.seed, 1000 + t);
    std::vector<double> weights(j_count, 0.0);
    Group group = Group::kA;
    std::vector<JointSample> samples;

    VectorXd shift = VectorXd::Zero(static_cast<Eigen::Index>(d));
    if (recipe.extra_shift > 0.0) shift = recipe.extra_shift * sigma * unit(d, rng);

    if (recipe.kind == TargetRecipe::Kind::kMember) {
      group = recipe.group;
      std::size_t members = 0;
      for (Group g : spec.groups) members += g == group ? 1 : 0;
      for (std::size_t j = 0; j < j_count; ++j)
        weights[j] = members > 0 && spec.groups[j] == group ? 1.0 / static_cast<double>(members) : 0.0;
      const VectorXd offset = centroid(group) + spec.within_group_spread * sigma * unit(d, rng) + shift;
      for (std::size_t c = 0; c < k; ++c)
        for (std::size_t n = 0; n < spec.target_samples_per_class; ++n) {
          VectorXd x = means[c] + offset + sigma * gaussian(d, rng);
          if (recipe.noise > 0.0) x += recipe.noise * sigma * gaussian(d, rng);
          samples.push_back({std::move(x), one_hot(c, k)});
        }
    } else {
      if (recipe.kind == TargetRecipe::Kind::kClone)
        weights[recipe.clone_of] = 1.0;
      else
        weights = recipe.blend;
      double mass_a = 0.0, mass_b = 0.0;
      for (std::size_t j = 0; j < j_count; ++j) (spec.groups[j] == Group::kA ? mass_a : mass_b) += weights[j];
      group = mass_b > mass_a ? Group::kB : Group::kA;
      for (std::size_t c = 0; c < k; ++c) {
        const auto counts = apportion(weights, spec.target_samples_per_class);
        for (std::size_t j = 0; j < j_count; ++j)
          for (std::size_t n = 0; n < counts[j]; ++n) {
            VectorXd x = means[c] + offsets[j] + shift + sigma * gaussian(d, rng);
            if (recipe.noise > 0.0) x += recipe.noise * sigma * gaussian(d, rng);
            samples.push_back({std::move(x), one_hot(c, k)});
          }
      }
    }
    const std::string id = recipe.id.empty() ? "t" + std::to_string(t) : recipe.id;
    out.targets.push_back(split_target(id, group, samples, spec.test_fraction, mix_seed(spec.seed, 2000 + t)));
    out.ground_truth.emplace_back(Eigen::Map<const VectorXd>(weights.data(), static_cast<Eigen::Index>(j_count)));
  }
  return out;
}

std::vector<std::string> scenario_names() {
  return {"planted-clone", "two-group-detect", "covariate-shift"};
}

ScenarioSpec scenario_catalog(const std::string& name, std::uint64_t seed) {
  using Kind = TargetRecipe::Kind;
  ScenarioSpec s;
  s.name = name;
  s.seed = seed;
  if (name == "planted-clone") {
    s.num_classes = 10;
    s.groups = {Group::kA, Group::kA, Group::kB, Group::kB, Group::kB};
    TargetRecipe t;
    t.kind = Kind::kClone;
    t.id = "clone-s2";
    t.clone_of = 2;
    s.targets = {t};
  } else if (name == "two-group-detect") {
    s.num_classes = 5;
    s.samples_per_class = 10;
    s.target_samples_per_class = 10;
    s.groups = {Group::kA, Group::kA, Group::kA, Group::kA, Group::kA,
                Group::kB, Group::kB, Group::kB, Group::kB, Group::kB};
    for (std::size_t t = 0; t < 10; ++t) {
      TargetRecipe r;
      r.kind = Kind::kMember;
      r.group = t < 5 ? Group::kA : Group::kB;
      r.id = std::string(t < 5 ? "a" : "b") + std::to_string(t % 5);
      s.targets.push_back(r);
    }
  } else if (name == "covariate-shift") {
    s.num_classes = 10;
    s.target_samples_per_class = 20;
    s.groups = {Group::kA, Group::kA, Group::kA, Group::kB, Group::kB, Group::kB};
    TargetRecipe t;
    t.kind = Kind::kMember;
    t.id = "shifted";
    t.group = Group::kA;
    t.extra_shift = 3.0;
    s.targets = {t};
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  return s;
}

}  // namespace wjdot::synthgen

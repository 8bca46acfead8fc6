// One PASS/FAIL line per acceptance criterion. Exit status is nonzero if any
// criterion fails.

#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "oracles.hpp"
#include "wjdot/adaptation.hpp"
#include "wjdot/experiment.hpp"
#include "wjdot/nn.hpp"
#include "wjdot/ot.hpp"
#include "wjdot/scoring.hpp"

using namespace wjdot;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

VectorXd uniform(Eigen::Index n) { return VectorXd::Constant(n, 1.0 / static_cast<double>(n)); }

Outcome ot_oracle() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int n = 3 + i % 3;
    const MatrixXd c = oracle::random_matrix(n, n, rng);
    const double v = ot::solve_exact({c}, uniform(n), uniform(n)).coupling.value;
    worst = std::max(worst, std::abs(v - oracle::permutation_ot(c)));
  }
  return {worst <= 1e-9, fmt("20 instances, max |exact - brute force| = %.2e", worst)};
}

Outcome sinkhorn_accuracy() {
  std::mt19937_64 rng(202);
  double worst_marginal = 0.0, worst_gap = 0.0;
  for (int i = 0; i < 10; ++i) {
    const MatrixXd x = oracle::zscored_points(8, rng), y = oracle::zscored_points(8, rng);
    const MatrixXd c = oracle::squared_distances(x, y);
    const auto s = ot::solve_sinkhorn({c}, uniform(8), uniform(8), {0.01, 5e-7, 1000000});
    const double exact = ot::solve_exact({c}, uniform(8), uniform(8)).coupling.value;
    worst_marginal = std::max(worst_marginal, ot::marginal_violation(s.coupling.plan, uniform(8), uniform(8)));
    worst_gap = std::max(worst_gap, std::abs(s.coupling.value - exact));
  }
  return {worst_marginal < 1e-6 && worst_gap <= 1e-3,
          fmt("10 instances, max marginal violation %.2e, max |<P,C> - exact| %.2e", worst_marginal, worst_gap)};
}

Outcome gradients() {
  double worst_f = 0.0, worst_alpha = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(300 + seed);
    const auto f = nn::SoftmaxClassifier::xavier(4, 3, seed);
    const MatrixXd z = oracle::random_matrix(9, 4, rng, -1.0, 1.0);
    const MatrixXd q = oracle::random_matrix(9, 3, rng);
    const auto grads = nn::classifier_backward(f, z, q, LabelCost::kCrossEntropy);
    auto loss = [&](const VectorXd& p) {
      auto h = f;
      h.set_parameters(p);
      return nn::soft_target_loss(h.predict_proba(z), q, LabelCost::kCrossEntropy).value;
    };
    worst_f = std::max(worst_f, oracle::relative_error(grads.classifier, oracle::central_gradient(loss, f.parameters())));
  }
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(400 + seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<SourceDomain> sources;
    for (std::size_t j = 0; j < 4; ++j) {
      SourceDomain s{"s" + std::to_string(j), {}, Group::kA};
      for (std::size_t i = 0; i < 6; ++i) {
        VectorXd x(2);
        x << g(rng) + static_cast<double>(j), g(rng);
        s.samples.push_back({x, one_hot(i % 2, 2)});
      }
      sources.push_back(std::move(s));
    }
    const MatrixXd target = oracle::random_matrix(7, 2, rng, -1.0, 3.0);
    const auto problem = adaptation::prepare(sources, target, true);
    const auto f = nn::SoftmaxClassifier::xavier(2, 2, seed);
    adaptation::AdaptConfig cfg;
    cfg.epsilon = 0.1;
    cfg.sinkhorn_tol = 1e-13;
    cfg.sinkhorn_max_iter = 1000000;
    const VectorXd a0 = oracle::random_simplex(4, rng, 0.2);
    const auto r = adaptation::evaluate(problem, f, SimplexWeights(a0), cfg);
    const VectorXd grad = adaptation::alpha_gradient(r.duals, problem.sources.counts);
    // Directional derivatives along the simplex edges e_j - e_0.
    for (Eigen::Index j = 1; j < 4; ++j) {
      VectorXd dir = VectorXd::Zero(4);
      dir[j] = 1.0;
      dir[0] = -1.0;
      const double h = 1e-5;
      const double fd = (adaptation::objective(problem, f, SimplexWeights(a0 + h * dir), cfg) -
                         adaptation::objective(problem, f, SimplexWeights(a0 - h * dir), cfg)) /
                        (2 * h);
      const double an = grad.dot(dir);
      worst_alpha = std::max(worst_alpha, std::abs(fd - an) / std::max(std::abs(fd), 1e-8));
    }
  }
  return {worst_f < 1e-4 && worst_alpha < 1e-3,
          fmt("5+5 instances, f rel err %.2e, alpha rel err %.2e", worst_f, worst_alpha)};
}

experiment::ExperimentResult run(const std::string& scenario, int epochs, int seeds) {
  experiment::ExperimentConfig c;
  c.scenario = scenario;
  c.adapt.epochs = epochs;
  c.seeds.clear();
  for (int s = 0; s < seeds; ++s) c.seeds.push_back(static_cast<std::uint64_t>(s));
  return experiment::run_experiment(c);
}

Outcome planted_clone() {
  const auto result = run("planted-clone", 100, 5);
  int good = 0;
  std::string per_seed;
  for (const auto& r : result.report.records) {
    if (!r.ok) {
      per_seed += " failed";
      continue;
    }
    double group = 0.0, clone = 0.0;
    for (const auto& e : r.alpha) {
      if (e.group == r.true_group) group += e.alpha;
      if (e.source_id == "s2") clone = e.alpha;
    }
    good += group >= 0.8 && clone >= 0.5;
    per_seed += fmt(" %.2f/%.2f", group, clone);
  }
  return {good >= 4, fmt("%d/5 seeds; group/clone mass:", good) + per_seed};
}

Outcome covariate_shift() {
  const auto result = run("covariate-shift", 40, 5);
  int better = 0, n = 0;
  double reduction = 0.0;
  std::string per_seed;
  for (const auto& r : result.report.records) {
    if (!r.ok) continue;
    ++n;
    better += r.adapted_cer < r.si_cer;
    reduction += r.si_cer > 0.0 ? (r.si_cer - r.adapted_cer) / r.si_cer : 0.0;
    per_seed += fmt(" %.1f->%.1f", r.si_cer, r.adapted_cer);
  }
  const double mean = n > 0 ? reduction / n : 0.0;
  return {n == 5 && better >= 4 && mean >= 0.10,
          fmt("%d/5 seeds improved, mean relative reduction %.1f%%; CER:", better, 100.0 * mean) + per_seed};
}

Outcome two_group_detect() {
  const auto result = run("two-group-detect", 100, 3);
  const auto& agg = result.report.aggregates;
  return {agg.failures == 0 && agg.detection_evaluated == 30 && agg.detection_correct >= 27,
          fmt("%zu/%zu correct, %zu failures", agg.detection_correct, agg.detection_evaluated, agg.failures)};
}

Outcome table_arithmetic() {
  const std::vector<double> si{35.79, 34.26, 63.16, 48.50, 64.44, 30.00, 18.62, 68.33, 48.67,
                               11.00, 39.50, 24.79, 48.07, 18.00, 56.50, 7.50,  30.91};
  const std::vector<double> adapted{31.93, 37.71, 49.12, 40.00, 57.78, 30.40, 14.29, 62.61, 35.65,
                                    8.80,  33.60, 19.33, 38.60, 12.80, 45.60, 4.80,  21.82};
  const double a = scoring::average_cer(si), b = scoring::average_cer(adapted);
  return {std::abs(a - 38.11) <= 0.01 + 1e-9 && std::abs(b - 32.05) <= 0.01 + 1e-9,
          fmt("SI mean %.4f, adapted mean %.4f", a, b)};
}

Outcome invariants() {
  doctest::Context ctx;
  ctx.setOption("test-suite", "invariants");
  ctx.setOption("minimal", true);
  const int rc = ctx.run();
  return {rc == 0, rc == 0 ? "all invariant tests passed" : "invariant test failures (see above)"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"ot-oracle", 5, ot_oracle},
      {"sinkhorn-accuracy", 10, sinkhorn_accuracy},
      {"gradient-check", 30, gradients},
      {"planted-clone", 120, planted_clone},
      {"covariate-shift", 180, covariate_shift},
      {"two-group-detect", 300, two_group_detect},
      {"cer-table-arithmetic", 1, table_arithmetic},
      {"invariant-suite", 120, invariants},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs <= c.budget;
    if (o.pass && !pass) o.detail += fmt("; over the %.0fs budget", c.budget);
    failures += !pass;
    std::printf("%s %s (%s, %.2fs)\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}

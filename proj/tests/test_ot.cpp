#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "wjdot/ot.hpp"

using namespace wjdot;
using namespace wjdot::ot;

namespace {

MatrixXd m(std::initializer_list<std::initializer_list<double>> rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double x : r) out(i, j++) = x;
    ++i;
  }
  return out;
}

VectorXd uniform(Eigen::Index n) { return VectorXd::Constant(n, 1.0 / static_cast<double>(n)); }

}  // namespace

TEST_CASE("joint_cost_matrix examples") {
  CostParams p;
  SUBCASE("identical joint points") {
    const auto c = joint_cost_matrix(m({{0}}), m({{1}}), m({{0}}), m({{1}}), p);
    CHECK(c.entries(0, 0) == 0.0);
  }
  SUBCASE("squared distance") {
    const auto c = joint_cost_matrix(m({{0}}), m({{1}}), m({{3}}), m({{1}}), p);
    CHECK(c.entries(0, 0) == doctest::Approx(9.0));
  }
  SUBCASE("cross entropy term") {
    const auto c = joint_cost_matrix(m({{0}}), m({{0.5, 0.5}}), m({{0}}), m({{1, 0}}), p);
    CHECK(c.entries(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("floored log") {
    const auto c = joint_cost_matrix(m({{0}}), m({{0.0, 1.0}}), m({{0}}), m({{1, 0}}), p);
    CHECK(c.entries(0, 0) == doctest::Approx(-std::log(1e-12)));
  }
  SUBCASE("squared L2 label cost") {
    p.label_cost = LabelCost::kSquaredL2;
    const auto c = joint_cost_matrix(m({{0}}), m({{0.5, 0.5}}), m({{0}}), m({{1, 0}}), p);
    CHECK(c.entries(0, 0) == doctest::Approx(0.5));
  }
  SUBCASE("weights") {
    p.beta_g = 2.0;
    p.beta_y = 0.0;
    const auto c = joint_cost_matrix(m({{0}}), m({{0.5, 0.5}}), m({{3}}), m({{1, 0}}), p);
    CHECK(c.entries(0, 0) == doctest::Approx(18.0));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(joint_cost_matrix(m({{0, 1}}), m({{1}}), m({{0}}), m({{1}}), p), DimensionError);
    CHECK_THROWS_AS(joint_cost_matrix(m({{std::nan("")}}), m({{1}}), m({{0}}), m({{1}}), p), NumericError);
    p.beta_g = -1.0;
    CHECK_THROWS(p.validate());
  }
}

TEST_CASE("solve_exact examples") {
  SUBCASE("single row") {
    const MatrixXd c = m({{1, 2, 3}});
    VectorXd b(3);
    b << 0.2, 0.3, 0.5;
    const auto r = solve_exact({c}, VectorXd::Ones(1), b);
    CHECK((r.coupling.plan.row(0).transpose() - b).norm() < 1e-15);
    CHECK(r.coupling.value == doctest::Approx(0.2 + 0.6 + 1.5));
  }
  SUBCASE("constant cost") {
    std::mt19937_64 rng(3);
    const auto a = oracle::random_simplex(4, rng), b = oracle::random_simplex(6, rng);
    const auto r = solve_exact({MatrixXd::Constant(4, 6, 2.5)}, a, b);
    CHECK(r.coupling.value == doctest::Approx(2.5).epsilon(1e-12));
  }
  SUBCASE("seed 7, n = m = 4, permutation oracle") {
    std::mt19937_64 rng(7);
    const MatrixXd c = oracle::random_matrix(4, 4, rng);
    const auto r = solve_exact({c}, uniform(4), uniform(4));
    CHECK(std::abs(r.coupling.value - oracle::permutation_ot(c)) < 1e-9);
  }
  SUBCASE("zero-mass entries come back as zero rows and columns") {
    std::mt19937_64 rng(11);
    const MatrixXd c = oracle::random_matrix(3, 4, rng);
    VectorXd a(3), b(4);
    a << 0.5, 0.0, 0.5;
    b << 0.25, 0.25, 0.0, 0.5;
    const auto r = solve_exact({c}, a, b);
    CHECK(r.coupling.plan.row(1).cwiseAbs().sum() == 0.0);
    CHECK(r.coupling.plan.col(2).cwiseAbs().sum() == 0.0);
    CHECK(marginal_violation(r.coupling.plan, a, b) <= 1e-10);
    CHECK(r.duals.phi.allFinite());
    CHECK(r.duals.psi.allFinite());
  }
  SUBCASE("invalid marginals") {
    const MatrixXd c = MatrixXd::Zero(2, 2);
    VectorXd bad(2);
    bad << 0.7, 0.7;
    CHECK_THROWS_AS(solve_exact({c}, uniform(2), bad), NumericError);
    bad << 1.5, -0.5;
    CHECK_THROWS_AS(solve_exact({c}, uniform(2), bad), NumericError);
    CHECK_THROWS_AS(solve_exact({c}, uniform(3), uniform(2)), DimensionError);
  }
}

TEST_CASE("exact duals certify optimality") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const auto n = 3 + trial % 5, k = 4 + trial % 3;
    const MatrixXd c = oracle::random_matrix(n, k, rng);
    const auto a = oracle::random_simplex(n, rng), b = oracle::random_simplex(k, rng);
    const auto r = solve_exact({c}, a, b);
    CHECK(marginal_violation(r.coupling.plan, a, b) <= 1e-10);
    // Weak duality gap is zero and dual feasibility holds.
    const double dual = r.duals.phi.dot(a) + r.duals.psi.dot(b);
    CHECK(std::abs(dual - r.coupling.value) < 1e-10);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < k; ++j) CHECK(r.duals.phi[i] + r.duals.psi[j] <= c(i, j) + 1e-10);
    CHECK(std::abs(r.duals.psi.dot(b)) < 1e-12);
  }
}

TEST_CASE("solve_sinkhorn examples") {
  const MatrixXd c = m({{0, 1}, {1, 0}});
  SUBCASE("small epsilon recovers the diagonal plan") {
    const auto r = solve_sinkhorn({c}, uniform(2), uniform(2), {0.01, 1e-9, 10000});
    CHECK((r.coupling.plan - m({{0.5, 0}, {0, 0.5}})).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(r.coupling.value < 1e-2);
  }
  SUBCASE("large epsilon gives the independent coupling") {
    const auto r = solve_sinkhorn({c}, uniform(2), uniform(2), {100.0, 1e-9, 10000});
    CHECK((r.coupling.plan - MatrixXd::Constant(2, 2, 0.25)).cwiseAbs().maxCoeff() < 2e-3);
  }
  SUBCASE("1x1") {
    const auto r = solve_sinkhorn({m({{3.5}})}, VectorXd::Ones(1), VectorXd::Ones(1));
    CHECK(r.coupling.plan(0, 0) == doctest::Approx(1.0));
    CHECK(r.coupling.value == doctest::Approx(3.5));
  }
  SUBCASE("iteration cap is reported, not thrown") {
    std::mt19937_64 rng(5);
    const MatrixXd big = oracle::random_matrix(20, 30, rng, 0.0, 10.0);
    const auto r = solve_sinkhorn({big}, uniform(20), uniform(30), {0.01, 1e-14, 3});
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 3);
    CHECK(r.coupling.plan.allFinite());
  }
  SUBCASE("bad options") {
    CHECK_THROWS_AS(solve_sinkhorn({c}, uniform(2), uniform(2), {0.0, 1e-6, 10}), NumericError);
    CHECK_THROWS_AS(solve_sinkhorn({c}, uniform(2), uniform(2), {0.1, 0.0, 10}), NumericError);
  }
}

TEST_CASE("sinkhorn value is the entropic primal at the plan") {
  std::mt19937_64 rng(8);
  const MatrixXd c = oracle::random_matrix(6, 9, rng, 0.0, 3.0);
  const auto a = oracle::random_simplex(6, rng), b = oracle::random_simplex(9, rng);
  const auto r = solve_sinkhorn({c}, a, b, {0.2, 1e-12, 100000});
  REQUIRE(r.converged);
  CHECK(r.regularized_value == doctest::Approx(entropic_primal_value(r.coupling.plan, {c}, a, b, 0.2)).epsilon(1e-9));
  // Any other feasible plan, e.g. the independent coupling, is worse.
  const MatrixXd indep = a * b.transpose();
  CHECK(r.regularized_value <= entropic_primal_value(indep, {c}, a, b, 0.2) + 1e-12);
}

TEST_CASE("sinkhorn handles zero-mass columns and warm starts") {
  std::mt19937_64 rng(9);
  const MatrixXd c = oracle::random_matrix(5, 6, rng, 0.0, 2.0);
  VectorXd b = oracle::random_simplex(6, rng);
  b[2] = 0.0;
  b /= b.sum();
  const auto a = uniform(5);
  const auto cold = solve_sinkhorn({c}, a, b, {0.05, 1e-10, 100000});
  CHECK(cold.converged);
  CHECK(cold.coupling.plan.col(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(cold.duals.psi.allFinite());
  const auto warm = solve_sinkhorn({c}, a, b, {0.05, 1e-10, 100000}, &cold.duals.phi);
  CHECK(warm.iterations <= cold.iterations);
  CHECK(std::abs(warm.regularized_value - cold.regularized_value) < 1e-8);
}

TEST_CASE("sinkhorn stays finite at tiny epsilon and large costs") {
  std::mt19937_64 rng(10);
  const MatrixXd c = oracle::random_matrix(8, 8, rng, 0.0, 50.0);
  const auto r = solve_sinkhorn({c}, uniform(8), uniform(8), {1e-3, 1e-5, 200000});
  CHECK(r.coupling.plan.allFinite());
  CHECK(r.duals.phi.allFinite());
  CHECK(r.converged);
  CHECK(std::abs(r.coupling.value - oracle::permutation_ot(c)) < 0.1);
}

#include "doctest.h"
#include "wjdot/core.hpp"

using namespace wjdot;

namespace {

SourceDomain domain(std::string id, std::vector<std::pair<VectorXd, std::size_t>> rows, std::size_t k) {
  SourceDomain d{std::move(id), {}, Group::kA};
  for (auto& [x, c] : rows) d.samples.push_back({x, one_hot(c, k)});
  return d;
}

VectorXd v(std::initializer_list<double> xs) {
  VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("validate_domain") {
  SUBCASE("well formed") {
    const auto d = domain("s", {{v({0, 1}), 0}, {v({1, 1}), 1}, {v({2, 0}), 1}}, 2);
    CHECK(validate_domain(d).ok());
  }
  SUBCASE("soft label") {
    SourceDomain d{"s", {{v({0.0}), v({0.5, 0.5})}}, Group::kA};
    const auto r = validate_domain(d);
    REQUIRE_FALSE(r.ok());
    CHECK(r.violations.front().find("label not one-hot") != std::string::npos);
  }
  SUBCASE("empty") {
    SourceDomain d{"s", {}, Group::kA};
    const auto r = validate_domain(d);
    REQUIRE_FALSE(r.ok());
    CHECK(r.violations.front().find("empty domain") != std::string::npos);
  }
  SUBCASE("ragged dimensions") {
    const auto d = domain("s", {{v({0, 1}), 0}, {v({1}), 1}}, 2);
    CHECK_FALSE(validate_domain(d).ok());
  }
  SUBCASE("non-finite") {
    const auto d = domain("s", {{v({0, std::nan("")}), 0}}, 2);
    CHECK_FALSE(validate_domain(d).ok());
  }
}

TEST_CASE("mixture_masses examples") {
  SUBCASE("single source is uniform") {
    const std::vector<std::size_t> n{4};
    const auto m = mixture_masses(n, SimplexWeights::uniform(1));
    CHECK(m.masses.isApprox(VectorXd::Constant(4, 0.25)));
  }
  SUBCASE("vertex alpha") {
    const std::vector<std::size_t> n{2, 2};
    const auto m = mixture_masses(n, SimplexWeights(v({1, 0})));
    CHECK(m.masses == v({0.5, 0.5, 0, 0}));
  }
  SUBCASE("alpha over N_j") {
    const std::vector<std::size_t> n{1, 3};
    const auto m = mixture_masses(n, SimplexWeights(v({0.4, 0.6})));
    CHECK((m.masses - v({0.4, 0.2, 0.2, 0.2})).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("from domains") {
    std::vector<SourceDomain> s{domain("a", {{v({0}), 0}}, 1), domain("b", {{v({1}), 0}, {v({2}), 0}}, 1)};
    const auto m = mixture_masses(s, SimplexWeights(v({0.5, 0.5})));
    CHECK((m.masses - v({0.5, 0.25, 0.25})).norm() < 1e-15);
  }
  SUBCASE("length mismatch") {
    const std::vector<std::size_t> n{1, 3};
    CHECK_THROWS_AS(mixture_masses(n, SimplexWeights::uniform(3)), DimensionError);
  }
}

TEST_CASE("SimplexWeights validation") {
  CHECK_THROWS_AS(SimplexWeights(v({0.5, 0.6})), NumericError);
  CHECK_THROWS_AS(SimplexWeights(v({1.5, -0.5})), NumericError);
  CHECK_THROWS_AS(SimplexWeights(v({std::nan(""), 1.0})), NumericError);
  CHECK_NOTHROW(SimplexWeights(v({0.3, 0.7 + 5e-10})));
  CHECK(SimplexWeights::vertex(3, 1).values() == v({0, 1, 0}));
}

TEST_CASE("pool keeps source order") {
  std::vector<SourceDomain> s{domain("a", {{v({0}), 0}}, 2), domain("b", {{v({1}), 1}, {v({2}), 0}}, 2)};
  const auto p = pool(s);
  CHECK(p.embeddings.rows() == 3);
  CHECK(p.owner == std::vector<std::size_t>{0, 1, 1});
  CHECK(p.counts == std::vector<std::size_t>{1, 2});
  CHECK(p.labels(1, 1) == 1.0);
}

TEST_CASE("group and label cost names") {
  CHECK(parse_group("a") == Group::kA);
  CHECK(parse_group("B") == Group::kB);
  CHECK(parse_group(group_name(Group::kUntagged)) == Group::kUntagged);
  CHECK_THROWS_AS(parse_group("healthy"), ParseError);
  CHECK(parse_label_cost(label_cost_name(LabelCost::kSquaredL2)) == LabelCost::kSquaredL2);
}

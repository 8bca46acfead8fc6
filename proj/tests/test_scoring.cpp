#include <algorithm>
#include <random>

#include "doctest.h"
#include "wjdot/scoring.hpp"

using namespace wjdot;
using namespace wjdot::scoring;

TEST_CASE("group_scores") {
  const std::vector<Group> g{Group::kA, Group::kA, Group::kB};
  VectorXd a(3);
  a << 0.2, 0.3, 0.5;
  const auto s = group_scores(SimplexWeights(a), g);
  CHECK(s.hs == doctest::Approx(0.5));
  CHECK(s.ds == doctest::Approx(0.5));

  const std::vector<Group> all_a{Group::kA, Group::kA};
  const auto t = group_scores(SimplexWeights::uniform(2), all_a);
  CHECK(t.hs == doctest::Approx(1.0));
  CHECK(t.ds == 0.0);

  const auto u = group_scores(SimplexWeights::vertex(3, 2), g);
  CHECK(u.hs == 0.0);
  CHECK(u.ds == 1.0);

  const std::vector<Group> untagged{Group::kA, Group::kUntagged, Group::kB};
  CHECK_THROWS_AS(group_scores(SimplexWeights::uniform(3), untagged), Error);
  CHECK_THROWS_AS(group_scores(SimplexWeights::uniform(2), g), DimensionError);
}

TEST_CASE("detect_group") {
  CHECK(detect_group({0.3, 0.7}) == Group::kB);
  CHECK(detect_group({0.5, 0.5}) == Group::kA);
  CHECK(detect_group({0.5, 0.5}, TieRule::kGroupB) == Group::kB);
  CHECK(detect_group({1.0, 0.0}) == Group::kA);
}

TEST_CASE("command_error_rate") {
  std::vector<std::size_t> ref(25), pred(25);
  for (std::size_t i = 0; i < 25; ++i) ref[i] = pred[i] = i;
  CHECK(command_error_rate(pred, ref) == 0.0);
  for (std::size_t i = 0; i < 5; ++i) pred[i] = 99;
  CHECK(command_error_rate(pred, ref) == doctest::Approx(20.0));
  for (auto& p : pred) p = 99;
  CHECK(command_error_rate(pred, ref) == doctest::Approx(100.0));
  CHECK_THROWS_AS(command_error_rate(std::vector<std::size_t>{}, std::vector<std::size_t>{}), DimensionError);
  CHECK_THROWS_AS(command_error_rate(std::vector<std::size_t>{1}, std::vector<std::size_t>{1, 2}), DimensionError);
}

TEST_CASE("average_cer") {
  CHECK(average_cer(std::vector<double>{20, 40}) == doctest::Approx(30.0));
  CHECK(average_cer(std::vector<double>{17.5}) == 17.5);
  CHECK_THROWS_AS(average_cer(std::vector<double>{}), DimensionError);
}

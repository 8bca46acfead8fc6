#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "json.hpp"

#include "doctest.h"
#include "tmpdir.hpp"
#include "wjdot/experiment.hpp"
#include "wjdot/synthgen.hpp"

using namespace wjdot;
using namespace wjdot::experiment;

namespace {

const char* kQuick = R"({
  "format_version": 1,
  "scenario": "planted-clone",
  "si": {"hidden": [16], "embedding_dim": 8, "epochs": 15},
  "adapt": {"epochs": 4, "f_steps": 2},
  "seeds": [0]
})";

nlohmann::json quick_json() { return nlohmann::json::parse(kQuick); }

TargetRecord record(std::string id, double si, double adapted, std::optional<Group> detected, Group truth) {
  TargetRecord r;
  r.target_id = std::move(id);
  r.si_cer = si;
  r.adapted_cer = adapted;
  r.alpha = {{"a", Group::kA, 0.75}, {"b", Group::kB, 0.25}};
  r.hs = 0.75;
  r.ds = 0.25;
  r.detected_group = detected;
  r.true_group = truth;
  r.convergence_epoch = 3;
  r.initial_objective = 2.0;
  r.final_objective = 1.5;
  return r;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(WJDOT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config schema") {
  const auto c = config_from_json(kQuick);
  CHECK(c.scenario == "planted-clone");
  CHECK(c.si.hidden == std::vector<std::size_t>{16});
  CHECK(c.adapt.epochs == 4);
  CHECK(config_from_json(config_to_json(c)).si.embedding_dim == 8);

  auto j = quick_json();
  j["colour"] = "blue";
  CHECK_THROWS_AS(config_from_json(j.dump()), ConfigError);
  j = quick_json();
  j["adapt"]["espilon"] = 0.1;
  CHECK_THROWS_AS(config_from_json(j.dump()), ConfigError);
  j = quick_json();
  j["scenario"] = "no-such-scenario";
  CHECK_THROWS_AS(config_from_json(j.dump()), ConfigError);
  j = quick_json();
  j["adapt"]["epochs"] = "many";
  CHECK_THROWS_AS(config_from_json(j.dump()), ConfigError);
  j = quick_json();
  j["adapt"]["mode"] = "approximate";
  CHECK_THROWS_AS(config_from_json(j.dump()), ConfigError);
  j = quick_json();
  j["seeds"] = {-1};
  CHECK_THROWS_AS(config_from_json(j.dump()), ConfigError);
  j = quick_json();
  j["format_version"] = 2;
  CHECK_THROWS_AS(config_from_json(j.dump()), ConfigError);
  j = quick_json();
  j["sources"] = {"a.txt"};
  CHECK_THROWS_AS(config_from_json(j.dump()), ConfigError);  // two data sources
  j = quick_json();
  j.erase("scenario");
  CHECK_THROWS_AS(config_from_json(j.dump()), ConfigError);  // none
  j = quick_json();
  j.erase("scenario");
  j["sources"] = {"missing.txt"};
  j["targets"] = {"missing-too.txt"};
  CHECK_THROWS_AS(config_from_json(j.dump()), ConfigError);
  CHECK_THROWS_AS(config_from_json("{"), ConfigError);
}

TEST_CASE("aggregates and report round trip") {
  std::vector<TargetRecord> records{record("t0", 0.5, 0.25, Group::kA, Group::kA),
                                    record("t1", 0.3, 0.35, Group::kB, Group::kA),
                                    record("t2", 0.2, 0.1, std::nullopt, Group::kB)};
  TargetRecord failed;
  failed.target_id = "t3";
  failed.ok = false;
  failed.error = "boom";
  records.push_back(failed);

  const auto agg = compute_aggregates(records);
  CHECK(agg.targets == 4);
  CHECK(agg.failures == 1);
  CHECK(*agg.si_average_cer == doctest::Approx(1.0 / 3.0));
  CHECK(*agg.adapted_average_cer == doctest::Approx(0.7 / 3.0));
  CHECK(agg.detection_evaluated == 2);
  CHECK(agg.detection_correct == 1);
  CHECK(*agg.detection_accuracy == 0.5);

  Report rep{"2026-01-01T00:00:00Z", config_to_json(config_from_json(kQuick)), records, agg};
  const auto back = report_from_json(report_to_json(rep));
  CHECK(back == rep);
  CHECK(report_fingerprint(back) == report_fingerprint(rep));
  Report later = rep;
  later.timestamp = "2027-01-01T00:00:00Z";
  CHECK(report_fingerprint(later) == report_fingerprint(rep));

  auto tampered = nlohmann::json::parse(report_to_json(rep));
  tampered["aggregates"]["detection_correct"] = 2;
  CHECK_THROWS_AS(report_from_json(tampered.dump()), ParseError);

  const auto empty = compute_aggregates({});
  CHECK_FALSE(empty.si_average_cer.has_value());
  CHECK_FALSE(empty.detection_accuracy.has_value());
}

TEST_CASE("scenario run is deterministic and writes its outputs") {
  const auto c = config_from_json(kQuick);
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  CHECK(report_fingerprint(a.report) == report_fingerprint(b.report));
  const std::size_t targets = synthgen::scenario_catalog("planted-clone").targets.size();
  REQUIRE(a.report.records.size() == targets);
  for (const auto& r : a.report.records) {
    CHECK(r.ok);
    double sum = 0.0;
    for (const auto& e : r.alpha) sum += e.alpha;
    CHECK(sum == doctest::Approx(1.0));
    CHECK(r.hs + r.ds == doctest::Approx(1.0));
    CHECK(r.convergence_epoch >= 1);
  }
  CHECK(a.adaptations.size() == targets);

  TempDir tmp;
  write_outputs(a, tmp.path);
  const auto report = report_from_json(io::read_file(tmp.path / "report.json"));
  CHECK(report_fingerprint(report) == report_fingerprint(a.report));
  const auto& first = a.adaptations.front();
  const auto traj = io::load_trajectory(tmp.path / "trajectories" / ("seed0_" + first.target_id + ".csv"));
  CHECK(traj == io::trajectory_of(first));
}

TEST_CASE("file mode reports bad targets without aborting") {
  TempDir tmp;
  const auto sc = synthgen::generate_scenario(synthgen::scenario_catalog("planted-clone", 0));
  auto j = quick_json();
  j.erase("scenario");
  j["sources"] = nlohmann::json::array();
  for (std::size_t s = 0; s < sc.sources.size(); ++s) {
    const auto name = "s" + std::to_string(s) + ".txt";
    io::save_dataset(tmp.path / name, sc.sources[s]);
    j["sources"].push_back(name);
  }
  io::save_dataset(tmp.path / "good.txt", sc.targets[0], 10);
  TargetDomain bad{"bad", {VectorXd::Zero(3)}, {{VectorXd::Zero(3), one_hot(0, 10)}}, Group::kA};
  io::save_dataset(tmp.path / "bad.txt", bad, 10);
  j["targets"] = {"good.txt", "bad.txt"};
  io::write_file(tmp.path / "config.json", j.dump());

  const auto result = run_experiment(load_config(tmp.path / "config.json"));
  REQUIRE(result.report.records.size() == 2);
  CHECK(result.report.records[0].ok);
  CHECK_FALSE(result.report.records[1].ok);
  CHECK_FALSE(result.report.records[1].error.empty());
  CHECK(result.report.aggregates.failures == 1);
}

TEST_CASE("leave-one-out over labelled domains") {
  TempDir tmp;
  const auto sc = synthgen::generate_scenario(synthgen::scenario_catalog("planted-clone", 2));
  auto j = quick_json();
  j.erase("scenario");
  j["leave_one_out"] = nlohmann::json::array();
  for (std::size_t s = 0; s < 3; ++s) {
    const auto name = "d" + std::to_string(s) + ".txt";
    io::save_dataset(tmp.path / name, sc.sources[s]);
    j["leave_one_out"].push_back(name);
  }
  io::write_file(tmp.path / "config.json", j.dump());
  const auto result = run_experiment(load_config(tmp.path / "config.json"));
  REQUIRE(result.report.records.size() == 3);
  for (std::size_t t = 0; t < 3; ++t) {
    const auto& r = result.report.records[t];
    CHECK(r.ok);
    CHECK(r.target_id == sc.sources[t].id);
    CHECK(r.alpha.size() == 2);
    for (const auto& e : r.alpha) CHECK(e.source_id != r.target_id);
  }
}

TEST_CASE("cli exit codes") {
  TempDir tmp;
  const auto dir = tmp.path.string();
  CHECK(run_cli("") == 1);
  CHECK(run_cli("frobnicate") == 1);
  io::write_file(tmp.path / "bad.json", R"({"format_version": 1, "scenario": "nope"})");
  CHECK(run_cli("run --config " + dir + "/bad.json --out " + dir + "/out") == 1);
  CHECK(run_cli("run --config " + dir + "/absent.json --out " + dir + "/out") == 1);
  CHECK(run_cli("trace --in " + dir + "/absent.json --out " + dir + "/t") == 2);

  io::write_file(tmp.path / "quick.json", kQuick);
  CHECK(run_cli("run --config " + dir + "/quick.json --seed 3 --mode exact --out " + dir + "/out") == 0);
  CHECK(std::filesystem::exists(tmp.path / "out" / "report.json"));
  const auto report = report_from_json(io::read_file(tmp.path / "out" / "report.json"));
  CHECK(report.records.front().seed == 3);
  CHECK(nlohmann::json::parse(report.config_json)["adapt"]["mode"] == "exact");

  CHECK(run_cli("gen --scenario planted-clone --seed 1 --out " + dir + "/gen") == 0);
  CHECK(std::filesystem::exists(tmp.path / "gen" / "config.json"));
  CHECK(run_cli("train-si --config " + dir + "/quick.json --seed 1 --out " + dir + "/model.json") == 0);
  const auto ck = io::load_checkpoint(tmp.path / "model.json");
  CHECK(ck.extractor.has_value());
}

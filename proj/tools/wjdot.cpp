// wjdot: command-line front end.
//
//   wjdot gen      --scenario NAME [--config FILE] [--seed S] --out DIR
//   wjdot train-si --config FILE [--seed S] --out MODEL.json
//   wjdot adapt    --model MODEL.json --sources F... --target F [--config FILE] [--mode M] --out RESULT.json
//   wjdot run      --config FILE [--seed S] [--mode M] [--out DIR]
//   wjdot trace    --in RESULT.json --out TRAJ.csv
//
// Exit status: 0 ok, 1 configuration or usage error, 2 runtime failure.

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "wjdot/experiment.hpp"
#include "wjdot/io.hpp"
#include "wjdot/scoring.hpp"
#include "wjdot/synthgen.hpp"

namespace fs = std::filesystem;
using namespace wjdot;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string mode;
  std::string scenario;
  std::string model;
  std::vector<std::string> sources;
  std::string target;
  std::string in;
};

void apply_mode(const Options& o, adaptation::AdaptConfig& cfg) {
  if (o.mode.empty()) return;
  cfg.mode = o.mode == "exact" ? ot::SolverMode::kExact : ot::SolverMode::kEntropic;
}

int cmd_gen(const Options& o) {
  std::string name = o.scenario;
  if (!o.config.empty()) {
    const auto cfg = experiment::load_config(o.config);
    if (cfg.scenario.empty()) throw ConfigError("config does not name a scenario");
    if (!name.empty() && name != cfg.scenario) throw ConfigError("--scenario and the config disagree");
    name = cfg.scenario;
  }
  if (name.empty()) throw ConfigError("gen needs --scenario or a config with a scenario");
  std::uint64_t seed = o.seed.value_or(0);
  const auto spec = synthgen::scenario_catalog(name, seed);
  const auto sc = synthgen::generate_scenario(spec);
  const fs::path dir(o.out);

  experiment::ExperimentConfig run_cfg;
  run_cfg.seeds = {seed};
  for (const auto& s : sc.sources) {
    const fs::path p = dir / "sources" / (s.id + ".txt");
    io::save_dataset(p, s);
    run_cfg.source_files.push_back(fs::path("sources") / (s.id + ".txt"));
  }
  for (const auto& t : sc.targets) {
    const fs::path p = dir / "targets" / (t.id + ".txt");
    io::save_dataset(p, t, spec.num_classes);
    run_cfg.target_files.push_back(fs::path("targets") / (t.id + ".txt"));
  }
  io::write_file(dir / "config.json", experiment::config_to_json(run_cfg));
  std::cout << "wrote " << sc.sources.size() << " sources and " << sc.targets.size() << " targets to "
            << dir.string() << "\n";
  return kExitOk;
}

std::vector<SourceDomain> sources_of(const experiment::ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cfg.scenario.empty())
    return synthgen::generate_scenario(synthgen::scenario_catalog(cfg.scenario, seed)).sources;
  if (!cfg.source_files.empty()) {
    std::vector<SourceDomain> out;
    for (const auto& p : cfg.source_files) out.push_back(io::load_source(p));
    return out;
  }
  throw ConfigError("train-si needs a scenario or a source list");
}

int cmd_train_si(const Options& o) {
  const auto cfg = experiment::load_config(o.config);
  const std::uint64_t seed = o.seed.value_or(cfg.seeds.front());
  const auto sources = sources_of(cfg, seed);
  nn::SiConfig si = cfg.si;
  si.seed = seed;
  const auto model = nn::train_si(sources, si);
  io::save_checkpoint(o.out, {model.extractor, model.classifier});
  const auto& best = model.history[static_cast<std::size_t>(model.best_epoch)];
  std::cout << "best epoch " << model.best_epoch << ", validation accuracy " << best.validation_accuracy
            << "\n";
  return kExitOk;
}

int cmd_adapt(const Options& o) {
  adaptation::AdaptConfig cfg;
  if (!o.config.empty()) cfg = experiment::load_config(o.config).adapt;
  apply_mode(o, cfg);
  cfg.validate();
  const auto ckpt = io::load_checkpoint(o.model);
  if (!ckpt.extractor) throw Error("checkpoint has no extractor");
  std::vector<SourceDomain> sources;
  for (const auto& p : o.sources) sources.push_back(io::load_source(p));
  TargetDomain target = io::load_target(o.target);
  target.test.clear();  // adaptation is unsupervised
  auto result = adaptation::adapt(sources, target, *ckpt.extractor, ckpt.classifier, cfg);
  io::AdaptRecord rec;
  rec.target_id = target.id;
  for (const auto& s : sources) {
    rec.source_ids.push_back(s.id);
    rec.source_groups.push_back(s.group);
  }
  rec.result = std::move(result);
  io::save_adapt_record(o.out, rec);
  std::cout << "alpha";
  for (std::size_t j = 0; j < rec.source_ids.size(); ++j)
    std::cout << " " << rec.source_ids[j] << "=" << rec.result.alpha[j];
  std::cout << "\n";
  const bool tagged = std::none_of(sources.begin(), sources.end(),
                                   [](const SourceDomain& s) { return s.group == Group::kUntagged; });
  if (tagged) {
    const auto scores = scoring::group_scores(rec.result.alpha, std::span<const SourceDomain>(sources));
    const Group g = scoring::detect_group(scores);
    std::cout << "HS " << scores.hs << " DS " << scores.ds << "; detected group " << group_name(g) << " ("
              << (g == Group::kA ? "healthy" : "dysarthric") << ")\n";
  }
  return kExitOk;
}

int cmd_run(const Options& o) {
  auto cfg = experiment::load_config(o.config);
  if (o.seed) cfg.seeds = {*o.seed};
  apply_mode(o, cfg.adapt);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (cfg.output_dir.empty()) throw ConfigError("no output directory: set output_dir or pass --out");
  const auto result = experiment::run_experiment(cfg);
  experiment::write_outputs(result, cfg.output_dir);
  const auto& a = result.report.aggregates;
  std::cout << a.targets << " targets, " << a.failures << " failed";
  if (a.si_average_cer) std::cout << "; average CER SI " << *a.si_average_cer << " adapted " << *a.adapted_average_cer;
  if (a.detection_accuracy) std::cout << "; detection " << a.detection_correct << "/" << a.detection_evaluated;
  std::cout << "\nfingerprint " << experiment::report_fingerprint(result.report) << "\n";
  return a.failures > 0 ? kExitRuntime : kExitOk;
}

int cmd_trace(const Options& o) {
  const auto rec = io::load_adapt_record(o.in);
  io::save_trajectory(o.out, io::trajectory_of(rec));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-source domain adaptation by weighted joint optimal transport"};
  app.require_subcommand(1);
  Options o;

  auto mode_check = CLI::IsMember({"exact", "entropic"});
  auto add_seed = [&](CLI::App* c) {
    c->add_option("--seed", o.seed, "random seed (overrides the config)");
  };

  auto* gen = app.add_subcommand("gen", "write a catalog scenario as dataset files");
  gen->add_option("--scenario", o.scenario, "scenario name");
  gen->add_option("--config", o.config, "experiment config naming a scenario");
  add_seed(gen);
  gen->add_option("--out", o.out, "output directory")->required();

  auto* train = app.add_subcommand("train-si", "train the source-only model");
  train->add_option("--config", o.config, "experiment config")->required();
  add_seed(train);
  train->add_option("--out", o.out, "checkpoint path")->required();

  auto* adapt = app.add_subcommand("adapt", "adapt a checkpoint to one target");
  adapt->add_option("--model", o.model, "checkpoint from train-si")->required();
  adapt->add_option("--sources", o.sources, "source dataset files")->required();
  adapt->add_option("--target", o.target, "target dataset file")->required();
  adapt->add_option("--config", o.config, "experiment config (adapt section is used)");
  adapt->add_option("--mode", o.mode, "OT solver")->check(mode_check);
  adapt->add_option("--out", o.out, "result path")->required();

  auto* run = app.add_subcommand("run", "full experiment with report");
  run->add_option("--config", o.config, "experiment config")->required();
  add_seed(run);
  run->add_option("--mode", o.mode, "OT solver")->check(mode_check);
  run->add_option("--out", o.out, "output directory (overrides the config)");

  auto* trace = app.add_subcommand("trace", "export the alpha trajectory of an adapt result");
  trace->add_option("--in", o.in, "result from adapt")->required();
  trace->add_option("--out", o.out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen(o);
    if (train->parsed()) return cmd_train_si(o);
    if (adapt->parsed()) return cmd_adapt(o);
    if (run->parsed()) return cmd_run(o);
    if (trace->parsed()) return cmd_trace(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}

#include "wjdot/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <set>

#include "json.hpp"
#include "wjdot/rng.hpp"
#include "wjdot/scoring.hpp"
#include "wjdot/synthgen.hpp"

namespace wjdot::experiment {

using nlohmann::json;

namespace {

// Schema helpers: every object is checked for unknown keys and every value
// for its type before anything is read.
void only_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  bool ok = false;
  if constexpr (std::is_same_v<T, bool>)
    ok = v.is_boolean();
  else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>)
    ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  else if constexpr (std::is_integral_v<T>)
    ok = v.is_number_integer();
  else if constexpr (std::is_floating_point_v<T>)
    ok = v.is_number();
  else if constexpr (std::is_same_v<T, std::string>)
    ok = v.is_string();
  if (!ok) throw ConfigError(std::string("'") + key + "' in " + where + " has the wrong type");
  out = v.get<T>();
}

std::vector<std::filesystem::path> read_paths(const json& j, const char* key,
                                              const std::filesystem::path& base) {
  std::vector<std::filesystem::path> out;
  if (!j.contains(key)) return out;
  if (!j.at(key).is_array()) throw ConfigError(std::string("'") + key + "' must be a list of paths");
  for (const auto& p : j.at(key)) {
    if (!p.is_string()) throw ConfigError(std::string("'") + key + "' must be a list of paths");
    std::filesystem::path path(p.get<std::string>());
    out.push_back(path.is_relative() && !base.empty() ? base / path : path);
  }
  return out;
}

json paths_json(const std::vector<std::filesystem::path>& paths) {
  json a = json::array();
  for (const auto& p : paths) a.push_back(p.string());
  return a;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_double(const json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", 0);
  if (j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number()) throw ParseError(std::string("field '") + key + "' has the wrong type", 0);
  return j.at(key).get<double>();
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(std::string("missing field '") + key + "'", 0);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field '") + key + "' has the wrong type", 0);
  }
}

struct Dataset {
  std::vector<SourceDomain> sources;
  std::vector<TargetDomain> targets;
};

std::vector<std::size_t> labels_of(std::span<const JointSample> samples) {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(argmax(s.label));
  return out;
}

TargetRecord evaluate_target(std::uint64_t seed, const std::vector<SourceDomain>& sources,
                             const TargetDomain& target, const nn::SiModel& si,
                             const adaptation::AdaptConfig& cfg, io::AdaptRecord& record) {
  TargetRecord r;
  r.seed = seed;
  r.target_id = target.id;
  r.true_group = target.group;
  r.si_cer = test_cer(si.extractor, si.classifier, target.test);

  // The adaptation only ever sees the unlabelled part of the target.
  TargetDomain unlabelled{target.id, target.embeddings, {}, Group::kUntagged};
  auto result = adaptation::adapt(sources, unlabelled, si.extractor, si.classifier, cfg);
  r.adapted_cer = test_cer(si.extractor, result.classifier, target.test);

  bool tagged = true;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    r.alpha.push_back({sources[j].id, sources[j].group, result.alpha[j]});
    tagged = tagged && sources[j].group != Group::kUntagged;
  }
  if (tagged) {
    const auto scores = scoring::group_scores(result.alpha, std::span<const SourceDomain>(sources));
    r.hs = scores.hs;
    r.ds = scores.ds;
    r.detected_group = scoring::detect_group(scores);
  }
  r.convergence_epoch = result.convergence_epoch;
  r.converged = result.converged;
  r.initial_objective = result.initial_objective;
  r.final_objective = result.objective_trace.empty() ? result.initial_objective : result.objective_trace.back();

  record.target_id = target.id;
  record.source_ids.clear();
  record.source_groups.clear();
  for (const auto& s : sources) {
    record.source_ids.push_back(s.id);
    record.source_groups.push_back(s.group);
  }
  record.result = std::move(result);
  return r;
}

TargetRecord failure(std::uint64_t seed, const std::string& id, Group truth, const std::string& what) {
  TargetRecord r;
  r.seed = seed;
  r.target_id = id;
  r.true_group = truth;
  r.ok = false;
  r.error = what;
  return r;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

// Config ---------------------------------------------------------------------

void ExperimentConfig::validate() const {
  const int choices = (!scenario.empty()) + (!source_files.empty() || !target_files.empty()) +
                      (!leave_one_out_files.empty());
  if (choices != 1)
    throw ConfigError("set exactly one of 'scenario', 'sources'+'targets' or 'leave_one_out'");
  if (!scenario.empty()) {
    const auto names = synthgen::scenario_names();
    if (std::find(names.begin(), names.end(), scenario) == names.end())
      throw ConfigError("unknown scenario '" + scenario + "'");
  }
  if (!source_files.empty() || !target_files.empty()) {
    if (source_files.empty()) throw ConfigError("'sources' must list at least one file");
    if (target_files.empty()) throw ConfigError("'targets' must list at least one file");
  }
  if (!leave_one_out_files.empty() && leave_one_out_files.size() < 2)
    throw ConfigError("'leave_one_out' needs at least two domains");
  for (const auto* list : {&source_files, &target_files, &leave_one_out_files})
    for (const auto& p : *list)
      if (!std::filesystem::exists(p)) throw ConfigError("file not found: " + p.string());
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in [0, 1)");
  if (seeds.empty()) throw ConfigError("'seeds' must not be empty");
  if (si.embedding_dim == 0) throw ConfigError("si.embedding_dim must be positive");
  for (auto h : si.hidden)
    if (h == 0) throw ConfigError("si.hidden sizes must be positive");
  if (si.epochs < 0) throw ConfigError("si.epochs must be nonnegative");
  if (si.batch_size == 0) throw ConfigError("si.batch_size must be positive");
  if (!(si.adam.learning_rate > 0.0)) throw ConfigError("si.learning_rate must be positive");
  adapt.validate();
}

ExperimentConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  only_keys(j,
            {"format_version", "scenario", "sources", "targets", "leave_one_out", "test_fraction", "si",
             "adapt", "seeds", "output_dir"},
            "config");
  int version = kConfigVersion;
  read(j, "format_version", version, "config");
  if (version != kConfigVersion)
    throw ConfigError("unsupported config format_version " + std::to_string(version));

  ExperimentConfig c;
  read(j, "scenario", c.scenario, "config");
  c.source_files = read_paths(j, "sources", base_dir);
  c.target_files = read_paths(j, "targets", base_dir);
  c.leave_one_out_files = read_paths(j, "leave_one_out", base_dir);
  read(j, "test_fraction", c.test_fraction, "config");
  if (j.contains("seeds")) {
    if (!j.at("seeds").is_array()) throw ConfigError("'seeds' must be a list of nonnegative integers");
    c.seeds.clear();
    for (const auto& s : j.at("seeds")) {
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
        throw ConfigError("'seeds' must be a list of nonnegative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  std::string out_dir;
  read(j, "output_dir", out_dir, "config");
  if (!out_dir.empty()) {
    c.output_dir = out_dir;
    if (c.output_dir.is_relative() && !base_dir.empty()) c.output_dir = base_dir / c.output_dir;
  }

  if (j.contains("si")) {
    const json& s = j.at("si");
    only_keys(s, {"hidden", "embedding_dim", "epochs", "batch_size", "patience", "learning_rate"}, "si");
    if (s.contains("hidden")) {
      if (!s.at("hidden").is_array()) throw ConfigError("si.hidden must be a list of sizes");
      c.si.hidden.clear();
      for (const auto& h : s.at("hidden")) {
        if (!h.is_number_unsigned()) throw ConfigError("si.hidden must be a list of sizes");
        c.si.hidden.push_back(h.get<std::size_t>());
      }
    }
    read(s, "embedding_dim", c.si.embedding_dim, "si");
    read(s, "epochs", c.si.epochs, "si");
    read(s, "batch_size", c.si.batch_size, "si");
    read(s, "patience", c.si.patience, "si");
    read(s, "learning_rate", c.si.adam.learning_rate, "si");
  }

  if (j.contains("adapt")) {
    const json& a = j.at("adapt");
    only_keys(a,
              {"mode", "epsilon", "beta_g", "beta_y", "label_cost", "epochs", "f_steps", "alpha_step",
               "max_halvings", "tol", "sinkhorn_tol", "sinkhorn_max_iter", "learning_rate", "standardize"},
              "adapt");
    auto& cfg = c.adapt;
    std::string mode = cfg.mode == ot::SolverMode::kExact ? "exact" : "entropic";
    read(a, "mode", mode, "adapt");
    if (mode == "exact")
      cfg.mode = ot::SolverMode::kExact;
    else if (mode == "entropic")
      cfg.mode = ot::SolverMode::kEntropic;
    else
      throw ConfigError("adapt.mode must be 'exact' or 'entropic'");
    read(a, "epsilon", cfg.epsilon, "adapt");
    read(a, "beta_g", cfg.cost.beta_g, "adapt");
    read(a, "beta_y", cfg.cost.beta_y, "adapt");
    std::string label_cost(label_cost_name(cfg.cost.label_cost));
    read(a, "label_cost", label_cost, "adapt");
    try {
      cfg.cost.label_cost = parse_label_cost(label_cost);
    } catch (const Error&) {
      throw ConfigError("adapt.label_cost must be 'cross_entropy' or 'squared_l2'");
    }
    read(a, "epochs", cfg.epochs, "adapt");
    read(a, "f_steps", cfg.f_steps, "adapt");
    read(a, "alpha_step", cfg.alpha_step, "adapt");
    read(a, "max_halvings", cfg.max_halvings, "adapt");
    read(a, "tol", cfg.tol, "adapt");
    read(a, "sinkhorn_tol", cfg.sinkhorn_tol, "adapt");
    read(a, "sinkhorn_max_iter", cfg.sinkhorn_max_iter, "adapt");
    read(a, "learning_rate", cfg.adam.learning_rate, "adapt");
    read(a, "standardize", cfg.standardize, "adapt");
  }
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["format_version"] = kConfigVersion;
  if (!c.scenario.empty()) j["scenario"] = c.scenario;
  if (!c.source_files.empty()) j["sources"] = paths_json(c.source_files);
  if (!c.target_files.empty()) j["targets"] = paths_json(c.target_files);
  if (!c.leave_one_out_files.empty()) j["leave_one_out"] = paths_json(c.leave_one_out_files);
  j["test_fraction"] = c.test_fraction;
  j["seeds"] = c.seeds;
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir.string();
  j["si"] = {{"hidden", c.si.hidden},
             {"embedding_dim", c.si.embedding_dim},
             {"epochs", c.si.epochs},
             {"batch_size", c.si.batch_size},
             {"patience", c.si.patience},
             {"learning_rate", c.si.adam.learning_rate}};
  const auto& a = c.adapt;
  j["adapt"] = {{"mode", a.mode == ot::SolverMode::kExact ? "exact" : "entropic"},
                {"epsilon", a.epsilon},
                {"beta_g", a.cost.beta_g},
                {"beta_y", a.cost.beta_y},
                {"label_cost", label_cost_name(a.cost.label_cost)},
                {"epochs", a.epochs},
                {"f_steps", a.f_steps},
                {"alpha_step", a.alpha_step},
                {"max_halvings", a.max_halvings},
                {"tol", a.tol},
                {"sinkhorn_tol", a.sinkhorn_tol},
                {"sinkhorn_max_iter", a.sinkhorn_max_iter},
                {"learning_rate", a.adam.learning_rate},
                {"standardize", a.standardize}};
  return j.dump(1) + "\n";
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(text, path.parent_path());
}

// Report ---------------------------------------------------------------------

Aggregates compute_aggregates(const std::vector<TargetRecord>& records) {
  Aggregates a;
  a.targets = records.size();
  std::vector<double> si, adapted;
  for (const auto& r : records) {
    if (!r.ok) {
      ++a.failures;
      continue;
    }
    si.push_back(r.si_cer);
    adapted.push_back(r.adapted_cer);
    if (r.detected_group && r.true_group != Group::kUntagged) {
      ++a.detection_evaluated;
      if (*r.detected_group == r.true_group) ++a.detection_correct;
    }
  }
  if (!si.empty()) {
    a.si_average_cer = scoring::average_cer(si);
    a.adapted_average_cer = scoring::average_cer(adapted);
  }
  if (a.detection_evaluated > 0)
    a.detection_accuracy =
        static_cast<double>(a.detection_correct) / static_cast<double>(a.detection_evaluated);
  return a;
}

std::string report_to_json(const Report& report, bool include_timestamp) {
  json j;
  j["format"] = "wjdot-report";
  j["format_version"] = kReportVersion;
  if (include_timestamp) j["timestamp"] = report.timestamp;
  j["config"] = report.config_json.empty() ? json(nullptr) : json::parse(report.config_json);
  json records = json::array();
  for (const auto& r : report.records) {
    json o{{"seed", r.seed}, {"target_id", r.target_id}, {"status", r.ok ? "ok" : "failed"},
           {"true_group", group_name(r.true_group)}};
    if (!r.ok) {
      o["error"] = r.error;
    } else {
      json alpha = json::array();
      for (const auto& e : r.alpha)
        alpha.push_back({{"source_id", e.source_id}, {"group", group_name(e.group)}, {"alpha", e.alpha}});
      o["si_cer"] = r.si_cer;
      o["adapted_cer"] = r.adapted_cer;
      o["alpha"] = alpha;
      o["hs"] = r.hs;
      o["ds"] = r.ds;
      o["detected_group"] = r.detected_group ? json(group_name(*r.detected_group)) : json(nullptr);
      o["convergence_epoch"] = r.convergence_epoch;
      o["converged"] = r.converged;
      o["initial_objective"] = r.initial_objective;
      o["final_objective"] = r.final_objective;
    }
    records.push_back(o);
  }
  j["records"] = records;
  const auto& a = report.aggregates;
  j["aggregates"] = {{"targets", a.targets},
                     {"failures", a.failures},
                     {"si_average_cer", opt_json(a.si_average_cer)},
                     {"adapted_average_cer", opt_json(a.adapted_average_cer)},
                     {"detection_evaluated", a.detection_evaluated},
                     {"detection_correct", a.detection_correct},
                     {"detection_accuracy", opt_json(a.detection_accuracy)}};
  return j.dump(1) + "\n";
}

Report report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 0);
  }
  if (field<std::string>(j, "format") != "wjdot-report") throw ParseError("not a report document", 0);
  if (field<int>(j, "format_version") != kReportVersion) throw ParseError("unsupported report format_version", 0);
  Report rep;
  if (j.contains("timestamp")) rep.timestamp = field<std::string>(j, "timestamp");
  if (!j.contains("config")) throw ParseError("missing field 'config'", 0);
  if (!j.at("config").is_null()) rep.config_json = j.at("config").dump(1) + "\n";
  if (!j.contains("records") || !j.at("records").is_array()) throw ParseError("missing field 'records'", 0);
  for (const auto& o : j.at("records")) {
    TargetRecord r;
    r.seed = field<std::uint64_t>(o, "seed");
    r.target_id = field<std::string>(o, "target_id");
    r.true_group = parse_group(field<std::string>(o, "true_group"));
    const auto status = field<std::string>(o, "status");
    if (status == "failed") {
      r.ok = false;
      r.error = field<std::string>(o, "error");
    } else if (status == "ok") {
      r.si_cer = field<double>(o, "si_cer");
      r.adapted_cer = field<double>(o, "adapted_cer");
      if (!o.contains("alpha") || !o.at("alpha").is_array()) throw ParseError("missing field 'alpha'", 0);
      for (const auto& e : o.at("alpha"))
        r.alpha.push_back({field<std::string>(e, "source_id"), parse_group(field<std::string>(e, "group")),
                           field<double>(e, "alpha")});
      r.hs = field<double>(o, "hs");
      r.ds = field<double>(o, "ds");
      if (!o.contains("detected_group")) throw ParseError("missing field 'detected_group'", 0);
      if (!o.at("detected_group").is_null())
        r.detected_group = parse_group(field<std::string>(o, "detected_group"));
      r.convergence_epoch = field<int>(o, "convergence_epoch");
      r.converged = field<bool>(o, "converged");
      r.initial_objective = field<double>(o, "initial_objective");
      r.final_objective = field<double>(o, "final_objective");
    } else {
      throw ParseError("record status must be 'ok' or 'failed'", 0);
    }
    rep.records.push_back(std::move(r));
  }
  const json& a = j.contains("aggregates") ? j.at("aggregates") : throw ParseError("missing field 'aggregates'", 0);
  Aggregates stored;
  stored.targets = field<std::size_t>(a, "targets");
  stored.failures = field<std::size_t>(a, "failures");
  stored.si_average_cer = opt_double(a, "si_average_cer");
  stored.adapted_average_cer = opt_double(a, "adapted_average_cer");
  stored.detection_evaluated = field<std::size_t>(a, "detection_evaluated");
  stored.detection_correct = field<std::size_t>(a, "detection_correct");
  stored.detection_accuracy = opt_double(a, "detection_accuracy");
  rep.aggregates = compute_aggregates(rep.records);
  if (!(stored == rep.aggregates))
    throw ParseError("stored aggregates do not match the per-target records", 0);
  return rep;
}

std::string report_fingerprint(const Report& report) {
  const std::string text = report_to_json(report, false);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

// Runner ---------------------------------------------------------------------

double test_cer(const nn::MlpExtractor& g, const nn::SoftmaxClassifier& f,
                std::span<const JointSample> test) {
  if (test.empty()) throw DimensionError("target has no labelled test samples");
  std::vector<VectorXd> x;
  x.reserve(test.size());
  for (const auto& s : test) x.push_back(s.embedding);
  const auto pred = f.predict(g.embed(stack_rows(x)));
  return scoring::command_error_rate(pred, labels_of(test));
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult out;
  out.report.timestamp = utc_timestamp();
  // The echo leaves out the output directory so reruns elsewhere compare equal.
  ExperimentConfig echo = config;
  echo.output_dir.clear();
  out.report.config_json = config_to_json(echo);
  auto& records = out.report.records;

  auto add = [&](std::uint64_t seed, const std::vector<SourceDomain>& sources, const TargetDomain& target,
                 const nn::SiModel& si) {
    io::AdaptRecord rec;
    try {
      records.push_back(evaluate_target(seed, sources, target, si, config.adapt, rec));
      out.adaptation_seeds.push_back(seed);
      out.adaptations.push_back(std::move(rec));
    } catch (const Error& e) {
      records.push_back(failure(seed, target.id, target.group, e.what()));
    }
  };

  // File inputs are read once; seeds only change training and splits.
  std::vector<SourceDomain> file_sources, loo_domains;
  std::vector<TargetDomain> file_targets;
  for (const auto& p : config.source_files) file_sources.push_back(io::load_source(p));
  for (const auto& p : config.target_files) file_targets.push_back(io::load_target(p));
  for (const auto& p : config.leave_one_out_files) loo_domains.push_back(io::load_source(p));

  for (const std::uint64_t seed : config.seeds) {
    nn::SiConfig si_cfg = config.si;
    si_cfg.seed = seed;

    if (!config.leave_one_out_files.empty()) {
      for (std::size_t t = 0; t < loo_domains.size(); ++t) {
        const auto& held = loo_domains[t];
        try {
          std::vector<SourceDomain> sources;
          for (std::size_t j = 0; j < loo_domains.size(); ++j)
            if (j != t) sources.push_back(loo_domains[j]);
          const TargetDomain target = synthgen::split_target(held.id, held.group, held.samples,
                                                             config.test_fraction, mix_seed(seed, 3000 + t));
          const nn::SiModel si = nn::train_si(sources, si_cfg);
          add(seed, sources, target, si);
        } catch (const Error& e) {
          records.push_back(failure(seed, held.id, held.group, e.what()));
        }
      }
      continue;
    }

    Dataset data;
    if (!config.scenario.empty()) {
      auto sc = synthgen::generate_scenario(synthgen::scenario_catalog(config.scenario, seed));
      data.sources = std::move(sc.sources);
      data.targets = std::move(sc.targets);
    } else {
      data.sources = file_sources;
      data.targets = file_targets;
    }
    nn::SiModel si;
    try {
      si = nn::train_si(data.sources, si_cfg);
    } catch (const Error& e) {
      for (const auto& t : data.targets)
        records.push_back(failure(seed, t.id, t.group, std::string("SI training failed: ") + e.what()));
      continue;
    }
    for (const auto& t : data.targets) add(seed, data.sources, t, si);
  }
  out.report.aggregates = compute_aggregates(records);
  return out;
}

void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
  io::write_file(dir / "report.json", report_to_json(result.report));
  for (std::size_t i = 0; i < result.adaptations.size(); ++i) {
    const auto& rec = result.adaptations[i];
    if (rec.result.alpha_trajectory.rows() == 0) continue;
    const auto name = "seed" + std::to_string(result.adaptation_seeds[i]) + "_" + rec.target_id + ".csv";
    io::save_trajectory(dir / "trajectories" / name, io::trajectory_of(rec));
  }
}

}  // namespace wjdot::experiment

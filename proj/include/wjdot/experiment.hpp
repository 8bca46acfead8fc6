#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wjdot/adaptation.hpp"
#include "wjdot/io.hpp"
#include "wjdot/nn.hpp"

// Experiment runner: SI training, per-target adaptation, CER and group
// scores, collected into a versioned JSON report.
namespace wjdot::experiment {

inline constexpr int kConfigVersion = 1;
inline constexpr int kReportVersion = 1;

// Exactly one data source is set: a catalog scenario, explicit source and
// target files, or a list of labelled domains evaluated leave-one-out.
struct ExperimentConfig {
  std::string scenario;
  std::vector<std::filesystem::path> source_files;
  std::vector<std::filesystem::path> target_files;
  std::vector<std::filesystem::path> leave_one_out_files;
  double test_fraction = 0.2;  // leave-one-out adaptation/test split
  nn::SiConfig si{};           // si.seed is replaced by each run seed
  adaptation::AdaptConfig adapt{};
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir;

  // Throws ConfigError.
  void validate() const;
};

// Unknown keys, wrong types and inconsistent choices raise ConfigError.
// Relative file paths are resolved against base_dir.
ExperimentConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
std::string config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

struct AlphaEntry {
  std::string source_id;
  Group group = Group::kUntagged;
  double alpha = 0.0;

  friend bool operator==(const AlphaEntry&, const AlphaEntry&) = default;
};

struct TargetRecord {
  std::uint64_t seed = 0;
  std::string target_id;
  bool ok = true;
  std::string error;  // set when ok is false; remaining fields are then unset
  double si_cer = 0.0;
  double adapted_cer = 0.0;
  std::vector<AlphaEntry> alpha;
  double hs = 0.0;
  double ds = 0.0;
  std::optional<Group> detected_group;  // absent when some source is untagged
  Group true_group = Group::kUntagged;
  int convergence_epoch = 0;
  bool converged = false;
  double initial_objective = 0.0;
  double final_objective = 0.0;

  friend bool operator==(const TargetRecord&, const TargetRecord&) = default;
};

struct Aggregates {
  std::size_t targets = 0;
  std::size_t failures = 0;
  std::optional<double> si_average_cer;       // over successful records
  std::optional<double> adapted_average_cer;
  std::size_t detection_evaluated = 0;        // records with both groups known
  std::size_t detection_correct = 0;
  std::optional<double> detection_accuracy;

  friend bool operator==(const Aggregates&, const Aggregates&) = default;
};

Aggregates compute_aggregates(const std::vector<TargetRecord>& records);

struct Report {
  std::string timestamp;    // not part of the fingerprint
  std::string config_json;  // canonical config echo
  std::vector<TargetRecord> records;
  Aggregates aggregates;

  friend bool operator==(const Report&, const Report&) = default;
};

std::string report_to_json(const Report& report, bool include_timestamp = true);
// Rejects reports whose stored aggregates differ from a recomputation.
Report report_from_json(const std::string& text);
// FNV-1a over the serialisation without the timestamp, as 16 hex digits.
std::string report_fingerprint(const Report& report);

struct ExperimentResult {
  Report report;
  std::vector<std::uint64_t> adaptation_seeds;  // parallel to adaptations
  std::vector<io::AdaptRecord> adaptations;     // one per successful record
};

ExperimentResult run_experiment(const ExperimentConfig& config);

// report.json plus trajectories/seed<S>_<target>.csv under dir.
void write_outputs(const ExperimentResult& result, const std::filesystem::path& dir);

// CER of (g, f) on a labelled test set.
double test_cer(const nn::MlpExtractor& g, const nn::SoftmaxClassifier& f,
                std::span<const JointSample> test);

std::string utc_timestamp();

}  // namespace wjdot::experiment

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "wjdot/adaptation.hpp"
#include "wjdot/core.hpp"
#include "wjdot/nn.hpp"

// Versioned text formats. Every writer is the exact inverse of its reader:
// floating-point values are printed in shortest round-trip form.
namespace wjdot::io {

inline constexpr int kDatasetVersion = 1;
inline constexpr int kModelVersion = 1;
inline constexpr int kAdaptVersion = 1;
inline constexpr int kTrajectoryVersion = 1;

// Dataset file, one record per line:
//
//   wjdot-dataset 1
//   kind source|target
//   id <token>
//   group A|B|untagged
//   dim <d>
//   classes <K>
//   samples <n>          (source)
//   adapt <n> / test <m> (target)
//   end
//   x_1 ... x_d k        (k = class index; "?" for unlabelled adaptation rows)
using Domain = std::variant<SourceDomain, TargetDomain>;

void write_dataset(std::ostream& out, const SourceDomain& domain);
void write_dataset(std::ostream& out, const TargetDomain& domain, std::size_t num_classes);
Domain read_dataset(std::istream& in);

void save_dataset(const std::filesystem::path& path, const SourceDomain& domain);
void save_dataset(const std::filesystem::path& path, const TargetDomain& domain,
                  std::size_t num_classes);
Domain load_dataset(const std::filesystem::path& path);
SourceDomain load_source(const std::filesystem::path& path);
TargetDomain load_target(const std::filesystem::path& path);

// Model checkpoint (JSON). The extractor is optional: an adapted target
// classifier is stored on its own.
struct Checkpoint {
  std::optional<nn::MlpExtractor> extractor;
  nn::SoftmaxClassifier classifier;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Adaptation output plus the source registry needed to interpret alpha.
struct AdaptRecord {
  std::string target_id;
  std::vector<std::string> source_ids;
  std::vector<Group> source_groups;
  adaptation::AdaptResult result;
};

bool same_result(const adaptation::AdaptResult& x, const adaptation::AdaptResult& y);

std::string adapt_record_to_json(const AdaptRecord& r);
AdaptRecord adapt_record_from_json(const std::string& text);
void save_adapt_record(const std::filesystem::path& path, const AdaptRecord& r);
AdaptRecord load_adapt_record(const std::filesystem::path& path);

// Trajectory CSV: "# wjdot-trajectory format_version=1", then a header
// "epoch,source_id,group_tag,alpha" and one row per (epoch, source).
struct Trajectory {
  std::vector<std::string> source_ids;
  std::vector<Group> source_groups;
  MatrixXd alpha;  // epochs x J, row e is epoch e + 1

  friend bool operator==(const Trajectory& x, const Trajectory& y);
};

Trajectory trajectory_of(const AdaptRecord& r);
void write_trajectory(std::ostream& out, const Trajectory& t);
Trajectory read_trajectory(std::istream& in);
void save_trajectory(const std::filesystem::path& path, const Trajectory& t);
Trajectory load_trajectory(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace wjdot::io

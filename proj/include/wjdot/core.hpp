#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace wjdot {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Errors. Everything thrown by the library derives from Error so callers
// that only care about "did it work" can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes or lengths that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf where a finite value is required, or a numerically invalid input
// such as a mass vector that does not sum to one.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A solver gave up (iteration cap). The message carries diagnostics.
class SolverError : public Error {
 public:
  using Error::Error;
};

// Malformed file content. line() is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Invalid experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Binary group tag attached to a source (and, for evaluation, a target).
// The library is agnostic about what the groups mean.
enum class Group : std::uint8_t { kA, kB, kUntagged };

std::string_view group_name(Group g);
// Accepts "A"/"B"/"untagged" (case-insensitive). Throws ParseError otherwise.
Group parse_group(std::string_view s);

// How the label part of the joint ground cost compares a predicted label
// distribution with a reference label distribution.
enum class LabelCost : std::uint8_t { kCrossEntropy, kSquaredL2 };

std::string_view label_cost_name(LabelCost c);
LabelCost parse_label_cost(std::string_view s);

// Floor applied to probabilities before taking a log.
inline constexpr double kLogFloor = 1e-12;

// One point of an empirical joint distribution over (embedding, label).
struct JointSample {
  VectorXd embedding;
  VectorXd label;  // probability vector over K classes

  friend bool operator==(const JointSample& x, const JointSample& y);
};

struct SourceDomain {
  std::string id;
  std::vector<JointSample> samples;  // labels are one-hot
  Group group = Group::kUntagged;

  std::size_t size() const { return samples.size(); }
  std::size_t dim() const;
  std::size_t num_classes() const;

  friend bool operator==(const SourceDomain&, const SourceDomain&) = default;
};

// Unlabelled adaptation set plus an optional labelled test set that only the
// evaluation code may look at.
struct TargetDomain {
  std::string id;
  std::vector<VectorXd> embeddings;
  std::vector<JointSample> test;
  Group group = Group::kUntagged;  // ground truth, evaluation only

  std::size_t dim() const;

  friend bool operator==(const TargetDomain& x, const TargetDomain& y);
};

// A point of the probability simplex over J sources.
class SimplexWeights {
 public:
  // Validates: entries in [0,1], sum within 1e-9 of 1. Throws NumericError.
  explicit SimplexWeights(VectorXd alpha);

  static SimplexWeights uniform(std::size_t j);
  static SimplexWeights vertex(std::size_t j, std::size_t index);

  const VectorXd& values() const { return alpha_; }
  std::size_t size() const { return static_cast<std::size_t>(alpha_.size()); }
  double operator[](std::size_t j) const { return alpha_[static_cast<Eigen::Index>(j)]; }

 private:
  VectorXd alpha_;
};

// Pooled per-sample masses realising the mixture sum_j alpha_j p_{S_j} with
// each source uniform over its own samples.
struct MixtureMasses {
  VectorXd masses;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_domain(const SourceDomain& domain);

MixtureMasses mixture_masses(std::span<const SourceDomain> sources,
                             const SimplexWeights& alpha);

// Same, from per-source sample counts only.
MixtureMasses mixture_masses(std::span<const std::size_t> counts,
                             const SimplexWeights& alpha);

// All source samples stacked row-wise, in source order.
struct PooledSamples {
  MatrixXd embeddings;                // n x d
  MatrixXd labels;                    // n x K
  std::vector<std::size_t> owner;     // source index of each row
  std::vector<std::size_t> counts;    // N_j
};

PooledSamples pool(std::span<const SourceDomain> sources);

MatrixXd stack_rows(std::span<const VectorXd> rows);
VectorXd one_hot(std::size_t k, std::size_t num_classes);
std::size_t argmax(const VectorXd& v);

bool all_finite(const MatrixXd& m);

}  // namespace wjdot

#include "wjdot/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace wjdot {

namespace {

bool same_vector(const VectorXd& x, const VectorXd& y) {
  return x.size() == y.size() && (x.size() == 0 || x == y);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

ParseError::ParseError(const std::string& what, std::size_t line)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

std::string_view group_name(Group g) {
  switch (g) {
    case Group::kA: return "A";
    case Group::kB: return "B";
    case Group::kUntagged: return "untagged";
  }
  return "untagged";
}

Group parse_group(std::string_view s) {
  const std::string l = lower(s);
  if (l == "a") return Group::kA;
  if (l == "b") return Group::kB;
  if (l == "untagged") return Group::kUntagged;
  throw ParseError("unknown group tag '" + std::string(s) + "'", 0);
}

std::string_view label_cost_name(LabelCost c) {
  return c == LabelCost::kCrossEntropy ? "cross_entropy" : "squared_l2";
}

LabelCost parse_label_cost(std::string_view s) {
  const std::string l = lower(s);
  if (l == "cross_entropy" || l == "ce") return LabelCost::kCrossEntropy;
  if (l == "squared_l2" || l == "l2") return LabelCost::kSquaredL2;
  throw ParseError("unknown label cost '" + std::string(s) + "'", 0);
}

bool operator==(const JointSample& x, const JointSample& y) {
  return same_vector(x.embedding, y.embedding) && same_vector(x.label, y.label);
}

bool operator==(const TargetDomain& x, const TargetDomain& y) {
  return x.id == y.id && x.group == y.group && x.test == y.test &&
         std::equal(x.embeddings.begin(), x.embeddings.end(), y.embeddings.begin(),
                    y.embeddings.end(), same_vector);
}

std::size_t SourceDomain::dim() const {
  return samples.empty() ? 0 : static_cast<std::size_t>(samples.front().embedding.size());
}

std::size_t SourceDomain::num_classes() const {
  return samples.empty() ? 0 : static_cast<std::size_t>(samples.front().label.size());
}

std::size_t TargetDomain::dim() const {
  return embeddings.empty() ? 0 : static_cast<std::size_t>(embeddings.front().size());
}

SimplexWeights::SimplexWeights(VectorXd alpha) : alpha_(std::move(alpha)) {
  if (alpha_.size() == 0) throw DimensionError("simplex weights must be nonempty");
  for (Eigen::Index j = 0; j < alpha_.size(); ++j) {
    const double v = alpha_[j];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw NumericError("simplex weight " + std::to_string(j) + " outside [0,1]: " +
                         std::to_string(v));
  }
  if (std::abs(alpha_.sum() - 1.0) > 1e-9)
    throw NumericError("simplex weights sum to " + std::to_string(alpha_.sum()));
}

SimplexWeights SimplexWeights::uniform(std::size_t j) {
  if (j == 0) throw DimensionError("simplex of dimension 0");
  return SimplexWeights(VectorXd::Constant(static_cast<Eigen::Index>(j), 1.0 / static_cast<double>(j)));
}

SimplexWeights SimplexWeights::vertex(std::size_t j, std::size_t index) {
  if (index >= j) throw DimensionError("vertex index out of range");
  VectorXd a = VectorXd::Zero(static_cast<Eigen::Index>(j));
  a[static_cast<Eigen::Index>(index)] = 1.0;
  return SimplexWeights(std::move(a));
}

ValidationReport validate_domain(const SourceDomain& domain) {
  ValidationReport report;
  if (domain.samples.empty()) {
    report.violations.push_back("empty domain");
    return report;
  }
  const auto d = domain.samples.front().embedding.size();
  const auto k = domain.samples.front().label.size();
  bool dim_reported = false, label_dim_reported = false, hot_reported = false,
       finite_reported = false;
  for (std::size_t i = 0; i < domain.samples.size(); ++i) {
    const auto& s = domain.samples[i];
    if (s.embedding.size() != d && !dim_reported) {
      report.violations.push_back("dimension mismatch at sample " + std::to_string(i));
      dim_reported = true;
    }
    if (s.label.size() != k && !label_dim_reported) {
      report.violations.push_back("label dimension mismatch at sample " + std::to_string(i));
      label_dim_reported = true;
    }
    if (!s.embedding.allFinite() && !finite_reported) {
      report.violations.push_back("non-finite embedding at sample " + std::to_string(i));
      finite_reported = true;
    }
    const bool one_hot_label =
        s.label.size() > 0 && (s.label.array() == 0.0 || s.label.array() == 1.0).all() &&
        s.label.sum() == 1.0;
    if (!one_hot_label && !hot_reported) {
      report.violations.push_back("label not one-hot at sample " + std::to_string(i));
      hot_reported = true;
    }
  }
  return report;
}

MixtureMasses mixture_masses(std::span<const std::size_t> counts, const SimplexWeights& alpha) {
  if (counts.size() != alpha.size())
    throw DimensionError("alpha has length " + std::to_string(alpha.size()) + " but there are " +
                         std::to_string(counts.size()) + " sources");
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  MixtureMasses out{VectorXd(static_cast<Eigen::Index>(total))};
  Eigen::Index pos = 0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] == 0) throw DimensionError("source " + std::to_string(j) + " is empty");
    const double m = alpha[j] / static_cast<double>(counts[j]);
    out.masses.segment(pos, static_cast<Eigen::Index>(counts[j])).setConstant(m);
    pos += static_cast<Eigen::Index>(counts[j]);
  }
  return out;
}

MixtureMasses mixture_masses(std::span<const SourceDomain> sources, const SimplexWeights& alpha) {
  std::vector<std::size_t> counts;
  counts.reserve(sources.size());
  for (const auto& s : sources) counts.push_back(s.size());
  return mixture_masses(counts, alpha);
}

PooledSamples pool(std::span<const SourceDomain> sources) {
  PooledSamples out;
  std::size_t n = 0;
  for (const auto& s : sources) n += s.size();
  if (n == 0) throw DimensionError("no source samples to pool");
  std::size_t d = 0, k = 0;
  for (const auto& s : sources) {
    if (s.size() > 0) {
      d = s.dim();
      k = s.num_classes();
      break;
    }
  }
  out.embeddings.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  out.labels.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  out.owner.reserve(n);
  Eigen::Index row = 0;
  for (std::size_t j = 0; j < sources.size(); ++j) {
    out.counts.push_back(sources[j].size());
    for (const auto& sample : sources[j].samples) {
      if (static_cast<std::size_t>(sample.embedding.size()) != d ||
          static_cast<std::size_t>(sample.label.size()) != k)
        throw DimensionError("source '" + sources[j].id + "' has inconsistent dimensions");
      out.embeddings.row(row) = sample.embedding.transpose();
      out.labels.row(row) = sample.label.transpose();
      out.owner.push_back(j);
      ++row;
    }
  }
  return out;
}

MatrixXd stack_rows(std::span<const VectorXd> rows) {
  if (rows.empty()) return MatrixXd(0, 0);
  const auto d = rows.front().size();
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw DimensionError("rows have inconsistent dimension");
    out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  return out;
}

VectorXd one_hot(std::size_t k, std::size_t num_classes) {
  if (k >= num_classes) throw DimensionError("class index out of range");
  VectorXd v = VectorXd::Zero(static_cast<Eigen::Index>(num_classes));
  v[static_cast<Eigen::Index>(k)] = 1.0;
  return v;
}

std::size_t argmax(const VectorXd& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<std::size_t>(best);
}

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

}  // namespace wjdot

#include <cmath>
#include <string>

#include "wjdot/ot.hpp"

namespace wjdot::ot {

void CostParams::validate() const {
  if (!(beta_g >= 0.0) || !(beta_y >= 0.0) || !std::isfinite(beta_g) || !std::isfinite(beta_y))
    throw NumericError("cost weights must be finite and nonnegative");
  if (beta_g + beta_y <= 0.0) throw NumericError("beta_g + beta_y must be positive");
}

CostMatrix joint_cost_matrix(const MatrixXd& target_embeddings, const MatrixXd& target_labels,
                             const MatrixXd& source_embeddings, const MatrixXd& source_labels,
                             const CostParams& params) {
  params.validate();
  const Eigen::Index nt = target_embeddings.rows(), ns = source_embeddings.rows();
  if (target_labels.rows() != nt || source_labels.rows() != ns)
    throw DimensionError("embedding and label row counts differ");
  if (target_embeddings.cols() != source_embeddings.cols())
    throw DimensionError("embedding dimensions differ: " + std::to_string(target_embeddings.cols()) +
                         " vs " + std::to_string(source_embeddings.cols()));
  if (target_labels.cols() != source_labels.cols())
    throw DimensionError("label dimensions differ: " + std::to_string(target_labels.cols()) + " vs " +
                         std::to_string(source_labels.cols()));
  if (target_embeddings.hasNaN() || target_labels.hasNaN() || source_embeddings.hasNaN() ||
      source_labels.hasNaN())
    throw NumericError("NaN in cost inputs");

  CostMatrix cost{MatrixXd(nt, ns)};
  // Column-wise so every entry is computed independently of the others.
  for (Eigen::Index i = 0; i < ns; ++i)
    for (Eigen::Index t = 0; t < nt; ++t)
      cost.entries(t, i) =
          params.beta_g * (target_embeddings.row(t) - source_embeddings.row(i)).squaredNorm();

  if (params.beta_y > 0.0) {
    if (params.label_cost == LabelCost::kCrossEntropy) {
      const MatrixXd neg_log = -target_labels.array().max(kLogFloor).log().matrix();
      cost.entries.noalias() += params.beta_y * (neg_log * source_labels.transpose());
    } else {
      for (Eigen::Index i = 0; i < ns; ++i)
        for (Eigen::Index t = 0; t < nt; ++t)
          cost.entries(t, i) +=
              params.beta_y * (target_labels.row(t) - source_labels.row(i)).squaredNorm();
    }
  }
  return cost;
}

CostMatrix joint_cost_matrix(std::span<const JointSample> target,
                             std::span<const JointSample> pooled_sources, const CostParams& params) {
  auto split = [](std::span<const JointSample> s, MatrixXd& g, MatrixXd& y) {
    if (s.empty()) {
      g.resize(0, 0);
      y.resize(0, 0);
      return;
    }
    const auto d = s.front().embedding.size(), k = s.front().label.size();
    g.resize(static_cast<Eigen::Index>(s.size()), d);
    y.resize(static_cast<Eigen::Index>(s.size()), k);
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i].embedding.size() != d || s[i].label.size() != k)
        throw DimensionError("joint samples have inconsistent dimensions");
      g.row(static_cast<Eigen::Index>(i)) = s[i].embedding.transpose();
      y.row(static_cast<Eigen::Index>(i)) = s[i].label.transpose();
    }
  };
  MatrixXd tg, ty, sg, sy;
  split(target, tg, ty);
  split(pooled_sources, sg, sy);
  if (target.empty() || pooled_sources.empty()) {
    params.validate();
    return CostMatrix{MatrixXd(static_cast<Eigen::Index>(target.size()),
                               static_cast<Eigen::Index>(pooled_sources.size()))};
  }
  return joint_cost_matrix(tg, ty, sg, sy, params);
}

}  // namespace wjdot::ot

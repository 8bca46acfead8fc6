#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "wjdot/ot.hpp"

namespace wjdot::ot::detail {

inline void check_masses(const VectorXd& m, const char* name) {
  if (m.size() == 0) throw DimensionError(std::string(name) + " is empty");
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (!std::isfinite(m[i]) || m[i] < 0.0)
      throw NumericError(std::string(name) + " has an invalid mass at " + std::to_string(i));
  if (std::abs(m.sum() - 1.0) > 1e-9)
    throw NumericError(std::string(name) + " masses sum to " + std::to_string(m.sum()) +
                       ", expected 1");
}

inline void check_problem(const CostMatrix& cost, const VectorXd& a, const VectorXd& b) {
  if (cost.rows() != a.size() || cost.cols() != b.size())
    throw DimensionError("cost is " + std::to_string(cost.rows()) + "x" + std::to_string(cost.cols()) +
                         " but marginals have sizes " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  check_masses(a, "target marginal");
  check_masses(b, "source marginal");
  if (!cost.entries.allFinite()) throw NumericError("cost matrix has non-finite entries");
}

inline std::vector<Eigen::Index> support(const VectorXd& m) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (m[i] > 0.0) idx.push_back(i);
  return idx;
}

}  // namespace wjdot::ot::detail

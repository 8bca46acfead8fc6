#pragma once

#include <optional>
#include <span>

#include "wjdot/core.hpp"
#include "wjdot/nn.hpp"

// Discrete optimal transport between a target point cloud (rows) and the
// pooled source samples (columns).
namespace wjdot::ot {

struct CostParams {
  double beta_g = 1.0;  // weight of the squared embedding distance
  double beta_y = 1.0;  // weight of the label term
  LabelCost label_cost = LabelCost::kCrossEntropy;

  void validate() const;
};

// entries(t, i): cost between target sample t and pooled source sample i.
struct CostMatrix {
  MatrixXd entries;

  Eigen::Index rows() const { return entries.rows(); }
  Eigen::Index cols() const { return entries.cols(); }
};

struct Coupling {
  MatrixXd plan;
  double value = 0.0;  // <plan, C>
};

// Potentials of the marginal constraints, centred so that <psi, b> = 0.
struct DualPotentials {
  VectorXd phi;  // per target sample
  VectorXd psi;  // per pooled source sample
};

// beta_g |g_t - g_i|^2 + beta_y L(yhat_t, y_i), matrix form. Rows of
// target_labels are predictions, rows of source_labels references.
CostMatrix joint_cost_matrix(const MatrixXd& target_embeddings, const MatrixXd& target_labels,
                             const MatrixXd& source_embeddings, const MatrixXd& source_labels,
                             const CostParams& params);

CostMatrix joint_cost_matrix(std::span<const JointSample> target,
                             std::span<const JointSample> pooled_sources, const CostParams& params);

struct ExactOptions {
  // 0 picks a cap proportional to the problem size.
  std::size_t max_pivots = 0;
};

struct ExactResult {
  Coupling coupling;
  DualPotentials duals;
  std::size_t pivots = 0;
};

// Transportation simplex. Zero-mass rows and columns are removed before
// solving and come back as zero rows/columns of the plan. Throws
// NumericError on invalid marginals and SolverError past the pivot cap.
ExactResult solve_exact(const CostMatrix& cost, const VectorXd& a, const VectorXd& b,
                        const ExactOptions& options = {});

struct SinkhornOptions {
  double epsilon = 0.05;
  double tol = 1e-6;
  int max_iter = 10000;
};

// Entropic OT, min <P, C> + eps KL(P | a b^T), iterated on log-potentials:
//   P_ti = a_t b_i exp((phi_t + psi_i - C_ti) / eps).
// Every returned plan has exact row sums; column sums are within tol when
// converged. Non-convergence is reported, not thrown.
struct SinkhornResult {
  Coupling coupling;
  DualPotentials duals;
  double regularized_value = 0.0;  // <phi, a> + <psi, b>
  double marginal_error = 0.0;
  int iterations = 0;
  bool converged = false;
};

SinkhornResult solve_sinkhorn(const CostMatrix& cost, const VectorXd& a, const VectorXd& b,
                              const SinkhornOptions& options = {},
                              const VectorXd* warm_phi = nullptr);

// <P, C> + eps KL(P | a b^T) for an arbitrary nonnegative plan.
double entropic_primal_value(const MatrixXd& plan, const CostMatrix& cost, const VectorXd& a,
                             const VectorXd& b, double epsilon);

// Max absolute deviation of the plan's row and column sums from (a, b).
double marginal_violation(const MatrixXd& plan, const VectorXd& a, const VectorXd& b);

enum class SolverMode { kExact, kEntropic };

struct WassersteinOptions {
  SolverMode mode = SolverMode::kEntropic;
  SinkhornOptions sinkhorn{};
  ExactOptions exact{};
};

struct WassersteinResult {
  double value = 0.0;           // objective: exact value, or regularized value
  double transport_cost = 0.0;  // <plan, C>
  Coupling coupling;
  DualPotentials duals;
  bool converged = true;
  int iterations = 0;
};

// Distance between the proxy target (embeddings paired with the
// classifier's predictions, uniform masses) and the alpha-mixture of the
// pooled sources.
WassersteinResult wasserstein(const MatrixXd& target_embeddings, const PooledSamples& sources,
                              const SimplexWeights& alpha, const nn::SoftmaxClassifier& classifier,
                              const CostParams& params, const WassersteinOptions& options = {});

// Same, taking the embeddings the classifier sees separately from the
// embeddings the ground cost compares (e.g. standardised copies).
WassersteinResult wasserstein(const MatrixXd& target_cost_embeddings,
                              const MatrixXd& target_classifier_embeddings,
                              const PooledSamples& sources, const SimplexWeights& alpha,
                              const nn::SoftmaxClassifier& classifier, const CostParams& params,
                              const WassersteinOptions& options = {});

// Solve with either solver given a ready cost matrix.
WassersteinResult solve(const CostMatrix& cost, const VectorXd& a, const VectorXd& b,
                        const WassersteinOptions& options, const VectorXd* warm_phi = nullptr);

}  // namespace wjdot::ot

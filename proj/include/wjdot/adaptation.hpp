#pragma once

#include <span>
#include <vector>

#include "wjdot/core.hpp"
#include "wjdot/nn.hpp"
#include "wjdot/ot.hpp"

// Joint minimisation of W(p_T^f, sum_j alpha_j p_{S_j}) over the target
// classifier f and the source weights alpha, with the extractor frozen.
namespace wjdot::adaptation {

struct AdaptConfig {
  ot::CostParams cost{};
  ot::SolverMode mode = ot::SolverMode::kEntropic;
  double epsilon = 0.05;
  int sinkhorn_max_iter = 10000;
  double sinkhorn_tol = 1e-6;
  int epochs = 100;
  int f_steps = 5;           // Adam steps on f per epoch, coupling held fixed
  double alpha_step = 1.0;   // initial mirror-descent step, halved on increase
  int max_halvings = 20;
  double tol = 1e-6;         // relative objective change that stops the loop
  nn::AdamOptions adam{};
  bool standardize = true;   // z-score embeddings for the ground cost
  bool record_trajectory = true;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double objective_after_f = 0.0;  // after the f block, before the alpha block
  double objective = 0.0;          // end of epoch
  double accepted_step = 0.0;      // 0 when no alpha update was accepted
  int halvings = 0;
  int solver_iterations = 0;       // summed over all solves in the epoch
};

struct AdaptResult {
  nn::SoftmaxClassifier classifier;
  SimplexWeights alpha = SimplexWeights::uniform(1);
  double initial_objective = 0.0;     // at (f0, uniform alpha)
  std::vector<double> objective_trace;  // one entry per completed epoch
  MatrixXd alpha_trajectory;            // epochs x J, empty if not recorded
  std::vector<EpochRecord> epochs;
  bool converged = false;
  int convergence_epoch = 0;  // last completed epoch
  bool solver_converged = true;  // false if any Sinkhorn solve hit max_iter
};

// Everything the loop needs, already in embedding space.
struct Problem {
  PooledSamples sources;       // embeddings as compared by the ground cost
  MatrixXd target_cost;        // target embeddings as compared by the ground cost
  MatrixXd target_features;    // target embeddings as seen by the classifier
};

// Standardisation statistics come from the pooled source embeddings and are
// applied to both sides.
Problem prepare(std::span<const SourceDomain> embedded_sources, const MatrixXd& target_embeddings,
                bool standardize);

// sum_{i in source j} psi_i / N_j.
VectorXd alpha_gradient(const ot::DualPotentials& duals, std::span<const std::size_t> counts);

// alpha'_j proportional to alpha_j exp(-step * grad_j).
SimplexWeights mirror_step(const SimplexWeights& alpha, const VectorXd& gradient, double step);

ot::WassersteinResult evaluate(const Problem& problem, const nn::SoftmaxClassifier& f,
                               const SimplexWeights& alpha, const AdaptConfig& config,
                               const VectorXd* warm_phi = nullptr);

double objective(const Problem& problem, const nn::SoftmaxClassifier& f,
                 const SimplexWeights& alpha, const AdaptConfig& config);

AdaptResult adapt(const Problem& problem, const nn::SoftmaxClassifier& f0,
                  const AdaptConfig& config);

// Input-space entry point: embeds sources and the unlabelled target set
// with the frozen extractor. The target's test set is never read.
AdaptResult adapt(std::span<const SourceDomain> sources, const TargetDomain& target,
                  const nn::MlpExtractor& extractor, const nn::SoftmaxClassifier& f0,
                  const AdaptConfig& config);

double objective(std::span<const SourceDomain> sources, const TargetDomain& target,
                 const nn::MlpExtractor& extractor, const nn::SoftmaxClassifier& f,
                 const SimplexWeights& alpha, const AdaptConfig& config);

// Maps every sample embedding through the extractor.
std::vector<SourceDomain> embed_sources(std::span<const SourceDomain> sources,
                                        const nn::MlpExtractor& extractor);

}  // namespace wjdot::adaptation

#include "wjdot/adaptation.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace wjdot::adaptation {

void AdaptConfig::validate() const {
  cost.validate();
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (sinkhorn_max_iter < 1) throw ConfigError("sinkhorn_max_iter must be at least 1");
  if (!(sinkhorn_tol > 0.0)) throw ConfigError("sinkhorn_tol must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (f_steps < 0) throw ConfigError("f_steps must be nonnegative");
  if (!(alpha_step >= 0.0) || !std::isfinite(alpha_step))
    throw ConfigError("alpha_step must be finite and nonnegative");
  if (max_halvings < 0) throw ConfigError("max_halvings must be nonnegative");
  if (!(tol >= 0.0)) throw ConfigError("tol must be nonnegative");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

std::vector<SourceDomain> embed_sources(std::span<const SourceDomain> sources,
                                        const nn::MlpExtractor& extractor) {
  std::vector<SourceDomain> out;
  out.reserve(sources.size());
  for (const auto& src : sources) {
    SourceDomain e{src.id, {}, src.group};
    if (src.size() > 0) {
      MatrixXd x(static_cast<Eigen::Index>(src.size()), static_cast<Eigen::Index>(src.dim()));
      for (std::size_t i = 0; i < src.size(); ++i)
        x.row(static_cast<Eigen::Index>(i)) = src.samples[i].embedding.transpose();
      const MatrixXd z = extractor.embed(x);
      e.samples.reserve(src.size());
      for (std::size_t i = 0; i < src.size(); ++i)
        e.samples.push_back({z.row(static_cast<Eigen::Index>(i)).transpose(), src.samples[i].label});
    }
    out.push_back(std::move(e));
  }
  return out;
}

Problem prepare(std::span<const SourceDomain> embedded_sources, const MatrixXd& target_embeddings,
                bool standardize) {
  if (embedded_sources.empty()) throw DimensionError("no source domains");
  for (const auto& s : embedded_sources) {
    const auto report = validate_domain(s);
    if (!report.ok()) throw DimensionError("source '" + s.id + "': " + report.violations.front());
  }
  if (target_embeddings.rows() == 0) throw DimensionError("target adaptation set is empty");
  Problem p;
  p.sources = pool(embedded_sources);
  if (target_embeddings.cols() != p.sources.embeddings.cols())
    throw DimensionError("target embedding dimension " + std::to_string(target_embeddings.cols()) +
                         " differs from source dimension " +
                         std::to_string(p.sources.embeddings.cols()));
  p.target_features = target_embeddings;
  p.target_cost = target_embeddings;
  if (standardize) {
    const Eigen::RowVectorXd mean = p.sources.embeddings.colwise().mean();
    const MatrixXd centred = p.sources.embeddings.rowwise() - mean;
    Eigen::RowVectorXd sd =
        (centred.colwise().squaredNorm() / static_cast<double>(centred.rows())).cwiseSqrt();
    for (Eigen::Index k = 0; k < sd.size(); ++k)
      if (!(sd[k] > 1e-12)) sd[k] = 1.0;
    // Unit total variance: E|z - mean|^2 = 1 over the pooled sources.
    sd *= std::sqrt(static_cast<double>(sd.size()));
    p.sources.embeddings = centred.array().rowwise() / sd.array();
    p.target_cost = (target_embeddings.rowwise() - mean).array().rowwise() / sd.array();
  }
  return p;
}

VectorXd alpha_gradient(const ot::DualPotentials& duals, std::span<const std::size_t> counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (static_cast<std::size_t>(duals.psi.size()) != total)
    throw DimensionError("dual potentials cover " + std::to_string(duals.psi.size()) +
                         " source samples, expected " + std::to_string(total));
  VectorXd grad(static_cast<Eigen::Index>(counts.size()));
  Eigen::Index pos = 0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    const auto n = static_cast<Eigen::Index>(counts[j]);
    if (n == 0) throw DimensionError("source " + std::to_string(j) + " is empty");
    grad[static_cast<Eigen::Index>(j)] = duals.psi.segment(pos, n).sum() / static_cast<double>(n);
    pos += n;
  }
  return grad;
}

SimplexWeights mirror_step(const SimplexWeights& alpha, const VectorXd& gradient, double step) {
  const VectorXd& a = alpha.values();
  if (gradient.size() != a.size()) throw DimensionError("gradient and alpha lengths differ");
  if (!gradient.allFinite()) throw NumericError("alpha gradient is not finite");
  if (!std::isfinite(step)) throw NumericError("mirror step is not finite");
  VectorXd logits(a.size());
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < a.size(); ++j) {
    logits[j] = a[j] > 0.0 ? std::log(a[j]) - step * gradient[j]
                           : -std::numeric_limits<double>::infinity();
    mx = std::max(mx, logits[j]);
  }
  VectorXd next(a.size());
  for (Eigen::Index j = 0; j < a.size(); ++j) next[j] = a[j] > 0.0 ? std::exp(logits[j] - mx) : 0.0;
  next /= next.sum();
  return SimplexWeights(std::move(next));
}

ot::WassersteinResult evaluate(const Problem& problem, const nn::SoftmaxClassifier& f,
                               const SimplexWeights& alpha, const AdaptConfig& config,
                               const VectorXd* warm_phi) {
  ot::WassersteinOptions options;
  options.mode = config.mode;
  options.sinkhorn = {config.epsilon, config.sinkhorn_tol, config.sinkhorn_max_iter};
  const MatrixXd predicted = f.predict_proba(problem.target_features);
  const ot::CostMatrix cost =
      ot::joint_cost_matrix(problem.target_cost, predicted, problem.sources.embeddings,
                            problem.sources.labels, config.cost);
  const MixtureMasses b = mixture_masses(problem.sources.counts, alpha);
  const auto nt = problem.target_cost.rows();
  const VectorXd a = VectorXd::Constant(nt, 1.0 / static_cast<double>(nt));
  ot::WassersteinResult r = ot::solve(cost, a, b.masses, options, warm_phi);
  if (!std::isfinite(r.value)) throw NumericError("transport objective is not finite");
  return r;
}

double objective(const Problem& problem, const nn::SoftmaxClassifier& f,
                 const SimplexWeights& alpha, const AdaptConfig& config) {
  return evaluate(problem, f, alpha, config).value;
}

AdaptResult adapt(const Problem& problem, const nn::SoftmaxClassifier& f0,
                  const AdaptConfig& config) {
  config.validate();
  const auto& counts = problem.sources.counts;
  const std::size_t j_count = counts.size();
  if (f0.input_dim() != static_cast<std::size_t>(problem.target_features.cols()))
    throw DimensionError("classifier input dimension does not match the embeddings");
  if (f0.num_classes() != static_cast<std::size_t>(problem.sources.labels.cols()))
    throw DimensionError("classifier class count does not match the source labels");

  AdaptResult result;
  result.classifier = f0;
  result.alpha = SimplexWeights::uniform(j_count);
  if (config.record_trajectory)
    result.alpha_trajectory.resize(0, static_cast<Eigen::Index>(j_count));

  nn::SoftmaxClassifier& f = result.classifier;
  SimplexWeights& alpha = result.alpha;
  VectorXd theta = f.parameters();
  nn::Adam adam(static_cast<std::size_t>(theta.size()), config.adam);

  ot::WassersteinResult state = evaluate(problem, f, alpha, config);
  result.solver_converged = state.converged;
  result.initial_objective = state.value;
  double previous = state.value;
  std::vector<VectorXd> rows;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;

    if (config.f_steps > 0 && config.cost.beta_y > 0.0) {
      const MatrixXd targets = config.cost.beta_y * (state.coupling.plan * problem.sources.labels);
      for (int s = 0; s < config.f_steps; ++s) {
        const nn::Gradients grads =
            nn::classifier_backward(f, problem.target_features, targets, config.cost.label_cost);
        adam.step(theta, grads.classifier);
        f.set_parameters(theta);
      }
      const VectorXd warm = state.duals.phi;
      state = evaluate(problem, f, alpha, config, &warm);
      result.solver_converged = result.solver_converged && state.converged;
      rec.solver_iterations += state.iterations;
    }
    rec.objective_after_f = state.value;

    if (j_count > 1 && config.alpha_step > 0.0) {
      const VectorXd grad = alpha_gradient(state.duals, counts);
      double step = config.alpha_step;
      const VectorXd warm = state.duals.phi;
      for (int h = 0; h <= config.max_halvings; ++h, step *= 0.5) {
        SimplexWeights candidate = mirror_step(alpha, grad, step);
        ot::WassersteinResult trial = evaluate(problem, f, candidate, config, &warm);
        rec.solver_iterations += trial.iterations;
        if (trial.value <= state.value) {
          result.solver_converged = result.solver_converged && trial.converged;
          alpha = std::move(candidate);
          state = std::move(trial);
          rec.accepted_step = step;
          rec.halvings = h;
          break;
        }
        rec.halvings = h + 1;
      }
    }
    rec.objective = state.value;
    result.objective_trace.push_back(state.value);
    result.epochs.push_back(rec);
    if (config.record_trajectory) rows.push_back(alpha.values());
    result.convergence_epoch = epoch;

    const double change = std::abs(previous - state.value) / std::max(std::abs(previous), 1e-12);
    previous = state.value;
    if (change < config.tol) {
      result.converged = true;
      break;
    }
  }

  if (config.record_trajectory) {
    result.alpha_trajectory.resize(static_cast<Eigen::Index>(rows.size()),
                                   static_cast<Eigen::Index>(j_count));
    for (std::size_t e = 0; e < rows.size(); ++e)
      result.alpha_trajectory.row(static_cast<Eigen::Index>(e)) = rows[e].transpose();
  }
  return result;
}

namespace {

Problem embed_problem(std::span<const SourceDomain> sources, const TargetDomain& target,
                      const nn::MlpExtractor& extractor, bool standardize) {
  if (target.embeddings.empty()) throw DimensionError("target adaptation set is empty");
  const auto embedded = embed_sources(sources, extractor);
  const MatrixXd z = extractor.embed(stack_rows(target.embeddings));
  return prepare(embedded, z, standardize);
}

}  // namespace

AdaptResult adapt(std::span<const SourceDomain> sources, const TargetDomain& target,
                  const nn::MlpExtractor& extractor, const nn::SoftmaxClassifier& f0,
                  const AdaptConfig& config) {
  return adapt(embed_problem(sources, target, extractor, config.standardize), f0, config);
}

double objective(std::span<const SourceDomain> sources, const TargetDomain& target,
                 const nn::MlpExtractor& extractor, const nn::SoftmaxClassifier& f,
                 const SimplexWeights& alpha, const AdaptConfig& config) {
  return objective(embed_problem(sources, target, extractor, config.standardize), f, alpha, config);
}

}  // namespace wjdot::adaptation

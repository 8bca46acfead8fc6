#include <algorithm>
#include <cmath>
#include <limits>

#include "ot_support.hpp"

namespace wjdot::ot {

namespace {

// -eps * log sum_k exp(logw_k + (pot_k - c_k) / eps)
double soft_min(const double* c, const VectorXd& logw, const VectorXd& pot, double eps,
                double* scratch) {
  const Eigen::Index n = logw.size();
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    scratch[k] = logw[k] + (pot[k] - c[k]) / eps;
    mx = std::max(mx, scratch[k]);
  }
  double s = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) s += std::exp(scratch[k] - mx);
  return -eps * (mx + std::log(s));
}

}  // namespace

SinkhornResult solve_sinkhorn(const CostMatrix& cost, const VectorXd& a, const VectorXd& b,
                              const SinkhornOptions& options, const VectorXd* warm_phi) {
  if (!(options.epsilon > 0.0) || !std::isfinite(options.epsilon))
    throw NumericError("epsilon must be positive");
  if (!(options.tol > 0.0)) throw NumericError("tolerance must be positive");
  if (options.max_iter < 1) throw NumericError("max_iter must be at least 1");
  detail::check_problem(cost, a, b);
  if (warm_phi != nullptr && warm_phi->size() != a.size())
    throw DimensionError("warm-start potential has the wrong length");

  const double eps = options.epsilon;
  const auto rows = detail::support(a);
  const auto cols = detail::support(b);
  const auto n = static_cast<Eigen::Index>(rows.size()), m = static_cast<Eigen::Index>(cols.size());

  MatrixXd c(n, m);  // columns contiguous: psi update
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) c(i, j) = cost.entries(rows[i], cols[j]);
  const MatrixXd ct = c.transpose();  // phi update
  VectorXd loga(n), logb(m), sa(n), sb(m);
  for (Eigen::Index i = 0; i < n; ++i) {
    sa[i] = a[rows[i]];
    loga[i] = std::log(sa[i]);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    sb[j] = b[cols[j]];
    logb[j] = std::log(sb[j]);
  }

  VectorXd phi = VectorXd::Zero(n), psi(m);
  if (warm_phi != nullptr)
    for (Eigen::Index i = 0; i < n; ++i) phi[i] = (*warm_phi)[rows[i]];
  std::vector<double> scratch(static_cast<std::size_t>(std::max(n, m)));

  auto log_update_psi = [&]() {
    for (Eigen::Index j = 0; j < m; ++j) psi[j] = soft_min(c.col(j).data(), loga, phi, eps, scratch.data());
  };
  auto log_update_phi = [&]() {
    for (Eigen::Index i = 0; i < n; ++i) phi[i] = soft_min(ct.col(i).data(), logb, psi, eps, scratch.data());
  };

  // Scaling iterations on a kernel with the potentials absorbed:
  //   P = diag(a u) G diag(b v),  G_ij = exp((phi_i + psi_j - C_ij) / eps).
  // Whenever u or v leave [e^-kAbsorb, e^kAbsorb] they are folded back into
  // (phi, psi) and G is rebuilt from log-domain updates.
  constexpr double kAbsorb = 50.0;
  SinkhornResult out;
  MatrixXd kernel(n, m);
  const double lo = std::exp(-kAbsorb), hi = std::exp(kAbsorb);
  VectorXd u(n), v(m), colmass(m), u_next(n), v_next(m), bv(m);
  double err = std::numeric_limits<double>::infinity();
  int it = 0;
  bool done = false;
  while (!done) {
    log_update_psi();
    log_update_phi();
    for (Eigen::Index j = 0; j < m; ++j)
      kernel.col(j) = ((phi.array() + psi[j] - c.col(j).array()) / eps).exp();
    u.setOnes();
    v.setOnes();
    for (;;) {
      ++it;
      // Row sums are exact here; column sums are b_j v_j colmass_j.
      colmass.noalias() = kernel.transpose() * (sa.array() * u.array()).matrix();
      err = (sb.array() * (v.array() * colmass.array() - 1.0).abs()).maxCoeff();
      if (!std::isfinite(err)) err = std::numeric_limits<double>::infinity();
      if (err < options.tol) {
        out.converged = true;
        done = true;
        break;
      }
      if (it >= options.max_iter) {
        done = true;
        break;
      }
      v_next = colmass.cwiseInverse();
      bv = sb.cwiseProduct(v_next);
      u_next.noalias() = kernel * bv;
      u_next = u_next.cwiseInverse();
      const bool finite = v_next.allFinite() && u_next.allFinite() &&
                          (v_next.array() > 0.0).all() && (u_next.array() > 0.0).all();
      if (finite) {
        u.swap(u_next);
        v.swap(v_next);
      }
      const bool in_range = finite && u.minCoeff() > lo && u.maxCoeff() < hi && v.minCoeff() > lo &&
                            v.maxCoeff() < hi;
      if (!in_range) {
        phi.array() += eps * u.array().log();
        psi.array() += eps * v.array().log();
        break;
      }
    }
  }
  phi.array() += eps * u.array().log();
  psi.array() += eps * v.array().log();
  out.iterations = it;

  // Full-length potentials; zero-mass entries get the same soft c-transform.
  VectorXd phi_full(cost.rows()), psi_full(cost.cols());
  std::vector<bool> row_in(static_cast<std::size_t>(cost.rows()), false),
      col_in(static_cast<std::size_t>(cost.cols()), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    phi_full[rows[i]] = phi[i];
    row_in[static_cast<std::size_t>(rows[i])] = true;
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    psi_full[cols[j]] = psi[j];
    col_in[static_cast<std::size_t>(cols[j])] = true;
  }
  {
    VectorXd column(n);
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
      if (col_in[static_cast<std::size_t>(j)]) continue;
      for (Eigen::Index i = 0; i < n; ++i) column[i] = cost.entries(rows[i], j);
      psi_full[j] = soft_min(column.data(), loga, phi, eps, scratch.data());
    }
    VectorXd row(m);
    for (Eigen::Index i = 0; i < cost.rows(); ++i) {
      if (row_in[static_cast<std::size_t>(i)]) continue;
      for (Eigen::Index j = 0; j < m; ++j) row[j] = cost.entries(i, cols[j]);
      phi_full[i] = soft_min(row.data(), logb, psi, eps, scratch.data());
    }
  }

  out.coupling.plan = MatrixXd::Zero(cost.rows(), cost.cols());
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      out.coupling.plan(rows[i], cols[j]) =
          std::exp(loga[i] + logb[j] + (phi[i] + psi[j] - c(i, j)) / eps);
  out.coupling.value = (out.coupling.plan.array() * cost.entries.array()).sum();
  out.regularized_value = phi.dot(sa) + psi.dot(sb);
  out.marginal_error = marginal_violation(out.coupling.plan, a, b);

  const double shift = psi_full.dot(b);
  out.duals.phi = phi_full.array() + shift;
  out.duals.psi = psi_full.array() - shift;
  return out;
}

double entropic_primal_value(const MatrixXd& plan, const CostMatrix& cost, const VectorXd& a,
                             const VectorXd& b, double epsilon) {
  if (plan.rows() != cost.rows() || plan.cols() != cost.cols() || a.size() != plan.rows() ||
      b.size() != plan.cols())
    throw DimensionError("plan, cost and marginals disagree in shape");
  double value = 0.0;
  for (Eigen::Index j = 0; j < plan.cols(); ++j)
    for (Eigen::Index i = 0; i < plan.rows(); ++i) {
      const double p = plan(i, j);
      value += p * cost.entries(i, j);
      if (p > 0.0) value += epsilon * (p * std::log(p / (a[i] * b[j])) - p);
      value += epsilon * a[i] * b[j];
    }
  return value;
}

double marginal_violation(const MatrixXd& plan, const VectorXd& a, const VectorXd& b) {
  const double r = (plan.rowwise().sum() - a).cwiseAbs().maxCoeff();
  const double c = (plan.colwise().sum().transpose() - b).cwiseAbs().maxCoeff();
  return std::max(r, c);
}

WassersteinResult solve(const CostMatrix& cost, const VectorXd& a, const VectorXd& b,
                        const WassersteinOptions& options, const VectorXd* warm_phi) {
  WassersteinResult out;
  if (options.mode == SolverMode::kExact) {
    ExactResult r = solve_exact(cost, a, b, options.exact);
    out.value = r.coupling.value;
    out.transport_cost = r.coupling.value;
    out.coupling = std::move(r.coupling);
    out.duals = std::move(r.duals);
    out.iterations = static_cast<int>(r.pivots);
  } else {
    SinkhornResult r = solve_sinkhorn(cost, a, b, options.sinkhorn, warm_phi);
    out.value = r.regularized_value;
    out.transport_cost = r.coupling.value;
    out.coupling = std::move(r.coupling);
    out.duals = std::move(r.duals);
    out.converged = r.converged;
    out.iterations = r.iterations;
  }
  return out;
}

WassersteinResult wasserstein(const MatrixXd& target_cost_embeddings,
                              const MatrixXd& target_classifier_embeddings,
                              const PooledSamples& sources, const SimplexWeights& alpha,
                              const nn::SoftmaxClassifier& classifier, const CostParams& params,
                              const WassersteinOptions& options) {
  if (target_cost_embeddings.rows() == 0) throw DimensionError("target has no samples");
  if (target_cost_embeddings.rows() != target_classifier_embeddings.rows())
    throw DimensionError("target embedding copies have different sample counts");
  const MixtureMasses b = mixture_masses(sources.counts, alpha);
  const MatrixXd predicted = classifier.predict_proba(target_classifier_embeddings);
  const CostMatrix cost = joint_cost_matrix(target_cost_embeddings, predicted, sources.embeddings,
                                            sources.labels, params);
  const auto nt = target_cost_embeddings.rows();
  const VectorXd a = VectorXd::Constant(nt, 1.0 / static_cast<double>(nt));
  return solve(cost, a, b.masses, options);
}

WassersteinResult wasserstein(const MatrixXd& target_embeddings, const PooledSamples& sources,
                              const SimplexWeights& alpha, const nn::SoftmaxClassifier& classifier,
                              const CostParams& params, const WassersteinOptions& options) {
  return wasserstein(target_embeddings, target_embeddings, sources, alpha, classifier, params,
                     options);
}

}  // namespace wjdot::ot

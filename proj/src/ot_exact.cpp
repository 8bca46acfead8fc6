#include <algorithm>
#include <limits>
#include <sstream>

#include "ot_support.hpp"

namespace wjdot::ot {

namespace {

// Transportation simplex on a spanning-tree basis of n + m - 1 cells.
// Nodes 0..n-1 are rows, n..n+m-1 are columns.
class TransportationSimplex {
 public:
  TransportationSimplex(const MatrixXd& cost, const VectorXd& supply, const VectorXd& demand)
      : c_(cost),
        n_(cost.rows()),
        m_(cost.cols()),
        adj_(static_cast<std::size_t>(n_ + m_)),
        u_(VectorXd::Zero(n_)),
        v_(VectorXd::Zero(m_)),
        parent_(static_cast<std::size_t>(n_ + m_)),
        seen_(static_cast<std::size_t>(n_ + m_), 0) {
    north_west_corner(supply, demand);
    const double scale = std::max(1.0, c_.cwiseAbs().maxCoeff());
    tol_ = 1e-12 * scale;
  }

  std::size_t run(std::size_t max_pivots) {
    std::size_t pivots = 0;
    for (;;) {
      compute_potentials();
      Eigen::Index er = -1, ec = -1;
      double best = -tol_;
      for (Eigen::Index j = 0; j < m_; ++j) {
        const double vj = v_[j];
        const double* col = c_.col(j).data();
        for (Eigen::Index i = 0; i < n_; ++i) {
          const double rc = col[i] - u_[i] - vj;
          if (rc < best) {
            best = rc;
            er = i;
            ec = j;
          }
        }
      }
      if (er < 0) return pivots;
      if (pivots == max_pivots) {
        std::ostringstream msg;
        msg << "transportation simplex hit the pivot cap (" << max_pivots << ") on a " << n_ << "x"
            << m_ << " problem; most negative reduced cost " << best;
        throw SolverError(msg.str());
      }
      pivot(er, ec);
      ++pivots;
    }
  }

  MatrixXd plan() const {
    MatrixXd p = MatrixXd::Zero(n_, m_);
    for (const auto& cell : cells_) p(cell.r, cell.c) += cell.flow;
    return p;
  }

  const VectorXd& row_potentials() const { return u_; }
  const VectorXd& col_potentials() const { return v_; }

 private:
  struct Cell {
    Eigen::Index r, c;
    double flow;
  };

  std::size_t col_node(Eigen::Index c) const { return static_cast<std::size_t>(n_ + c); }

  void add_cell(Eigen::Index r, Eigen::Index c, double flow, std::size_t slot) {
    if (slot == cells_.size())
      cells_.push_back({r, c, flow});
    else
      cells_[slot] = {r, c, flow};
    adj_[static_cast<std::size_t>(r)].push_back(slot);
    adj_[col_node(c)].push_back(slot);
  }

  void north_west_corner(const VectorXd& supply, const VectorXd& demand) {
    Eigen::Index i = 0, j = 0;
    double rs = supply[0], cs = demand[0];
    for (;;) {
      const double f = std::max(0.0, std::min(rs, cs));
      add_cell(i, j, f, cells_.size());
      rs -= f;
      cs -= f;
      if (i == n_ - 1 && j == m_ - 1) break;
      const bool move_row = (j == m_ - 1) || (i < n_ - 1 && rs <= cs);
      if (move_row) {
        ++i;
        rs = supply[i];
      } else {
        ++j;
        cs = demand[j];
      }
    }
  }

  void compute_potentials() {
    ++stamp_;
    std::vector<std::size_t> stack{0};
    seen_[0] = stamp_;
    u_[0] = 0.0;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t id : adj_[node]) {
        const Cell& cell = cells_[id];
        const auto rn = static_cast<std::size_t>(cell.r), cn = col_node(cell.c);
        const std::size_t other = node == rn ? cn : rn;
        if (seen_[other] == stamp_) continue;
        seen_[other] = stamp_;
        if (other == cn)
          v_[cell.c] = c_(cell.r, cell.c) - u_[cell.r];
        else
          u_[cell.r] = c_(cell.r, cell.c) - v_[cell.c];
        stack.push_back(other);
      }
    }
  }

  void pivot(Eigen::Index er, Eigen::Index ec) {
    // Tree path from row er to column ec.
    ++stamp_;
    const auto start = static_cast<std::size_t>(er), goal = col_node(ec);
    std::vector<std::size_t> stack{start};
    seen_[start] = stamp_;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      if (node == goal) break;
      for (std::size_t id : adj_[node]) {
        const Cell& cell = cells_[id];
        const auto rn = static_cast<std::size_t>(cell.r), cn = col_node(cell.c);
        const std::size_t other = node == rn ? cn : rn;
        if (seen_[other] == stamp_) continue;
        seen_[other] = stamp_;
        parent_[other] = id;
        stack.push_back(other);
      }
    }
    // Walk back from the column: signs alternate -, +, -, ..., -.
    path_.clear();
    for (std::size_t node = goal; node != start;) {
      const std::size_t id = parent_[node];
      path_.push_back(id);
      const Cell& cell = cells_[id];
      const auto rn = static_cast<std::size_t>(cell.r);
      node = node == rn ? col_node(cell.c) : rn;
    }
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leaving = path_.front();
    for (std::size_t k = 0; k < path_.size(); k += 2) {
      if (cells_[path_[k]].flow < theta) {
        theta = cells_[path_[k]].flow;
        leaving = path_[k];
      }
    }
    for (std::size_t k = 0; k < path_.size(); ++k) {
      Cell& cell = cells_[path_[k]];
      cell.flow = k % 2 == 0 ? std::max(0.0, cell.flow - theta) : cell.flow + theta;
    }
    const Cell old = cells_[leaving];
    auto drop = [&](std::size_t node) {
      auto& list = adj_[node];
      list.erase(std::find(list.begin(), list.end(), leaving));
    };
    drop(static_cast<std::size_t>(old.r));
    drop(col_node(old.c));
    add_cell(er, ec, theta, leaving);
  }

  const MatrixXd& c_;
  Eigen::Index n_, m_;
  std::vector<Cell> cells_;
  std::vector<std::vector<std::size_t>> adj_;
  VectorXd u_, v_;
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> seen_;
  std::vector<std::size_t> path_;
  std::size_t stamp_ = 0;
  double tol_ = 0.0;
};

}  // namespace

ExactResult solve_exact(const CostMatrix& cost, const VectorXd& a, const VectorXd& b,
                        const ExactOptions& options) {
  detail::check_problem(cost, a, b);
  const auto rows = detail::support(a);
  const auto cols = detail::support(b);
  const auto n = static_cast<Eigen::Index>(rows.size()), m = static_cast<Eigen::Index>(cols.size());

  MatrixXd sub(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) sub(i, j) = cost.entries(rows[i], cols[j]);
  VectorXd sa(n), sb(m);
  for (Eigen::Index i = 0; i < n; ++i) sa[i] = a[rows[i]];
  for (Eigen::Index j = 0; j < m; ++j) sb[j] = b[cols[j]];
  sb *= sa.sum() / sb.sum();

  TransportationSimplex simplex(sub, sa, sb);
  const std::size_t cap =
      options.max_pivots > 0 ? options.max_pivots : 1000 + 100 * static_cast<std::size_t>(n + m);

  ExactResult out;
  out.pivots = simplex.run(cap);
  const MatrixXd p = simplex.plan();

  out.coupling.plan = MatrixXd::Zero(cost.rows(), cost.cols());
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) out.coupling.plan(rows[i], cols[j]) = p(i, j);
  out.coupling.value = (out.coupling.plan.array() * cost.entries.array()).sum();

  // Potentials on the support; c-transforms extend them to zero-mass entries.
  const double inf = std::numeric_limits<double>::infinity();
  VectorXd phi = VectorXd::Constant(cost.rows(), inf), psi = VectorXd::Constant(cost.cols(), inf);
  std::vector<bool> row_in(static_cast<std::size_t>(cost.rows()), false),
      col_in(static_cast<std::size_t>(cost.cols()), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    phi[rows[i]] = simplex.row_potentials()[i];
    row_in[static_cast<std::size_t>(rows[i])] = true;
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    psi[cols[j]] = simplex.col_potentials()[j];
    col_in[static_cast<std::size_t>(cols[j])] = true;
  }
  for (Eigen::Index j = 0; j < cost.cols(); ++j) {
    if (col_in[static_cast<std::size_t>(j)]) continue;
    for (Eigen::Index i : rows) psi[j] = std::min(psi[j], cost.entries(i, j) - phi[i]);
  }
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    if (row_in[static_cast<std::size_t>(i)]) continue;
    for (Eigen::Index j = 0; j < cost.cols(); ++j) phi[i] = std::min(phi[i], cost.entries(i, j) - psi[j]);
  }
  const double shift = psi.dot(b);
  out.duals.phi = phi.array() + shift;
  out.duals.psi = psi.array() - shift;
  return out;
}

}  // namespace wjdot::ot

#pragma once

// Dense two-phase primal simplex with Bland's anti-cycling rule, for the
// small linear programs arising from threshold-inequality systems. Solves
//
//   minimize c^T x   subject to  A x = b,  x >= 0
//
// and reports the optimum, an optimal basic solution, and the dual
// multipliers of the equality rows (used for feasibility certificates).

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace desclab {

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
  LpStatus status = LpStatus::optimal;
  Eigen::VectorXd x;  // primal solution (size = #columns), zero if not optimal
  Eigen::VectorXd y;  // equality-row multipliers, c_B^T B^{-1}
  double objective = 0.0;
};

namespace detail {

class SimplexTableau {
 public:
  // After phase 1 the artificial columns are forbidden from re-entering.
  SimplexTableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& b)
      : m_(static_cast<int>(A.rows())), n_(static_cast<int>(A.cols())) {
    T_.resize(m_, n_ + m_ + 1);
    T_.block(0, 0, m_, n_) = A;
    T_.col(n_ + m_) = b;
    for (int i = 0; i < m_; ++i) {
      if (T_(i, n_ + m_) < 0.0) {
        T_.row(i).head(n_) = -T_.row(i).head(n_);
        T_(i, n_ + m_) = -T_(i, n_ + m_);
      }
    }
    T_.block(0, n_, m_, m_) = Eigen::MatrixXd::Identity(m_, m_);
    basis_.resize(m_);
    for (int i = 0; i < m_; ++i) basis_[i] = n_ + i;
  }

  // Minimize cost over the current feasible region. `cost` has one entry per
  // tableau column (artificials included). Returns false on unboundedness.
  bool minimize(const Eigen::VectorXd& cost, bool allow_artificial) {
    constexpr double tol = 1e-9;
    const int ncols = n_ + m_;
    for (int iter = 0; iter < 100000; ++iter) {
      // The tableau is kept row-reduced, so basis columns are unit vectors
      // and reduced costs follow directly from the reduced rows.
      Eigen::VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb[i] = cost[basis_[i]];
      int enter = -1;
      for (int j = 0; j < ncols; ++j) {
        if (!allow_artificial && j >= n_) break;
        if (is_basic(j)) continue;
        double red = cost[j];
        for (int i = 0; i < m_; ++i) red -= cb[i] * T_(i, j);
        if (red < -tol) {
          enter = j;  // Bland: smallest index
          break;
        }
      }
      if (enter < 0) return true;  // optimal

      int leave = -1;
      double best_ratio = 0.0;
      for (int i = 0; i < m_; ++i) {
        if (T_(i, enter) > tol) {
          const double ratio = T_(i, n_ + m_) / T_(i, enter);
          if (leave < 0 || ratio < best_ratio - tol ||
              (ratio < best_ratio + tol && basis_[i] < basis_[leave])) {
            leave = i;
            best_ratio = ratio;
          }
        }
      }
      if (leave < 0) return false;  // unbounded

      pivot(leave, enter);
    }
    throw std::runtime_error("simplex: iteration limit exceeded");
  }

  double phase1() {
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(n_ + m_);
    cost.tail(m_).setOnes();
    // Price out: make the artificial basis consistent by row reduction
    // (rows already reduced: artificials are the identity block).
    if (!minimize(cost, true))
      throw std::runtime_error("simplex: phase 1 unbounded");
    double obj = 0.0;
    for (int i = 0; i < m_; ++i)
      if (basis_[i] >= n_) obj += T_(i, n_ + m_);
    return obj;
  }

  // Pivot any artificial still basic (at level ~0) out of the basis.
  void expel_artificials() {
    constexpr double tol = 1e-9;
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) continue;
      int enter = -1;
      for (int j = 0; j < n_; ++j) {
        if (!is_basic(j) && std::abs(T_(i, j)) > tol) {
          enter = j;
          break;
        }
      }
      if (enter >= 0) pivot(i, enter);
      // Otherwise the row is redundant; the artificial stays basic at zero
      // and phase 2 never re-enters artificial columns.
    }
  }

  bool is_basic(int j) const {
    for (int i = 0; i < m_; ++i)
      if (basis_[i] == j) return true;
    return false;
  }

  Eigen::VectorXd solution() const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < n_) x[basis_[i]] = T_(i, n_ + m_);
    return x;
  }

  const std::vector<int>& basis() const { return basis_; }
  int n() const { return n_; }
  int m() const { return m_; }

 private:
  void pivot(int row, int col) {
    T_.row(row) /= T_(row, col);
    for (int i = 0; i < m_; ++i) {
      if (i == row) continue;
      const double f = T_(i, col);
      if (f != 0.0) T_.row(i) -= f * T_.row(row);
    }
    basis_[row] = col;
  }

  int m_, n_;
  Eigen::MatrixXd T_;  // [A | I | b], row-reduced as pivots proceed
  std::vector<int> basis_;
};

}  // namespace detail

inline LpResult lp_solve_standard(const Eigen::MatrixXd& A,
                                  const Eigen::VectorXd& b,
                                  const Eigen::VectorXd& c) {
  if (A.rows() != b.size() || A.cols() != c.size())
    throw std::invalid_argument("lp_solve_standard: dimension mismatch");

  detail::SimplexTableau tab(A, b);
  LpResult res;
  if (tab.phase1() > 1e-7) {
    res.status = LpStatus::infeasible;
    return res;
  }
  tab.expel_artificials();

  Eigen::VectorXd cost = Eigen::VectorXd::Zero(A.cols() + A.rows());
  cost.head(A.cols()) = c;
  if (!tab.minimize(cost, false)) {
    res.status = LpStatus::unbounded;
    return res;
  }

  res.status = LpStatus::optimal;
  res.x = tab.solution();
  res.objective = c.dot(res.x);

  // Equality-row multipliers from the final basis: solve B^T y = c_B using
  // the original columns.
  const auto& basis = tab.basis();
  const int m = static_cast<int>(A.rows());
  Eigen::MatrixXd B(m, m);
  Eigen::VectorXd cb(m);
  for (int i = 0; i < m; ++i) {
    const int j = basis[i];
    if (j < A.cols()) {
      B.col(i) = A.col(j);
      cb[i] = c[j];
    } else {
      // Redundant-row artificial: unit column, zero cost.
      B.col(i) = Eigen::VectorXd::Zero(m);
      B(j - static_cast<int>(A.cols()), i) = 1.0;
      cb[i] = 0.0;
    }
  }
  res.y = B.transpose().fullPivLu().solve(cb);
  return res;
}

}  // namespace desclab

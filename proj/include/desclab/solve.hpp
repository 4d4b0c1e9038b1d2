#pragma once

// Direct sparse solves of (P_h + lambda) u = f on the Dirichlet box, with
// residual and norm-bound reporting.

#include <complex>
#include <stdexcept>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "desclab/discrete_op.hpp"
#include "desclab/grid.hpp"

namespace desclab {

struct SolveReport {
  std::complex<double> lambda;
  long unknowns = 0;
  double residual = 0.0;    // ||(P+lambda)u - f||_g / ||f||_g
  double norm_ratio = 0.0;  // ||u||_g |Im lambda| / ||f||_g
  bool bound_ok = false;    // norm_ratio <= 1 + 1e-9
};

inline GridField curved_resolvent(const DiscreteOperator& op,
                                  const GridField& f,
                                  std::complex<double> lambda,
                                  SolveReport* report = nullptr) {
  if (lambda.imag() == 0.0)
    throw std::invalid_argument("curved_resolvent requires Im(lambda) != 0");
  const Eigen::VectorXcd fi = op.restrict_interior(f);
  const DiscreteOperator::SpMatC A = op.shifted_matrix(lambda);
  Eigen::SparseLU<DiscreteOperator::SpMatC> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("curved_resolvent: sparse factorization failed");
  const Eigen::VectorXcd ui = lu.solve(fi);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error("curved_resolvent: sparse solve failed");

  if (report) {
    const Eigen::VectorXcd res = op.apply_interior(ui) + lambda * ui - fi;
    auto gnorm = [&](const Eigen::VectorXcd& v) {
      return std::sqrt(std::abs(op.weighted_dot(v, v)));
    };
    const double nf = gnorm(fi);
    report->lambda = lambda;
    report->unknowns = op.interior_size();
    report->residual = nf > 0.0 ? gnorm(res) / nf : 0.0;
    report->norm_ratio =
        nf > 0.0 ? gnorm(ui) * std::abs(lambda.imag()) / nf : 0.0;
    report->bound_ok = report->norm_ratio <= 1.0 + 1e-9;
  }
  return op.extend_interior(ui);
}

}  // namespace desclab

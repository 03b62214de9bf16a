#pragma once

// Symmetric positive definite block-tridiagonal solve (block Thomas with Cholesky).

#include <Eigen/Dense>
#include <vector>

#include "edpflow/errors.hpp"

namespace edpflow::detail {

/// diag[k]: I x I diagonal blocks; upper[k]: coupling block between k and k+1 (lower = upper^T).
inline Eigen::VectorXd solve_block_tridiagonal(const std::vector<Eigen::MatrixXd>& diag,
                                               const std::vector<Eigen::MatrixXd>& upper,
                                               const Eigen::VectorXd& rhs) {
  const std::size_t n = diag.size();
  const Eigen::Index m = diag.front().rows();
  std::vector<Eigen::LLT<Eigen::MatrixXd>> fac(n);
  std::vector<Eigen::MatrixXd> gain(n);  // S_k^{-1} U_k
  std::vector<Eigen::VectorXd> y(n);
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::MatrixXd s = diag[k];
    Eigen::VectorXd r = rhs.segment(static_cast<Eigen::Index>(k) * m, m);
    if (k > 0) {
      s.noalias() -= upper[k - 1].transpose() * gain[k - 1];
      r.noalias() -= upper[k - 1].transpose() * y[k - 1];
    }
    fac[k].compute(s);
    if (fac[k].info() != Eigen::Success) throw DomainError("block tridiagonal system is not positive definite");
    y[k] = fac[k].solve(r);
    if (k + 1 < n) gain[k] = fac[k].solve(upper[k]);
  }
  Eigen::VectorXd x(rhs.size());
  for (std::size_t k = n; k-- > 0;) {
    Eigen::VectorXd xk = y[k];
    if (k + 1 < n) xk.noalias() -= gain[k] * x.segment(static_cast<Eigen::Index>(k + 1) * m, m);
    x.segment(static_cast<Eigen::Index>(k) * m, m) = xk;
  }
  return x;
}

}  // namespace edpflow::detail

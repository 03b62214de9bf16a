#pragma once

// Reference computations that do not go through the library code paths they check.

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "edpflow/field.hpp"
#include "edpflow/params.hpp"
#include "edpflow/state.hpp"

namespace oracle {

/// sup_x (s x - 4 (cosh(x/2) - 1)) by golden-section search.
double cosh_primal_by_sup(double s);

/// C(s) written out from its closed form, independent of the library.
double cosh_primal_closed(double s);

/// Solves a tridiagonal system (sub, diag, super, rhs) with the Thomas algorithm.
std::vector<double> tridiagonal_solve(std::vector<double> sub, std::vector<double> diag, std::vector<double> super,
                                      std::vector<double> rhs);

/// Nelder-Mead minimization; returns the best point found.
std::vector<double> nelder_mead(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                                double step, int max_iterations, double tolerance);

struct PrimalMinimum {
  double value = 0.0;
  std::vector<double> b1;
};

/// Brute-force minimization of the two-species primal objective over all feasible (J, b) on a
/// 3-cell grid: b1 is parametrized with sum h b1 = sum h v1, J follows from cumulative sums.
PrimalMinimum brute_force_primal_3cell(const edpflow::State& c, const edpflow::SystemParams& params,
                                       const edpflow::SpeciesField& v);

/// Normalized kernel vector of a generator from a full-pivot LU decomposition.
Eigen::VectorXd null_vector_lu(const Eigen::MatrixXd& A);

}  // namespace oracle

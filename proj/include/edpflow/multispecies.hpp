#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "edpflow/dissipation.hpp"
#include "edpflow/functionals.hpp"
#include "edpflow/params.hpp"
#include "edpflow/solver.hpp"
#include "edpflow/state.hpp"
#include "edpflow/tilt.hpp"

namespace edpflow {

/// Linear network c' = A^eps c with A^eps = A_slow + A_fast / eps.
/// A_ij (i != j) is the rate from species j to species i; columns sum to zero.
struct MarkovGenerator {
  std::vector<std::string> species;
  Eigen::MatrixXd A_slow;
  Eigen::MatrixXd A_fast;
  std::vector<double> delta;

  std::size_t size() const { return species.size(); }
  Eigen::MatrixXd assemble(double epsilon) const;

  /// The two-species fast reaction X1 <-> X2 (A_slow = 0).
  static MarkovGenerator two_species(const SystemParams& params);

  /// Strict parse of {"species", "A_slow", "A_fast", "delta"}; throws ConfigError naming bad keys.
  static MarkovGenerator from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

/// Null vector of a generator normalized to unit sum.
Eigen::VectorXd stationary_vector(const Eigen::MatrixXd& A);

struct GeneratorReport {
  bool valid = true;
  std::vector<std::string> failures;
  std::vector<double> eps_sweep;
  std::vector<Eigen::VectorXd> w_eps;
  Eigen::VectorXd w_limit;
  double max_detailed_balance_error = 0.0;  // relative
};

inline constexpr double kDetailedBalanceTolerance = 1e-12;

/// Column sums, sign pattern, detailed balance of A^eps for every eps of the sweep,
/// and convergence of w^eps towards a positive limit.
GeneratorReport validate_generator(const MarkovGenerator& gen,
                                   const std::vector<double>& eps_sweep = {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6});

struct KappaCoefficients {
  Eigen::MatrixXd kappa;  // kappa_ij = A_ij sqrt(w_j / w_i)
  Eigen::MatrixXd slow;   // same with A_slow
  Eigen::MatrixXd fast;   // same with A_fast, so kappa = slow + fast / eps
  Eigen::VectorXd w;
};

/// Throws DomainError if A^eps violates detailed balance.
KappaCoefficients kappa_coefficients(const MarkovGenerator& gen, double epsilon);

/// Reaction edges i < j with kappa_ij > 0; an edge is fast if A_fast couples i and j.
std::vector<ReactionEdge> reaction_edges(const MarkovGenerator& gen, double epsilon);

struct MultispeciesBreakdown {
  DissipationBreakdown total;
  double vel_react_slow = 0.0;
  double vel_react_fast = 0.0;
  double slope_react_slow = 0.0;
  double slope_react_fast = 0.0;
};

/// I-species De Giorgi functional with left-endpoint quadrature.
MultispeciesBreakdown multispecies_dissipation(const Trajectory& traj, const MarkovGenerator& gen, double epsilon,
                                               const Tilt& tilt = Tilt::zero(), const DualOptions& options = {});

/// Strang splitting with the exact per-cell exponential of the tilted generator
/// A^V_ij = A_ij e^{(V_j - V_i)/2} and backward-Euler drift-diffusion per species.
Trajectory solve_multispecies(const State& initial, const MarkovGenerator& gen, double epsilon, const Tilt& tilt,
                              const SolverConfig& config);

/// Detailed-balance network on the complete graph: A_ij = s_ij sqrt(w_i / w_j) with random
/// symmetric s and weights w. Edges listed in fast_edges go to A_fast.
MarkovGenerator random_detailed_balance_generator(std::size_t n_species, std::uint64_t seed,
                                                  const std::vector<std::pair<std::size_t, std::size_t>>& fast_edges);

}  // namespace edpflow

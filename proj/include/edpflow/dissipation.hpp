#pragma once

#include <span>

#include "edpflow/field.hpp"
#include "edpflow/functionals.hpp"
#include "edpflow/params.hpp"
#include "edpflow/state.hpp"
#include "edpflow/tilt.hpp"

namespace edpflow {

struct DualOptions {
  double tolerance = 1e-10;  // on max |v - (-div J + b)|, relative to max(1, |v|)
  int max_iterations = 200;
};

/// Maximizer of xi -> <xi, v> - R*(c, xi), gauge fixed to sum(xi) = 0.
struct DualMaximizerState {
  SpeciesField xi;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

struct PrimalResult {
  double value = 0.0;
  FluxAssignment flux;  // optimal fluxes recovered from the maximizer
  DualMaximizerState dual;
};

/// R(c, v) = sup_xi <xi, v> - R*(c, xi) for an arbitrary species/edge layout.
/// Requires sum_i sum_k v_{i,k} h = 0 up to rounding; throws DomainError otherwise
/// and IterationLimitError if Newton does not converge.
PrimalResult primal_R(const State& state, std::span<const double> delta,
                      std::span<const ReactionEdge> edges, const SpeciesField& v,
                      const DualOptions& options = {});

PrimalResult primal_R_eps(const State& state, const SystemParams& params, const SpeciesField& v,
                          const DualOptions& options = {});

/// Primal objective sum h Q~(delta c_f, J) + sum h C~(sqrt(c1 c2)/eps, b1) of given
/// two-species fluxes (no feasibility check).
DissipationBreakdown::FluxObjective primal_objective(const State& state, const SystemParams& params,
                                                     const FluxAssignment& flux);

/// Diffusion part of the primal objective only.
double diffusion_flux_cost(const State& state, std::span<const double> delta, const SpeciesField& J);

/// Rate (c(t_{m+1}) - c(t_m)) / dt of one interval.
SpeciesField interval_rate(const Trajectory& traj, std::size_t m);

/// D_eps^V with left-endpoint quadrature in time. Velocity terms come from the
/// dual evaluation of R_eps; if the trajectory carries fluxes their objective is
/// reported as well.
DissipationBreakdown dissipation_functional(const Trajectory& traj, const SystemParams& params,
                                            const Tilt& tilt, const DualOptions& options = {});

/// D_eps^V with the velocity part taken from the fluxes carried by the trajectory
/// (no dual solves). Requires fluxes.
DissipationBreakdown flux_dissipation(const Trajectory& traj, const SystemParams& params, const Tilt& tilt);

/// E^V(c(T)) + D_eps^V - E^V(c(0)).
double edb_residual(const Trajectory& traj, const SystemParams& params, const Tilt& tilt,
                    const DualOptions& options = {});

/// Same as edb_residual with a precomputed breakdown.
double edb_residual(const Trajectory& traj, const SystemParams& params, const Tilt& tilt,
                    const DissipationBreakdown& d);

// ---------------------------------------------------------------------------
// Limit functional D_0^V.
// ---------------------------------------------------------------------------

inline constexpr double kManifoldTolerance = 1e-6;

/// max_k |rho1 - rho2| / (1 + rho_hat) with rho_i = c_i / w_i^V and rho_hat = c_hat / w_hat^V.
double manifold_defect(const State& state, const SystemParams& params, const Tilt& tilt);

struct EffectiveDissipation {
  double velocity = 0.0;
  double slope = 0.0;
  double max_defect = 0.0;
  double total() const { return velocity + slope; }
};

/// D_0^V in coarse variables: per interval the coarse flux solves the single-species
/// quadratic dual with mobility sum_j delta_j c_{j,f}; slope 1/2 sum h delta_hat w_hat |grad rho_hat|^2 / rho_hat.
/// Off-manifold input (defect above kManifoldTolerance) yields +inf.
EffectiveDissipation effective_dissipation_terms(const Trajectory& traj, const SystemParams& params,
                                                 const Tilt& tilt, const DualOptions& options = {});
double effective_dissipation(const Trajectory& traj, const SystemParams& params, const Tilt& tilt,
                             const DualOptions& options = {});

/// D_0^V evaluated on the two-species fluxes carried by the trajectory: diffusion cost of J
/// plus R*_eff(c, -DE^V(c)); +inf off the manifold. Requires fluxes.
double constrained_dissipation(const Trajectory& traj, const SystemParams& params, const Tilt& tilt);

/// EDB residual of a coarse trajectory: E^V of the lifted end states plus effective_dissipation.
double effective_edb_residual(const Trajectory& hat, const SystemParams& params, const Tilt& tilt,
                              const DualOptions& options = {});

}  // namespace edpflow

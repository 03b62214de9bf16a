#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "edpflow/params.hpp"
#include "edpflow/state.hpp"
#include "edpflow/tilt.hpp"

namespace edpflow {

enum class Scheme {
  StrangExactReaction,  // R(dt/2) D(dt) R(dt/2), exact reaction, backward-Euler drift-diffusion
  ImexEuler,            // forward-Euler reaction, then backward-Euler drift-diffusion
  StrangCrankNicolson,  // as the default with Crank-Nicolson drift-diffusion
};

Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme scheme);

struct SolverConfig {
  double dt = 0.0;
  double T = 0.0;
  Scheme scheme = Scheme::StrangExactReaction;

  /// Throws DomainError unless dt > 0 and T >= dt.
  void validate() const;
  /// Output times 0, dt, 2 dt, ..., T (last step shortened if T is not a multiple of dt).
  std::vector<double> time_grid() const;
};

/// Bernoulli function x / (e^x - 1), B(0) = 1.
double bernoulli(double x);

/// One drift-diffusion step for a single species: c' + dt div F(theta c' + (1-theta) c) = c with
/// the Scharfetter-Gummel face flux F = -(d_f / h) (B(-dV) c_{k+1} - B(dV) c_k).
/// theta = 1 is backward Euler, theta = 1/2 Crank-Nicolson. Returns the time-averaged face flux in flux_out.
void drift_diffusion_step(const Grid& grid, std::span<const double> face_diffusion, std::span<const double> potential,
                          double dt, double theta, std::span<const double> c_old, std::span<double> c_new,
                          std::span<double> flux_out);

using StepObserver = std::function<void(double t, const State& state, const FluxAssignment& flux)>;

/// Steps the tilted two-species system without storing it; observe sees every state after t = 0.
void integrate_eps_system(const State& initial, const SystemParams& params, const Tilt& tilt,
                          const SolverConfig& config, const StepObserver& observe);

/// Tilted two-species system with fast reaction. Fluxes are recorded per interval so that
/// the discrete generalized continuity equation holds up to rounding.
Trajectory solve_eps_system(const State& initial, const SystemParams& params, const Tilt& tilt,
                            const SolverConfig& config);

/// Effective coarse equation c_hat' = div(delta_hat (grad c_hat + c_hat grad V_hat)), delta_hat on
/// faces by arithmetic mean. Returns a one-species trajectory carrying the face fluxes.
Trajectory solve_effective(const State& initial_hat, const SystemParams& params, const Tilt& tilt,
                           const SolverConfig& config);

struct LagrangeMultipliers {
  std::vector<double> lambda1;
  std::vector<double> lambda2;
};

/// Closed-form multipliers of the constrained two-species flow on the slow manifold,
/// with second-order finite differences (one-sided at the boundary). Needs n_cells >= 4.
LagrangeMultipliers lagrange_multipliers(const State& hat, const SystemParams& params, const Tilt& tilt);

/// max |lambda1 + lambda2|.
double lagrange_sum_defect(const LagrangeMultipliers& lm);

/// max over intervals of |c_i' - div(delta_i grad c_i + delta_i c_i grad V_i) - lambda_i| on the lifted
/// coarse trajectory, with the divergence and multipliers at the new time level.
double lagrange_residual(const Trajectory& hat, const SystemParams& params, const Tilt& tilt);

}  // namespace edpflow

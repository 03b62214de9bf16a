#pragma once

#include <vector>

#include "edpflow/field.hpp"
#include "edpflow/grid.hpp"
#include "edpflow/params.hpp"
#include "edpflow/state.hpp"
#include "edpflow/tilt.hpp"

namespace edpflow {

/// Coarse coefficients on cells (and faces, sampled from the same formulas).
struct CoarseParams {
  std::vector<double> delta_hat;        // (delta1 w1^V + delta2 w2^V) / (w1^V + w2^V)
  std::vector<double> V_hat;            // -log(w1 e^{-V1} + w2 e^{-V2})
  std::vector<double> w_hat;            // w1^V + w2^V (normalized)
  std::vector<double> delta_hat_faces;
  std::vector<double> V_hat_faces;
};

CoarseParams coarse_params(const Grid& grid, const SystemParams& params, const Tilt& tilt);

/// c_hat = c1 + c2 (one-species state).
State coarse_grain(const State& state);

/// Coarse-grains every state; fluxes, if present, become J_hat = J1 + J2 with b = 0.
Trajectory coarse_grain(const Trajectory& traj);

/// Cellwise fractions s_i = w_i e^{-V_i} / (w1 e^{-V1} + w2 e^{-V2}).
SpeciesField manifold_fractions(const Grid& grid, const SystemParams& params, const Tilt& tilt);

/// Slow-manifold state c_i = s_i c_hat.
State lift_to_manifold(const State& hat, const SystemParams& params, const Tilt& tilt);

/// Attaches the coarse flux determined by the continuity equation,
/// J_hat_{k+1/2} = -sum_{l <= k} h (c_hat_l(t_{m+1}) - c_hat_l(t_m)) / dt.
/// Throws DomainError if an interval changes the total mass.
Trajectory with_continuity_flux(const Trajectory& hat);

struct Reconstruction {
  Trajectory traj;                           // two species, with fluxes
  std::vector<SpeciesField> b_closed_form;   // a1 div J_hat + J_hat . grad theta1, per interval
};

/// Two-species trajectory on the slow manifold carrying (J1, J2, b1, b2).
/// J_i = theta_i J_hat with theta_i = delta_i c_{i,f} / sum_j delta_j c_{j,f}; b1 is the exact
/// cellwise residual c1' + div J1 and b2 = -b1. Throws DomainError if (c_hat, J_hat) violates
/// the discrete continuity equation.
Reconstruction reconstruct_from_coarse(const Trajectory& hat, const SystemParams& params, const Tilt& tilt);

/// sum_f h [J1^2/(delta1 c1_f) + J2^2/(delta2 c2_f) - J_hat^2/(delta1 c1_f + delta2 c2_f)] with
/// arithmetic-mean face densities; nonnegative, zero iff J_i is proportional to delta_i c_{i,f}.
double flux_equilibration_check(const State& state, const SystemParams& params, const SpeciesField& J);

/// (c_hat + 2 gamma) / (1 + 2 gamma); requires 0 < gamma <= 1/2.
State positivity_shift(const State& hat, double gamma);

/// Time mollification with the bump (1 - (s/width)^2)^3 after constant extension of the
/// trajectory beyond [0, T]. Needs a uniform time grid. Drops fluxes.
Trajectory mollify_in_time(const Trajectory& traj, double width);

struct RecoveryOptions {
  double lambda = 0.9;           // gamma = gamma_scale * eps^(1 - lambda)
  double alpha = 0.2;            // width = mollifier_scale * eps^alpha
  double gamma_scale = 0.1;
  double mollifier_scale = 0.05;
};

struct RecoverySequence {
  Trajectory traj;  // two species with reconstructed fluxes
  double gamma = 0.0;
  double width = 0.0;
  double rate_norm = 0.0;   // max over intervals of max |d c_hat / dt|
  double rate_bound = 0.0;  // eps^(-alpha)
};

/// Shift, mollify, recompute the coarse flux and reconstruct. Accepts a coarse
/// trajectory or a two-species one (coarse-grained first).
RecoverySequence build_recovery_sequence(const Trajectory& limit, const SystemParams& params, const Tilt& tilt,
                                         double epsilon, const RecoveryOptions& options = {});

}  // namespace edpflow

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "edpflow/field.hpp"
#include "edpflow/grid.hpp"
#include "edpflow/params.hpp"
#include "edpflow/state.hpp"
#include "edpflow/tilt.hpp"

namespace edpflow {

// ---------------------------------------------------------------------------
// The cosh pair. C*(x) = 4 (cosh(x/2) - 1) and its Legendre dual
// C(s) = 2 s asinh(s/2) - 4 sqrt(1 + s^2/4) + 4.
// ---------------------------------------------------------------------------
namespace cosh_pair {

double dual(double x);          // C*(x)
double dual_prime(double x);    // (C*)'(x) = 2 sinh(x/2)
double dual_second(double x);   // (C*)''(x) = cosh(x/2)
double primal(double s);        // C(s)
double primal_prime(double s);  // C'(s) = 2 asinh(s/2), inverse of (C*)'

}  // namespace cosh_pair

/// Base functions F for the perspective construction F~(a, x).
enum class PerspectiveBase { Quadratic, Cosh };

/// F~(a, x) = a F(x / a) for a > 0; 0 for a = 0 and x = 0; +inf for a = 0, x != 0.
/// Throws DomainError for a < 0.
double perspective(PerspectiveBase base, double a, double x);

/// Boltzmann function E_B(r) = r log r - r + 1 with E_B(0) = 1.
double boltzmann(double r);

// ---------------------------------------------------------------------------
// Energies and stationary measures.
// ---------------------------------------------------------------------------

/// Tilted stationary measure w^V_i = w_i e^{-V_i} / Z, sampled at cells and faces.
struct StationaryMeasure {
  SpeciesField cells;
  SpeciesField faces;
  double Z = 1.0;
};

StationaryMeasure stationary_measure(const Grid& grid, std::span<const double> w, const Tilt& tilt);
StationaryMeasure stationary_measure(const Grid& grid, const SystemParams& params, const Tilt& tilt);

/// E^V(c) = sum_j int E_B(c_j / w_j) w_j + V_j c_j dx with constant weights w.
double energy(const State& state, std::span<const double> w, const Tilt& tilt);
double energy(const State& state, const SystemParams& params, const Tilt& tilt);

/// DE^V(c)_j = log(c_j / w_j) + V_j, cellwise. Requires strictly positive c.
SpeciesField energy_derivative(const State& state, std::span<const double> w, const Tilt& tilt);

// ---------------------------------------------------------------------------
// Dual dissipation and slopes. The reaction part is a list of edges (i, j)
// with rate weight kappa; the two-species system has one edge with 1/epsilon.
// ---------------------------------------------------------------------------

struct ReactionEdge {
  std::size_t i = 0;
  std::size_t j = 1;
  double kappa = 1.0;
  bool fast = false;
};

std::vector<ReactionEdge> two_species_edges(const SystemParams& params);

/// Face mobility delta_j (c_{j,k} + c_{j,k+1}) / 2 on interior faces, zero on the boundary.
SpeciesField face_mobility(const State& state, std::span<const double> delta);

/// R*(c, xi) = 1/2 sum_j int delta_j |grad xi_j|^2 dc_j + sum_edges kappa int C*(xi_i - xi_j) sqrt(c_i c_j).
double dual_dissipation(const State& state, std::span<const double> delta,
                        std::span<const ReactionEdge> edges, const SpeciesField& xi);
double dual_dissipation(const State& state, const SystemParams& params, const SpeciesField& xi);

/// Diffusion part of R* only.
double dual_dissipation_diffusion(const State& state, std::span<const double> delta,
                                  const SpeciesField& xi);

/// R*_eff(c, xi) = R*_diff(c, xi) if max |xi_1 - xi_2| <= kEquilibriumTolerance, else +inf.
inline constexpr double kEquilibriumTolerance = 1e-9;
double r_eff_dual(const State& state, const SystemParams& params, const SpeciesField& xi);

/// Fisher-information (slope) terms R*(c, -DE^V(c)), split into diffusion and reaction.
struct SlopeTerms {
  double diff = 0.0;
  double react = 0.0;
  std::vector<double> per_edge;  // reaction contribution of every edge
};

SlopeTerms slope(const State& state, std::span<const double> delta,
                 std::span<const ReactionEdge> edges, const StationaryMeasure& wv);
SlopeTerms slope(const State& state, const SystemParams& params, const Tilt& tilt);

/// Time-integrated terms of the De Giorgi functional.
struct DissipationBreakdown {
  double vel_diff = 0.0;
  double vel_react = 0.0;
  double slope_diff = 0.0;
  double slope_react = 0.0;

  /// Velocity part evaluated on the fluxes carried by the trajectory (if any).
  struct FluxObjective {
    double diff = 0.0;
    double react = 0.0;
  };
  std::optional<FluxObjective> flux_velocity;

  double total() const { return vel_diff + vel_react + slope_diff + slope_react; }
  /// Total with the velocity part taken from the carried fluxes. Requires flux_velocity.
  double total_with_fluxes() const;
};

}  // namespace edpflow

#include "edpflow/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "edpflow/errors.hpp"

namespace edpflow {

namespace cosh_pair {

double dual(double x) {
  const double s = std::sinh(0.25 * x);
  return 8.0 * s * s;
}

double dual_prime(double x) { return 2.0 * std::sinh(0.5 * x); }

double dual_second(double x) { return std::cosh(0.5 * x); }

double primal(double s) {
  // 4 - 4 sqrt(1 + s^2/4) rewritten to avoid cancellation near 0.
  const double root = std::sqrt(1.0 + 0.25 * s * s);
  return 2.0 * s * std::asinh(0.5 * s) - s * s / (1.0 + root);
}

double primal_prime(double s) { return 2.0 * std::asinh(0.5 * s); }

}  // namespace cosh_pair

double perspective(PerspectiveBase base, double a, double x) {
  if (a < 0.0 || std::isnan(a)) throw DomainError("perspective function needs a >= 0");
  if (a == 0.0) return x == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  switch (base) {
    case PerspectiveBase::Quadratic:
      return 0.5 * x * x / a;
    case PerspectiveBase::Cosh:
      return a * cosh_pair::primal(x / a);
  }
  return 0.0;
}

double boltzmann(double r) {
  if (r < 0.0) throw DomainError("Boltzmann function needs r >= 0");
  if (r == 0.0) return 1.0;
  return r * std::log(r) - r + 1.0;
}

StationaryMeasure stationary_measure(const Grid& grid, std::span<const double> w, const Tilt& tilt) {
  const std::size_t ns = w.size();
  const SampledTilt v = tilt.sample(grid, ns);
  StationaryMeasure out{SpeciesField(ns, grid.n_cells()), SpeciesField(ns, grid.n_faces()), 1.0};
  double z = 0.0;
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t k = 0; k < grid.n_cells(); ++k) {
      out.cells(i, k) = w[i] * std::exp(-v.cells(i, k));
      z += out.cells(i, k) * grid.h();
    }
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t f = 0; f < grid.n_faces(); ++f) out.faces(i, f) = w[i] * std::exp(-v.faces(i, f)) / z;
  for (double& x : out.cells.flat()) x /= z;
  out.Z = z;
  return out;
}

StationaryMeasure stationary_measure(const Grid& grid, const SystemParams& params, const Tilt& tilt) {
  return stationary_measure(grid, params.w(), tilt);
}

double energy(const State& state, std::span<const double> w, const Tilt& tilt) {
  if (w.size() != state.n_species()) throw ShapeError("energy: weight count mismatch");
  const Grid& g = state.grid();
  const SampledTilt v = tilt.sample(g, state.n_species());
  double e = 0.0;
  for (std::size_t i = 0; i < state.n_species(); ++i)
    for (std::size_t k = 0; k < g.n_cells(); ++k) {
      const double c = state(i, k);
      if (c < 0.0) throw DomainError("energy: negative density");
      e += boltzmann(c / w[i]) * w[i] + v.cells(i, k) * c;
    }
  return e * g.h();
}

double energy(const State& state, const SystemParams& params, const Tilt& tilt) {
  return energy(state, params.w(), tilt);
}

SpeciesField energy_derivative(const State& state, std::span<const double> w, const Tilt& tilt) {
  const Grid& g = state.grid();
  const SampledTilt v = tilt.sample(g, state.n_species());
  SpeciesField d(state.n_species(), g.n_cells());
  for (std::size_t i = 0; i < state.n_species(); ++i)
    for (std::size_t k = 0; k < g.n_cells(); ++k) {
      if (!(state(i, k) > 0.0)) throw DomainError("energy derivative needs strictly positive densities");
      d(i, k) = std::log(state(i, k) / w[i]) + v.cells(i, k);
    }
  return d;
}

std::vector<ReactionEdge> two_species_edges(const SystemParams& params) {
  return {ReactionEdge{0, 1, 1.0 / params.epsilon(), true}};
}

SpeciesField face_mobility(const State& state, std::span<const double> delta) {
  if (delta.size() != state.n_species()) throw ShapeError("mobility: diffusion constant count mismatch");
  const std::size_t n = state.n_cells();
  SpeciesField m(state.n_species(), n + 1);
  for (std::size_t i = 0; i < state.n_species(); ++i)
    for (std::size_t k = 0; k + 1 < n; ++k) m(i, k + 1) = delta[i] * 0.5 * (state(i, k) + state(i, k + 1));
  return m;
}

double dual_dissipation_diffusion(const State& state, std::span<const double> delta, const SpeciesField& xi) {
  if (xi.n_species() != state.n_species() || xi.n_points() != state.n_cells())
    throw ShapeError("dual dissipation: xi shape mismatch");
  const double h = state.grid().h();
  const SpeciesField mob = face_mobility(state, delta);
  double r = 0.0;
  for (std::size_t i = 0; i < state.n_species(); ++i)
    for (std::size_t k = 0; k + 1 < state.n_cells(); ++k) {
      const double d = xi(i, k + 1) - xi(i, k);
      r += 0.5 * mob(i, k + 1) * d * d / h;
    }
  return r;
}

double dual_dissipation(const State& state, std::span<const double> delta,
                        std::span<const ReactionEdge> edges, const SpeciesField& xi) {
  double r = dual_dissipation_diffusion(state, delta, xi);
  const double h = state.grid().h();
  for (const ReactionEdge& e : edges)
    for (std::size_t k = 0; k < state.n_cells(); ++k) {
      const double prod = state(e.i, k) * state(e.j, k);
      if (prod < 0.0) throw DomainError("dual dissipation: negative density");
      r += h * e.kappa * cosh_pair::dual(xi(e.i, k) - xi(e.j, k)) * std::sqrt(prod);
    }
  return r;
}

double dual_dissipation(const State& state, const SystemParams& params, const SpeciesField& xi) {
  const auto edges = two_species_edges(params);
  return dual_dissipation(state, params.delta(), edges, xi);
}

double r_eff_dual(const State& state, const SystemParams& params, const SpeciesField& xi) {
  if (state.n_species() != 2) throw ShapeError("r_eff_dual is defined for two species");
  double defect = 0.0;
  for (std::size_t k = 0; k < state.n_cells(); ++k) defect = std::max(defect, std::abs(xi(0, k) - xi(1, k)));
  if (defect > kEquilibriumTolerance) return std::numeric_limits<double>::infinity();
  return dual_dissipation_diffusion(state, params.delta(), xi);
}

SlopeTerms slope(const State& state, std::span<const double> delta, std::span<const ReactionEdge> edges,
                 const StationaryMeasure& wv) {
  const std::size_t ns = state.n_species();
  const std::size_t n = state.n_cells();
  const double h = state.grid().h();
  if (delta.size() != ns || !(wv.cells.n_species() == ns && wv.cells.n_points() == n))
    throw ShapeError("slope: shape mismatch");
  SpeciesField rho(ns, n);
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      if (state(i, k) < 0.0) throw DomainError("slope: negative density");
      rho(i, k) = state(i, k) / wv.cells(i, k);
    }
  SlopeTerms out;
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double grad = (rho(i, k + 1) - rho(i, k)) / h;
      const double rf = 0.5 * (rho(i, k) + rho(i, k + 1));
      if (grad == 0.0) continue;
      out.diff += 0.5 * h * delta[i] * wv.faces(i, k + 1) * grad * grad / rf;
    }
  out.per_edge.assign(edges.size(), 0.0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const ReactionEdge& ed = edges[e];
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double d = std::sqrt(rho(ed.i, k)) - std::sqrt(rho(ed.j, k));
      s += std::sqrt(wv.cells(ed.i, k) * wv.cells(ed.j, k)) * d * d;
    }
    out.per_edge[e] = 2.0 * ed.kappa * h * s;
    out.react += out.per_edge[e];
  }
  return out;
}

SlopeTerms slope(const State& state, const SystemParams& params, const Tilt& tilt) {
  const auto edges = two_species_edges(params);
  return slope(state, params.delta(), edges, stationary_measure(state.grid(), params, tilt));
}

double DissipationBreakdown::total_with_fluxes() const {
  if (!flux_velocity) throw DomainError("dissipation breakdown carries no flux objective");
  return flux_velocity->diff + flux_velocity->react + slope_diff + slope_react;
}

}  // namespace edpflow

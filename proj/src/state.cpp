#include "edpflow/state.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "edpflow/errors.hpp"

namespace edpflow {

State::State(const Grid& grid, std::size_t n_species, double fill)
    : grid_(grid), density_(n_species, grid.n_cells(), fill) {}

State::State(const Grid& grid, SpeciesField density) : grid_(grid), density_(std::move(density)) {
  if (density_.n_points() != grid.n_cells()) throw ShapeError("state density does not match grid");
}

double State::min_value() const {
  double m = std::numeric_limits<double>::infinity();
  for (double v : density_.flat()) m = std::min(m, v);
  return m;
}

bool State::is_finite() const {
  return std::all_of(density_.flat().begin(), density_.flat().end(),
                     [](double v) { return std::isfinite(v); });
}

Trajectory::Trajectory(const Grid& grid, std::size_t n_species)
    : grid_(grid), n_species_(n_species) {}

void Trajectory::push_back(double t, State state) {
  if (!(state.grid() == grid_) || state.n_species() != n_species_)
    throw ShapeError("trajectory state shape mismatch");
  if (!times_.empty() && !(t > times_.back()))
    throw DomainError("trajectory times must increase strictly");
  if (!fluxes_.empty()) throw DomainError("cannot append a state without fluxes to a flux trajectory");
  times_.push_back(t);
  states_.push_back(std::move(state));
}

void Trajectory::push_back(double t, State state, FluxAssignment flux) {
  if (states_.empty()) throw DomainError("first state of a trajectory has no incoming interval");
  if (fluxes_.size() != n_intervals())
    throw DomainError("cannot mix intervals with and without fluxes");
  if (flux.J.n_species() != n_species_ || flux.J.n_points() != grid_.n_faces() ||
      flux.b.n_species() != n_species_ || flux.b.n_points() != grid_.n_cells())
    throw ShapeError("flux assignment shape mismatch");
  if (!(state.grid() == grid_) || state.n_species() != n_species_)
    throw ShapeError("trajectory state shape mismatch");
  if (!(t > times_.back())) throw DomainError("trajectory times must increase strictly");
  times_.push_back(t);
  states_.push_back(std::move(state));
  fluxes_.push_back(std::move(flux));
}

double total_mass(const State& state) {
  double s = 0.0;
  for (std::size_t i = 0; i < state.n_species(); ++i) s += state.grid().integrate(state.species(i));
  return s;
}

std::vector<SpeciesField> gce_residual(const Trajectory& traj) {
  if (!traj.has_fluxes()) throw DomainError("no flux data");
  const Grid& g = traj.grid();
  const std::size_t n = g.n_cells();
  std::vector<SpeciesField> out;
  out.reserve(traj.n_intervals());
  for (std::size_t m = 0; m < traj.n_intervals(); ++m) {
    const FluxAssignment& fl = traj.flux(m);
    const State& c0 = traj.state(m);
    const State& c1 = traj.state(m + 1);
    const double dt = traj.dt(m);
    SpeciesField r(traj.n_species(), n);
    for (std::size_t i = 0; i < traj.n_species(); ++i) {
      const auto J = fl.J.species(i);
      for (std::size_t k = 0; k < n; ++k) {
        r(i, k) = (c1(i, k) - c0(i, k)) / dt + (J[k + 1] - J[k]) / g.h() - fl.b(i, k);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

double max_gce_residual(const Trajectory& traj) {
  double m = 0.0;
  for (const auto& r : gce_residual(traj))
    for (double v : r.flat()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace edpflow

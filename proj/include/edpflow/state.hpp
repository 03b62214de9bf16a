#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "edpflow/field.hpp"
#include "edpflow/grid.hpp"

namespace edpflow {

/// Per-species cell densities on a grid.
class State {
 public:
  State(const Grid& grid, std::size_t n_species, double fill = 0.0);
  State(const Grid& grid, SpeciesField density);

  const Grid& grid() const { return grid_; }
  std::size_t n_species() const { return density_.n_species(); }
  std::size_t n_cells() const { return grid_.n_cells(); }

  double& operator()(std::size_t species, std::size_t k) { return density_(species, k); }
  double operator()(std::size_t species, std::size_t k) const { return density_(species, k); }
  std::span<double> species(std::size_t i) { return density_.species(i); }
  std::span<const double> species(std::size_t i) const { return density_.species(i); }

  const SpeciesField& density() const { return density_; }
  SpeciesField& density() { return density_; }

  double min_value() const;
  bool is_finite() const;

 private:
  Grid grid_;
  SpeciesField density_;
};

/// Diffusion fluxes J on faces and reaction fluxes b on cells for one time interval.
struct FluxAssignment {
  SpeciesField J;  // n_species x n_faces, boundary faces zero
  SpeciesField b;  // n_species x n_cells

  FluxAssignment() = default;
  FluxAssignment(const Grid& grid, std::size_t n_species)
      : J(n_species, grid.n_faces()), b(n_species, grid.n_cells()) {}
};

/// Time-discrete trajectory t_0 = 0 < ... < t_M with optional per-interval fluxes.
class Trajectory {
 public:
  Trajectory(const Grid& grid, std::size_t n_species);

  const Grid& grid() const { return grid_; }
  std::size_t n_species() const { return n_species_; }
  std::size_t size() const { return states_.size(); }
  std::size_t n_intervals() const { return states_.empty() ? 0 : states_.size() - 1; }

  const std::vector<double>& times() const { return times_; }
  const std::vector<State>& states() const { return states_; }
  const State& state(std::size_t m) const { return states_.at(m); }
  const State& front() const { return states_.front(); }
  const State& back() const { return states_.back(); }
  double dt(std::size_t interval) const { return times_[interval + 1] - times_[interval]; }

  bool has_fluxes() const { return !fluxes_.empty() && fluxes_.size() == n_intervals(); }
  const std::vector<FluxAssignment>& fluxes() const { return fluxes_; }
  const FluxAssignment& flux(std::size_t interval) const { return fluxes_.at(interval); }

  /// Appends a state; times must increase strictly.
  void push_back(double t, State state);
  /// Appends a state together with the fluxes of the interval that ends at it.
  void push_back(double t, State state, FluxAssignment flux);

  /// Drops all fluxes (used when a trajectory is transformed in ways that invalidate them).
  void clear_fluxes() { fluxes_.clear(); }

 private:
  Grid grid_;
  std::size_t n_species_;
  std::vector<double> times_;
  std::vector<State> states_;
  std::vector<FluxAssignment> fluxes_;
};

/// Sum over species and cells of c h.
double total_mass(const State& state);

/// Discrete generalized continuity residual, one SpeciesField per interval:
/// (c(t_{m+1}) - c(t_m)) / dt + div J - b.
std::vector<SpeciesField> gce_residual(const Trajectory& traj);

/// Max-norm of gce_residual over all intervals.
double max_gce_residual(const Trajectory& traj);

}  // namespace edpflow

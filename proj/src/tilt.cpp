#include "edpflow/tilt.hpp"

#include <cmath>
#include <string>

#include "edpflow/errors.hpp"

namespace edpflow {

Tilt::Tilt(std::vector<Profile> profiles) : profiles_(std::move(profiles)) {}

Tilt Tilt::constant(std::vector<double> values) {
  std::vector<Profile> profiles;
  profiles.reserve(values.size());
  for (double v : values) profiles.emplace_back([v](double) { return v; });
  return Tilt(std::move(profiles));
}

double Tilt::value(std::size_t species, double x) const {
  if (profiles_.empty()) return 0.0;
  if (species >= profiles_.size())
    throw ShapeError("tilt has no profile for species " + std::to_string(species));
  return profiles_[species](x);
}

SampledTilt Tilt::sample(const Grid& grid, std::size_t n_species) const {
  if (!profiles_.empty() && profiles_.size() != n_species)
    throw ShapeError("tilt species count does not match the system");
  SampledTilt s{SpeciesField(n_species, grid.n_cells()), SpeciesField(n_species, grid.n_faces())};
  if (profiles_.empty()) return s;
  for (std::size_t i = 0; i < n_species; ++i) {
    for (std::size_t k = 0; k < grid.n_cells(); ++k) s.cells(i, k) = profiles_[i](grid.center(k));
    for (std::size_t f = 0; f < grid.n_faces(); ++f) s.faces(i, f) = profiles_[i](grid.face(f));
  }
  for (double v : s.cells.flat())
    if (!std::isfinite(v)) throw DomainError("tilt potential is not finite");
  for (double v : s.faces.flat())
    if (!std::isfinite(v)) throw DomainError("tilt potential is not finite");
  return s;
}

}  // namespace edpflow

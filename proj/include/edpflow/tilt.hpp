#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "edpflow/field.hpp"
#include "edpflow/grid.hpp"

namespace edpflow {

/// Tilt potentials sampled on a grid: values at cell centers and at faces.
struct SampledTilt {
  SpeciesField cells;
  SpeciesField faces;
};

/// Per-species external potential V_i(x). An empty profile list means V = 0.
class Tilt {
 public:
  using Profile = std::function<double(double)>;

  Tilt() = default;
  explicit Tilt(std::vector<Profile> profiles);

  static Tilt zero() { return Tilt{}; }
  static Tilt constant(std::vector<double> values);

  bool is_zero() const { return profiles_.empty(); }

  /// V_species(x); zero for untilted systems.
  double value(std::size_t species, double x) const;

  /// Samples V at centers and faces. Throws DomainError on non-finite values.
  SampledTilt sample(const Grid& grid, std::size_t n_species) const;

 private:
  std::vector<Profile> profiles_;
};

}  // namespace edpflow

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace edpflow {

/// Uniform finite-volume grid on [0,1].
///
/// Cell k covers [k h, (k+1) h]; face f sits at f h, so faces 0 and n_cells are
/// the boundary. Boundary faces always carry zero flux.
class Grid {
 public:
  explicit Grid(std::size_t n_cells);

  std::size_t n_cells() const { return n_cells_; }
  std::size_t n_faces() const { return n_cells_ + 1; }
  double h() const { return h_; }

  double center(std::size_t k) const { return (static_cast<double>(k) + 0.5) * h_; }
  double face(std::size_t f) const { return static_cast<double>(f) * h_; }
  std::vector<double> centers() const;
  std::vector<double> faces() const;

  /// Cellwise (F_{k+1/2} - F_{k-1/2}) / h.
  void divergence(std::span<const double> face_flux, std::span<double> out) const;
  std::vector<double> divergence(std::span<const double> face_flux) const;

  /// Midpoint quadrature of a cell field.
  double integrate(std::span<const double> cell_values) const;

  bool operator==(const Grid& other) const { return n_cells_ == other.n_cells_; }

 private:
  std::size_t n_cells_;
  double h_;
};

}  // namespace edpflow

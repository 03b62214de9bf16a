#include "edpflow/grid.hpp"

#include "edpflow/errors.hpp"

namespace edpflow {

Grid::Grid(std::size_t n_cells) : n_cells_(n_cells), h_(0.0) {
  if (n_cells < 2) throw DomainError("grid needs at least 2 cells");
  h_ = 1.0 / static_cast<double>(n_cells);
}

std::vector<double> Grid::centers() const {
  std::vector<double> x(n_cells_);
  for (std::size_t k = 0; k < n_cells_; ++k) x[k] = center(k);
  return x;
}

std::vector<double> Grid::faces() const {
  std::vector<double> x(n_faces());
  for (std::size_t f = 0; f < n_faces(); ++f) x[f] = face(f);
  return x;
}

void Grid::divergence(std::span<const double> face_flux, std::span<double> out) const {
  if (face_flux.size() != n_faces() || out.size() != n_cells_)
    throw ShapeError("divergence: face flux / output size mismatch");
  for (std::size_t k = 0; k < n_cells_; ++k) out[k] = (face_flux[k + 1] - face_flux[k]) / h_;
}

std::vector<double> Grid::divergence(std::span<const double> face_flux) const {
  std::vector<double> out(n_cells_);
  divergence(face_flux, out);
  return out;
}

double Grid::integrate(std::span<const double> cell_values) const {
  if (cell_values.size() != n_cells_) throw ShapeError("integrate: size mismatch");
  double s = 0.0;
  for (double v : cell_values) s += v;
  return s * h_;
}

}  // namespace edpflow

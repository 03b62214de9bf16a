#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace edpflow {

/// Species-major array of per-species values on cells or faces.
class SpeciesField {
 public:
  SpeciesField() = default;
  SpeciesField(std::size_t n_species, std::size_t n_points, double fill = 0.0)
      : n_species_(n_species), n_points_(n_points), data_(n_species * n_points, fill) {}

  std::size_t n_species() const { return n_species_; }
  std::size_t n_points() const { return n_points_; }

  double& operator()(std::size_t species, std::size_t k) { return data_[species * n_points_ + k]; }
  double operator()(std::size_t species, std::size_t k) const {
    return data_[species * n_points_ + k];
  }

  std::span<double> species(std::size_t i) { return {data_.data() + i * n_points_, n_points_}; }
  std::span<const double> species(std::size_t i) const {
    return {data_.data() + i * n_points_, n_points_};
  }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool same_shape(const SpeciesField& other) const {
    return n_species_ == other.n_species_ && n_points_ == other.n_points_;
  }

  bool operator==(const SpeciesField&) const = default;

 private:
  std::size_t n_species_ = 0;
  std::size_t n_points_ = 0;
  std::vector<double> data_;
};

}  // namespace edpflow

#pragma once

#include <filesystem>
#include <iosfwd>

#include "edpflow/state.hpp"

namespace edpflow {

// CSV layout: one row per (time, cell) with columns t, x, c1..cN and, when the
// trajectory carries fluxes, J1..JN, b1..bN. The J entry of cell k is the flux
// through its right face (the left boundary face is identically zero). Rows at
// the final time carry zero fluxes. Values are written with 17 significant digits.

void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

/// Parses the format written by write_trajectory_csv. Throws ShapeError on
/// ragged or inconsistent input.
Trajectory read_trajectory_csv(std::istream& in);
Trajectory read_trajectory_csv(const std::filesystem::path& path);

}  // namespace edpflow

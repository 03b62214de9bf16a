#include "edpflow/trajectory_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "edpflow/errors.hpp"

namespace edpflow {
namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    out.push_back(cell);
  }
  return out;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ShapeError("trajectory csv: not a number: '" + s + "'");
  }
  if (pos != s.size()) throw ShapeError("trajectory csv: trailing characters in '" + s + "'");
  return v;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  const std::size_t ns = traj.n_species();
  const bool fluxes = traj.has_fluxes();
  out << "t,x";
  for (std::size_t i = 0; i < ns; ++i) out << ",c" << i + 1;
  if (fluxes) {
    for (std::size_t i = 0; i < ns; ++i) out << ",J" << i + 1;
    for (std::size_t i = 0; i < ns; ++i) out << ",b" << i + 1;
  }
  out << '\n';
  const Grid& g = traj.grid();
  for (std::size_t m = 0; m < traj.size(); ++m) {
    const State& s = traj.state(m);
    for (std::size_t k = 0; k < g.n_cells(); ++k) {
      out << fmt17(traj.times()[m]) << ',' << fmt17(g.center(k));
      for (std::size_t i = 0; i < ns; ++i) out << ',' << fmt17(s(i, k));
      if (fluxes) {
        const bool has = m < traj.n_intervals();
        for (std::size_t i = 0; i < ns; ++i) out << ',' << fmt17(has ? traj.flux(m).J(i, k + 1) : 0.0);
        for (std::size_t i = 0; i < ns; ++i) out << ',' << fmt17(has ? traj.flux(m).b(i, k) : 0.0);
      }
      out << '\n';
    }
  }
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_trajectory_csv(f, traj);
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ShapeError("trajectory csv: empty input");
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "t" || header[1] != "x")
    throw ShapeError("trajectory csv: header must start with t,x");
  std::size_t ns = 0;
  while (2 + ns < header.size() && header[2 + ns] == "c" + std::to_string(ns + 1)) ++ns;
  if (ns == 0) throw ShapeError("trajectory csv: no density columns");
  bool fluxes = false;
  if (header.size() == 2 + 3 * ns) {
    for (std::size_t i = 0; i < ns; ++i) {
      if (header[2 + ns + i] != "J" + std::to_string(i + 1) ||
          header[2 + 2 * ns + i] != "b" + std::to_string(i + 1))
        throw ShapeError("trajectory csv: unexpected flux column names");
    }
    fluxes = true;
  } else if (header.size() != 2 + ns) {
    throw ShapeError("trajectory csv: unexpected column count");
  }

  // Group rows by time, preserving order.
  std::vector<double> times;
  std::vector<std::vector<std::vector<double>>> rows;  // [time][cell][column]
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw ShapeError("trajectory csv: ragged row");
    std::vector<double> vals(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) vals[j] = parse_double(cells[j]);
    if (times.empty() || vals[0] != times.back()) {
      times.push_back(vals[0]);
      rows.emplace_back();
    }
    rows.back().push_back(std::move(vals));
  }
  if (times.empty()) throw ShapeError("trajectory csv: no data rows");
  const std::size_t n = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != n) throw ShapeError("trajectory csv: time slices have different cell counts");
  Grid grid(n);
  for (std::size_t k = 0; k < n; ++k)
    if (std::abs(rows.front()[k][1] - grid.center(k)) > 1e-12)
      throw ShapeError("trajectory csv: x column is not a uniform cell-center grid on [0,1]");

  Trajectory traj(grid, ns);
  for (std::size_t m = 0; m < times.size(); ++m) {
    State s(grid, ns);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < ns; ++i) s(i, k) = rows[m][k][2 + i];
    if (m == 0 || !fluxes) {
      traj.push_back(times[m], std::move(s));
      continue;
    }
    FluxAssignment fl(grid, ns);
    const auto& prev = rows[m - 1];
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < ns; ++i) {
        if (k + 1 < n) fl.J(i, k + 1) = prev[k][2 + ns + i];
        fl.b(i, k) = prev[k][2 + 2 * ns + i];
      }
    traj.push_back(times[m], std::move(s), std::move(fl));
  }
  return traj;
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return read_trajectory_csv(f);
}

}  // namespace edpflow

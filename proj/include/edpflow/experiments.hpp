#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edpflow/coarsegrain.hpp"
#include "edpflow/multispecies.hpp"
#include "edpflow/params.hpp"
#include "edpflow/solver.hpp"
#include "edpflow/state.hpp"
#include "edpflow/tilt.hpp"

namespace edpflow {

enum class ExperimentKind { EpsSweep, EdbRefinement, MixedDiffusionFit, RecoveryStudy, MultispeciesCheck };

ExperimentKind parse_experiment_kind(const std::string& name);
std::string to_string(ExperimentKind kind);

/// V_i(x) = offset_i + amplitude_i cos(wavenumber_i pi x); "zero" and "constant" are special cases.
struct TiltSpec {
  std::string kind = "zero";  // zero | constant | cosine
  std::vector<double> amplitude;
  std::vector<double> wavenumber;
  std::vector<double> offset;

  Tilt build(std::size_t n_species) const;
};

/// c_hat(x) = 1 + amplitude cos(pi x), normalized to unit mass, placed on the slow
/// manifold or split evenly between the species.
struct InitialSpec {
  double amplitude = 0.0;
  std::string placement = "manifold";  // manifold | split
};

struct RefinementSpec {
  std::size_t levels = 0;
  std::size_t n_cells = 0;  // coarsest level
  double dt = 0.0;          // coarsest level
};

struct GeneratorSpec {
  std::string source;  // two_species | inline | file | random
  nlohmann::json document;
  std::filesystem::path path;
  std::size_t n_species = 0;
  std::vector<std::pair<std::size_t, std::size_t>> fast_edges;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::EpsSweep;
  std::filesystem::path output_dir;
  std::size_t n_cells = 0;
  SolverConfig solver;
  std::array<double, 2> delta{};
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<double> epsilon;
  TiltSpec tilt;
  InitialSpec initial;
  std::uint64_t seed = 0;
  std::size_t trajectory_stride = 0;  // 0: no trajectory CSVs
  std::size_t steps_per_fast_time = 0;  // eps_sweep: dt <= eps / steps_per_fast_time when positive
  std::optional<RefinementSpec> refinement;
  RecoveryOptions recovery;
  std::optional<GeneratorSpec> generator;

  SystemParams params(double epsilon) const;

  /// Strict parse. Relative paths (output_dir, generator file) resolve against base_dir.
  /// Throws ConfigError listing unknown, missing or malformed keys.
  static ExperimentConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
};

/// Reads and parses a config file; I/O and JSON syntax errors become ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);

/// A complete mixed_diffusion_fit config for the reference two-species system.
nlohmann::json default_config();

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  std::string relation;  // "<=", ">=" or "monotone"
  bool pass = false;
};

struct ExperimentReport {
  std::string experiment;
  std::vector<Check> checks;
  nlohmann::json summary;
  std::vector<std::filesystem::path> files;

  bool passed() const;
};

/// Runs the configured study, writes CSV tables, summary.json and summary.txt into output_dir.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// Measured diffusion coefficient: least-squares slope of log|a1(t)| against t divided by -pi^2,
/// a1 = 2 int c_hat cos(pi x) dx. Throws DomainError if a1 degenerates.
double fit_decay_rate(const Trajectory& hat);

/// Least-squares slope of log y against log x. Throws DomainError on nonpositive data.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Worker count: hardware concurrency, capped by EDPFLOW_THREADS and by jobs.
std::size_t worker_count(std::size_t jobs);

/// Runs body(0..jobs-1) on worker_count(jobs) threads; rethrows the first exception.
void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& body);

/// c_hat = 1 + amplitude cos(pi x) with unit discrete mass.
State cosine_profile(const Grid& grid, double amplitude);

}  // namespace edpflow

#include "edpflow/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "edpflow/dissipation.hpp"
#include "edpflow/errors.hpp"
#include "edpflow/functionals.hpp"
#include "edpflow/trajectory_io.hpp"

namespace edpflow {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Strict JSON reading. Every problem is recorded under its dotted key path and
// reported together.
// ---------------------------------------------------------------------------

class Section {
 public:
  Section(const json& node, std::string path, std::vector<std::string>& errors)
      : node_(node), path_(std::move(path)), errors_(errors) {
    if (!node_.is_object()) {
      errors_.push_back(path_.empty() ? "<root>" : path_);
      ok_ = false;
    }
  }

  bool has(const std::string& key) const { return ok_ && node_.contains(key); }

  const json* raw(const std::string& key, bool required) {
    if (!ok_) return nullptr;
    used_.insert(key);
    if (!node_.contains(key)) {
      if (required && !absent_) errors_.push_back(name(key));
      return nullptr;
    }
    return &node_.at(key);
  }

  std::optional<double> number(const std::string& key, bool required, bool positive) {
    const json* v = raw(key, required);
    if (!v) return std::nullopt;
    if (!v->is_number() || !std::isfinite(v->get<double>()) || (positive && !(v->get<double>() > 0.0))) {
      errors_.push_back(name(key));
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<std::size_t> count(const std::string& key, bool required, std::size_t minimum) {
    const json* v = raw(key, required);
    if (!v) return std::nullopt;
    if (!v->is_number_integer() || v->get<long long>() < static_cast<long long>(minimum)) {
      errors_.push_back(name(key));
      return std::nullopt;
    }
    return static_cast<std::size_t>(v->get<long long>());
  }

  std::optional<std::string> string(const std::string& key, bool required) {
    const json* v = raw(key, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      errors_.push_back(name(key));
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<std::vector<double>> numbers(const std::string& key, bool required) {
    const json* v = raw(key, required);
    if (!v) return std::nullopt;
    std::vector<double> out;
    if (!v->is_array()) {
      errors_.push_back(name(key));
      return std::nullopt;
    }
    for (const auto& x : *v) {
      if (!x.is_number() || !std::isfinite(x.get<double>())) {
        errors_.push_back(name(key));
        return std::nullopt;
      }
      out.push_back(x.get<double>());
    }
    return out;
  }

  Section child(const std::string& key, bool required) {
    const json* v = raw(key, required);
    static const json missing = json::object();
    Section sub(v ? *v : missing, name(key), errors_);
    sub.absent_ = v == nullptr;  // the missing section itself is already reported
    return sub;
  }

  void bad(const std::string& key) { errors_.push_back(name(key)); }

  /// Reports keys that were never read.
  void finish() {
    if (!ok_) return;
    for (const auto& [key, _] : node_.items())
      if (!used_.count(key)) errors_.push_back(name(key));
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> used_;
  bool ok_ = true;
  bool absent_ = false;
};

// ---------------------------------------------------------------------------
// Small numerical helpers.
// ---------------------------------------------------------------------------

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

Check bound_check(std::string name, double value, const std::string& relation, double threshold) {
  const bool pass = relation == "<=" ? value <= threshold : value >= threshold;
  return {std::move(name), value, threshold, relation, pass && std::isfinite(value)};
}

Check monotone_check(std::string name, const std::vector<double>& values) {
  double worst = 0.0;  // largest ratio v[i] / v[i-1]
  for (std::size_t i = 1; i < values.size(); ++i) worst = std::max(worst, values[i] / values[i - 1]);
  return {std::move(name), worst, 1.0, "monotone", strictly_decreasing(values)};
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  void row(const std::vector<double>& values) { rows_.push_back(values); }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < header_.size(); ++i) out << (i ? "," : "") << header_[i];
    out << '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << fmt(r[i]);
      out << '\n';
    }
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

double max_mass_drift(const Trajectory& traj) {
  const double m0 = total_mass(traj.front());
  double worst = 0.0;
  for (const State& s : traj.states()) worst = std::max(worst, std::abs(total_mass(s) - m0));
  return worst;
}

Trajectory thinned(const Trajectory& traj, std::size_t stride) {
  if (stride <= 1) return traj;
  Trajectory out(traj.grid(), traj.n_species());
  for (std::size_t m = 0; m < traj.size(); m += stride) out.push_back(traj.times()[m], traj.state(m));
  if ((traj.size() - 1) % stride != 0) out.push_back(traj.times().back(), traj.back());
  return out;
}

std::string eps_tag(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.0e", eps);
  return buf;
}

// ---------------------------------------------------------------------------
// Studies.
// ---------------------------------------------------------------------------

struct Context {
  Context(const ExperimentConfig& c, ExperimentReport& r) : cfg(c), report(r) {}

  const ExperimentConfig& cfg;
  ExperimentReport& report;

  std::mutex files_mu;

  std::filesystem::path file(const std::string& name) {
    std::filesystem::path p = cfg.output_dir / name;
    std::lock_guard lock(files_mu);
    report.files.push_back(p);
    return p;
  }

  void maybe_write_trajectory(const std::string& name, const Trajectory& traj) {
    if (cfg.trajectory_stride == 0) return;
    write_trajectory_csv(file(name), thinned(traj, cfg.trajectory_stride));
  }
};

State two_species_initial(const ExperimentConfig& cfg, const Grid& g, const Tilt& tilt) {
  const State hat = cosine_profile(g, cfg.initial.amplitude);
  if (cfg.initial.placement == "manifold") return lift_to_manifold(hat, cfg.params(1.0), tilt);
  State c(g, 2);
  for (std::size_t k = 0; k < g.n_cells(); ++k) c(0, k) = c(1, k) = 0.5 * hat(0, k);
  return c;
}

void run_mixed_diffusion_fit(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Grid g(cfg.n_cells);
  const Tilt tilt = cfg.tilt.build(2);
  const State c0 = two_species_initial(cfg, g, tilt);
  const double target = cfg.params(1.0).mixed_delta();
  const std::size_t ne = cfg.epsilon.size();

  struct Row {
    double fit = 0.0, mass = 0.0, gce = 0.0;
  };
  std::vector<Row> rows(ne + 1);
  parallel_for(ne + 1, [&](std::size_t j) {
    if (j == ne) {
      const Trajectory te = solve_effective(coarse_grain(c0), cfg.params(1.0), tilt, cfg.solver);
      rows[j] = {fit_decay_rate(te), max_mass_drift(te), max_gce_residual(te)};
      return;
    }
    const SystemParams p = cfg.params(cfg.epsilon[j]);
    const Trajectory tr = solve_eps_system(c0, p, tilt, cfg.solver);
    rows[j] = {fit_decay_rate(coarse_grain(tr)), max_mass_drift(tr), max_gce_residual(tr)};
    ctx.maybe_write_trajectory("trajectory_eps_" + eps_tag(cfg.epsilon[j]) + ".csv", tr);
  });

  CsvTable t({"epsilon", "delta_fit", "rel_error", "mass_drift", "gce_residual"});
  std::vector<double> errors;
  double mass = 0.0;
  json runs = json::array();
  for (std::size_t j = 0; j < ne; ++j) {
    const double err = std::abs(rows[j].fit - target) / target;
    errors.push_back(err);
    mass = std::max(mass, rows[j].mass);
    t.row({cfg.epsilon[j], rows[j].fit, err, rows[j].mass, rows[j].gce});
    runs.push_back({{"epsilon", cfg.epsilon[j]}, {"delta_fit", rows[j].fit}, {"rel_error", err}});
  }
  t.write(ctx.file("mixed_diffusion_fit.csv"));

  const double eff_err = std::abs(rows[ne].fit - target) / target;
  ctx.report.summary["delta_hat"] = target;
  ctx.report.summary["runs"] = runs;
  ctx.report.summary["effective"] = {{"delta_fit", rows[ne].fit}, {"rel_error", eff_err}};
  ctx.report.checks.push_back(bound_check("rel_error_at_smallest_eps", errors.back(), "<=", 0.02));
  ctx.report.checks.push_back(monotone_check("rel_error_decreasing_in_eps", errors));
  ctx.report.checks.push_back(bound_check("max_mass_drift", std::max(mass, rows[ne].mass), "<=", 1e-12));
}

void run_eps_sweep(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Grid g(cfg.n_cells);
  const Tilt tilt = cfg.tilt.build(2);
  const State c0 = two_species_initial(cfg, g, tilt);
  const std::size_t ne = cfg.epsilon.size();

  struct Row {
    double defect = 0.0, dt = 0.0, mass = 0.0;
  };
  std::vector<Row> rows(ne);
  parallel_for(ne, [&](std::size_t j) {
    const double eps = cfg.epsilon[j];
    const SystemParams p = cfg.params(eps);
    const StationaryMeasure wv = stationary_measure(g, p, tilt);
    // int (sqrt(rho1) - sqrt(rho2))^2 dx with rho_i = c_i / w_i^V.
    auto defect = [&](const State& s) {
      double d = 0.0;
      for (std::size_t k = 0; k < g.n_cells(); ++k) {
        const double a = std::sqrt(s(0, k) / wv.cells(0, k)) - std::sqrt(s(1, k) / wv.cells(1, k));
        d += g.h() * a * a;
      }
      return d;
    };
    SolverConfig sc = cfg.solver;
    if (cfg.steps_per_fast_time > 0) sc.dt = std::min(sc.dt, eps / static_cast<double>(cfg.steps_per_fast_time));
    double t_prev = 0.0, d_prev = defect(c0), integral = 0.0, mass = 0.0;
    const double m0 = total_mass(c0);
    integrate_eps_system(c0, p, tilt, sc, [&](double t, const State& s, const FluxAssignment&) {
      const double d = defect(s);
      integral += 0.5 * (t - t_prev) * (d + d_prev);
      t_prev = t;
      d_prev = d;
      mass = std::max(mass, std::abs(total_mass(s) - m0));
    });
    rows[j] = {integral, sc.dt, mass};
  });

  CsvTable t({"epsilon", "defect", "ratio", "dt"});
  std::vector<double> eps, defects;
  double mass = 0.0;
  for (std::size_t j = 0; j < ne; ++j) {
    t.row({cfg.epsilon[j], rows[j].defect, rows[j].defect / cfg.epsilon[j], rows[j].dt});
    eps.push_back(cfg.epsilon[j]);
    defects.push_back(rows[j].defect);
    mass = std::max(mass, rows[j].mass);
  }
  t.write(ctx.file("eps_sweep.csv"));
  const double order = ne >= 2 ? loglog_slope(eps, defects) : std::numeric_limits<double>::quiet_NaN();
  ctx.report.summary["defect_order"] = order;
  ctx.report.checks.push_back(bound_check("defect_loglog_slope", order, ">=", 0.9));
  ctx.report.checks.push_back(bound_check("max_mass_drift", mass, "<=", 1e-12));
}

void run_edb_refinement(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const RefinementSpec& ref = *cfg.refinement;
  const Tilt tilt = cfg.tilt.build(2);
  const std::size_t ne = cfg.epsilon.size();
  const std::size_t L = ref.levels;
  // Jobs: one per (system, level); system ne is the effective equation.
  struct Row {
    double residual = 0.0, drop = 0.0, lambda_sum = 0.0;
    DissipationBreakdown d;
  };
  std::vector<Row> rows((ne + 1) * L);
  parallel_for(rows.size(), [&](std::size_t job) {
    const std::size_t sys = job / L;
    const std::size_t lvl = job % L;
    const Grid g(ref.n_cells << lvl);
    SolverConfig sc = cfg.solver;
    sc.dt = ref.dt / static_cast<double>(1u << lvl);
    const SystemParams p = cfg.params(sys < ne ? cfg.epsilon[sys] : 1.0);
    Row& r = rows[job];
    if (sys < ne) {
      const Trajectory tr = solve_eps_system(two_species_initial(cfg, g, tilt), p, tilt, sc);
      r.d = dissipation_functional(tr, p, tilt);
      r.residual = edb_residual(tr, p, tilt, r.d);
      r.drop = energy(tr.front(), p, tilt) - energy(tr.back(), p, tilt);
    } else {
      const Trajectory te = solve_effective(cosine_profile(g, cfg.initial.amplitude), p, tilt, sc);
      r.residual = effective_edb_residual(te, p, tilt);
      r.drop = energy(lift_to_manifold(te.front(), p, tilt), p, tilt) -
               energy(lift_to_manifold(te.back(), p, tilt), p, tilt);
      if (g.n_cells() >= 4) r.lambda_sum = lagrange_sum_defect(lagrange_multipliers(te.back(), p, tilt));
    }
  });

  CsvTable t({"epsilon", "level", "n_cells", "dt", "energy_drop", "edb_residual", "rel_residual"});
  CsvTable breakdown({"epsilon", "vel_diff", "vel_react", "slope_diff", "slope_react", "total", "edb_residual"});
  json systems = json::array();
  for (std::size_t sys = 0; sys <= ne; ++sys) {
    const double eps = sys < ne ? cfg.epsilon[sys] : 0.0;  // 0 marks the effective system
    std::vector<double> hs, res;
    for (std::size_t lvl = 0; lvl < L; ++lvl) {
      const Row& r = rows[sys * L + lvl];
      const double n = static_cast<double>(ref.n_cells << lvl);
      t.row({eps, static_cast<double>(lvl), n, ref.dt / static_cast<double>(1u << lvl), r.drop, r.residual,
             std::abs(r.residual) / r.drop});
      hs.push_back(1.0 / n);
      res.push_back(std::abs(r.residual));
      if (sys < ne) {
        const DissipationBreakdown& d = r.d;
        if (lvl + 1 == L)
          breakdown.row({eps, d.vel_diff, d.vel_react, d.slope_diff, d.slope_react, d.total(), r.residual});
      }
    }
    const std::string label = sys < ne ? "eps_" + eps_tag(eps) : "effective";
    const double order = L >= 2 ? loglog_slope(hs, res) : std::numeric_limits<double>::quiet_NaN();
    const Row& fine = rows[sys * L + L - 1];
    const double rel = std::abs(fine.residual) / fine.drop;
    systems.push_back({{"system", label}, {"order", order}, {"finest_rel_residual", rel}});
    ctx.report.checks.push_back(bound_check(label + "_edb_order", order, ">=", 0.8));
    ctx.report.checks.push_back(bound_check(label + "_finest_rel_residual", rel, "<=", 1e-3));
  }
  t.write(ctx.file("edb_refinement.csv"));
  breakdown.write(ctx.file("dissipation_breakdown.csv"));
  ctx.report.summary["systems"] = systems;

  if (!cfg.tilt.build(2).is_zero() && L >= 2) {
    CsvTable lt({"level", "n_cells", "lambda_sum", "ratio"});
    double worst_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t lvl = 0; lvl < L; ++lvl) {
      const double v = rows[ne * L + lvl].lambda_sum;
      const double ratio = lvl ? rows[ne * L + lvl - 1].lambda_sum / v : std::numeric_limits<double>::quiet_NaN();
      if (lvl) worst_ratio = std::min(worst_ratio, ratio);
      lt.row({static_cast<double>(lvl), static_cast<double>(ref.n_cells << lvl), v, ratio});
    }
    lt.write(ctx.file("lagrange_refinement.csv"));
    ctx.report.checks.push_back(bound_check("lambda_sum_reduction_per_halving", worst_ratio, ">=", 1.8));
  }
}

void run_recovery_study(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Grid g(cfg.n_cells);
  const Tilt tilt = cfg.tilt.build(2);
  const SystemParams p0 = cfg.params(1.0);
  const Trajectory limit = solve_effective(cosine_profile(g, cfg.initial.amplitude), p0, tilt, cfg.solver);
  const double d0_limit = effective_dissipation(limit, p0, tilt);
  const std::size_t ne = cfg.epsilon.size();

  struct Row {
    double gamma = 0.0, react = 0.0, d_eps = 0.0, d_0 = 0.0, rate = 0.0, bound = 0.0, gce = 0.0;
  };
  std::vector<Row> rows(ne);
  parallel_for(ne, [&](std::size_t j) {
    const double eps = cfg.epsilon[j];
    const SystemParams p = cfg.params(eps);
    const RecoverySequence rs = build_recovery_sequence(limit, p, tilt, eps, cfg.recovery);
    const DissipationBreakdown d = flux_dissipation(rs.traj, p, tilt);
    rows[j] = {rs.gamma, d.vel_react, d.total(), constrained_dissipation(rs.traj, p, tilt),
               rs.rate_norm, rs.rate_bound, max_gce_residual(rs.traj)};
    ctx.maybe_write_trajectory("recovery_eps_" + eps_tag(eps) + ".csv", rs.traj);
  });

  CsvTable t({"epsilon", "gamma", "reaction_cost_term", "D_eps", "D_0", "gap"});
  std::vector<double> react, gap;
  double gce = 0.0;
  json runs = json::array();
  for (std::size_t j = 0; j < ne; ++j) {
    const Row& r = rows[j];
    const double gj = std::abs(r.d_eps - r.d_0);
    t.row({cfg.epsilon[j], r.gamma, r.react, r.d_eps, r.d_0, gj});
    react.push_back(r.react);
    gap.push_back(gj);
    gce = std::max(gce, r.gce);
    runs.push_back({{"epsilon", cfg.epsilon[j]},
                    {"rate_norm", r.rate},
                    {"rate_bound", r.bound},
                    {"rate_bound_holds", r.rate <= r.bound}});
  }
  t.write(ctx.file("recovery.csv"));
  ctx.report.summary["D_0_limit"] = d0_limit;
  ctx.report.summary["runs"] = runs;
  ctx.report.checks.push_back(monotone_check("reaction_cost_decreasing", react));
  ctx.report.checks.push_back(bound_check("reaction_cost_at_smallest_eps", react.back(), "<=", 1e-4));
  ctx.report.checks.push_back(monotone_check("gap_decreasing", gap));
  ctx.report.checks.push_back(bound_check("max_gce_residual", gce, "<=", 1e-12));
}

MarkovGenerator load_generator(const ExperimentConfig& cfg) {
  const GeneratorSpec& spec = *cfg.generator;
  if (spec.source == "two_species") {
    MarkovGenerator gen = MarkovGenerator::two_species(cfg.params(1.0));
    return gen;
  }
  if (spec.source == "inline") return MarkovGenerator::from_json(spec.document);
  if (spec.source == "file") {
    std::ifstream in(spec.path);
    if (!in) throw ConfigError("cannot open generator file " + spec.path.string(), {"generator.path"});
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ConfigError(std::string("generator file is not valid JSON: ") + e.what(), {"generator.path"});
    }
    return MarkovGenerator::from_json(doc);
  }
  return random_detailed_balance_generator(spec.n_species, cfg.seed, spec.fast_edges);
}

void run_multispecies_check(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const MarkovGenerator gen = load_generator(cfg);
  const std::size_t ns = gen.size();
  const GeneratorReport rep = validate_generator(gen);
  ctx.report.summary["generator"] = gen.to_json();
  ctx.report.summary["generator_failures"] = rep.failures;
  ctx.report.checks.push_back({"generator_valid", rep.valid ? 1.0 : 0.0, 1.0, ">=", rep.valid});
  if (!rep.valid) return;

  if ((cfg.tilt.kind == "cosine" && cfg.tilt.amplitude.size() != ns) ||
      (cfg.tilt.kind == "constant" && cfg.tilt.offset.size() != ns))
    throw ConfigError("tilt arrays must have one entry per species", {"tilt"});
  const Grid g(cfg.n_cells);
  const Tilt tilt = cfg.tilt.build(ns);
  const State hat = cosine_profile(g, cfg.initial.amplitude);
  State c0(g, ns);
  for (std::size_t i = 0; i < ns; ++i)
    for (std::size_t k = 0; k < g.n_cells(); ++k) c0(i, k) = hat(0, k) / static_cast<double>(ns);
  if (cfg.initial.placement == "manifold") {
    // Equilibrium split of c_hat under the limit stationary vector.
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t k = 0; k < g.n_cells(); ++k) c0(i, k) = rep.w_limit(static_cast<Eigen::Index>(i)) * hat(0, k);
  }

  const std::size_t ne = cfg.epsilon.size();
  struct Row {
    double symmetry = 0.0, mass = 0.0, residual = 0.0, drop = 0.0;
    MultispeciesBreakdown b;
  };
  std::vector<Row> rows(ne);
  parallel_for(ne, [&](std::size_t j) {
    const double eps = cfg.epsilon[j];
    const KappaCoefficients kc = kappa_coefficients(gen, eps);
    Row& r = rows[j];
    for (Eigen::Index a = 0; a < kc.kappa.rows(); ++a)
      for (Eigen::Index b = 0; b < kc.kappa.cols(); ++b)
        r.symmetry = std::max(r.symmetry, std::abs(kc.kappa(a, b) - kc.kappa(b, a)) /
                                              std::max(1.0, std::abs(kc.kappa(a, b))));
    const Trajectory tr = solve_multispecies(c0, gen, eps, tilt, cfg.solver);
    r.b = multispecies_dissipation(tr, gen, eps, tilt);
    const std::vector<double> w(kc.w.data(), kc.w.data() + kc.w.size());
    r.drop = energy(tr.front(), w, tilt) - energy(tr.back(), w, tilt);
    r.residual = r.b.total.total() - r.drop;
    r.mass = max_mass_drift(tr);
    ctx.maybe_write_trajectory("multispecies_eps_" + eps_tag(eps) + ".csv", tr);
  });

  CsvTable t({"epsilon", "vel_diff", "vel_react_slow", "vel_react_fast", "slope_diff", "slope_react_slow",
              "slope_react_fast", "total", "edb_residual", "mass_drift", "kappa_asymmetry"});
  double sym = 0.0, mass = 0.0;
  for (std::size_t j = 0; j < ne; ++j) {
    const Row& r = rows[j];
    t.row({cfg.epsilon[j], r.b.total.vel_diff, r.b.vel_react_slow, r.b.vel_react_fast, r.b.total.slope_diff,
           r.b.slope_react_slow, r.b.slope_react_fast, r.b.total.total(), r.residual, r.mass, r.symmetry});
    sym = std::max(sym, r.symmetry);
    mass = std::max(mass, r.mass);
  }
  t.write(ctx.file("multispecies.csv"));
  ctx.report.checks.push_back(bound_check("kappa_asymmetry", sym, "<=", 1e-13));
  ctx.report.checks.push_back(bound_check("max_mass_drift", mass, "<=", 1e-12));
}

void write_summary(const ExperimentConfig& cfg, ExperimentReport& report) {
  json checks = json::array();
  for (const Check& c : report.checks)
    checks.push_back({{"name", c.name}, {"value", c.value}, {"relation", c.relation},
                      {"threshold", c.threshold}, {"pass", c.pass}});
  json doc = {{"experiment", report.experiment},
              {"prng", "mt19937_64"},
              {"seed", cfg.seed},
              {"config", cfg.to_json()},
              {"results", report.summary},
              {"checks", checks},
              {"passed", report.passed()}};
  const auto json_path = cfg.output_dir / "summary.json";
  std::ofstream(json_path) << doc.dump(2) << '\n';

  std::ostringstream txt;
  txt << "experiment " << report.experiment << "\n";
  txt << "seed " << cfg.seed << " (mt19937_64)\n";
  for (const Check& c : report.checks)
    txt << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << short_fmt(c.value) << ' ' << c.relation << ' '
        << short_fmt(c.threshold) << "\n";
  txt << (report.passed() ? "overall PASS\n" : "overall FAIL\n");
  const auto txt_path = cfg.output_dir / "summary.txt";
  std::ofstream(txt_path) << txt.str();
  report.files.push_back(json_path);
  report.files.push_back(txt_path);
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentKind parse_experiment_kind(const std::string& name) {
  if (name == "eps_sweep") return ExperimentKind::EpsSweep;
  if (name == "edb_refinement") return ExperimentKind::EdbRefinement;
  if (name == "mixed_diffusion_fit") return ExperimentKind::MixedDiffusionFit;
  if (name == "recovery_study") return ExperimentKind::RecoveryStudy;
  if (name == "multispecies_check") return ExperimentKind::MultispeciesCheck;
  throw ConfigError("unknown experiment '" + name + "'", {"experiment"});
}

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::EpsSweep:
      return "eps_sweep";
    case ExperimentKind::EdbRefinement:
      return "edb_refinement";
    case ExperimentKind::MixedDiffusionFit:
      return "mixed_diffusion_fit";
    case ExperimentKind::RecoveryStudy:
      return "recovery_study";
    case ExperimentKind::MultispeciesCheck:
      return "multispecies_check";
  }
  return "unknown";
}

Tilt TiltSpec::build(std::size_t n_species) const {
  if (kind == "zero") return Tilt::zero();
  auto at = [&](const std::vector<double>& v, std::size_t i) { return v.empty() ? 0.0 : v.at(i); };
  if (kind == "constant") {
    std::vector<double> values;
    for (std::size_t i = 0; i < n_species; ++i) values.push_back(at(offset, i));
    return Tilt::constant(values);
  }
  std::vector<Tilt::Profile> profiles;
  for (std::size_t i = 0; i < n_species; ++i) {
    const double a = at(amplitude, i), kw = at(wavenumber, i), o = at(offset, i);
    profiles.push_back([a, kw, o](double x) { return o + a * std::cos(kw * kPi * x); });
  }
  return Tilt(std::move(profiles));
}

SystemParams ExperimentConfig::params(double eps) const { return SystemParams(delta, alpha, beta, eps); }

ExperimentConfig ExperimentConfig::from_json(const json& doc, const std::filesystem::path& base_dir) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  Section root(doc, "", errors);
  if (!doc.is_object()) throw ConfigError("config must be a JSON object", errors);

  const auto kind_name = root.string("experiment", true);
  if (kind_name) {
    try {
      cfg.experiment = parse_experiment_kind(*kind_name);
    } catch (const ConfigError&) {
      root.bad("experiment");
    }
  }
  if (auto out = root.string("output_dir", true)) {
    if (out->empty()) root.bad("output_dir");
    cfg.output_dir = std::filesystem::path(*out).is_absolute() ? std::filesystem::path(*out) : base_dir / *out;
  }

  {
    Section s = root.child("grid", true);
    if (auto n = s.count("n_cells", true, 2)) cfg.n_cells = *n;
    s.finish();
  }
  {
    Section s = root.child("solver", true);
    if (auto v = s.number("dt", true, true)) cfg.solver.dt = *v;
    if (auto v = s.number("T", true, true)) cfg.solver.T = *v;
    if (auto v = s.string("scheme", false)) {
      try {
        cfg.solver.scheme = parse_scheme(*v);
      } catch (const DomainError&) {
        s.bad("scheme");
      }
    }
    if (cfg.solver.dt > 0.0 && cfg.solver.T > 0.0 && cfg.solver.T < cfg.solver.dt) s.bad("T");
    s.finish();
  }
  {
    Section s = root.child("params", true);
    if (auto v = s.numbers("delta", true)) {
      if (v->size() != 2 || !((*v)[0] > 0.0) || !((*v)[1] > 0.0))
        s.bad("delta");
      else
        cfg.delta = {(*v)[0], (*v)[1]};
    }
    if (auto v = s.number("alpha", true, true)) cfg.alpha = *v;
    if (auto v = s.number("beta", true, true)) cfg.beta = *v;
    s.finish();
  }
  if (auto v = root.numbers("epsilon", true)) {
    bool ok = !v->empty();
    for (std::size_t i = 0; i < v->size() && ok; ++i) ok = (*v)[i] > 0.0 && (i == 0 || (*v)[i] < (*v)[i - 1]);
    if (ok)
      cfg.epsilon = *v;
    else
      root.bad("epsilon");
  }
  {
    Section s = root.child("tilt", true);
    if (auto k = s.string("kind", true)) {
      cfg.tilt.kind = *k;
      if (*k == "zero") {
      } else if (*k == "constant") {
        if (auto v = s.numbers("offset", true)) cfg.tilt.offset = *v;
      } else if (*k == "cosine") {
        if (auto v = s.numbers("amplitude", true)) cfg.tilt.amplitude = *v;
        if (auto v = s.numbers("wavenumber", true)) cfg.tilt.wavenumber = *v;
        if (auto v = s.numbers("offset", false)) cfg.tilt.offset = *v;
        if (!cfg.tilt.offset.empty() && cfg.tilt.offset.size() != cfg.tilt.amplitude.size()) s.bad("offset");
        if (cfg.tilt.wavenumber.size() != cfg.tilt.amplitude.size()) s.bad("wavenumber");
      } else {
        s.bad("kind");
      }
    }
    s.finish();
  }
  {
    Section s = root.child("initial", true);
    if (auto v = s.number("amplitude", true, false)) {
      if (!(std::abs(*v) < 1.0)) s.bad("amplitude");
      cfg.initial.amplitude = *v;
    }
    if (auto v = s.string("placement", true)) {
      if (*v != "manifold" && *v != "split") s.bad("placement");
      cfg.initial.placement = *v;
    }
    s.finish();
  }
  if (root.has("seed")) {
    const json* v = root.raw("seed", false);
    if (v->is_number_unsigned())
      cfg.seed = v->get<std::uint64_t>();
    else if (v->is_number_integer() && v->get<long long>() >= 0)
      cfg.seed = static_cast<std::uint64_t>(v->get<long long>());
    else
      root.bad("seed");
  }
  if (root.has("output")) {
    Section s = root.child("output", false);
    if (auto v = s.count("trajectory_stride", false, 0)) cfg.trajectory_stride = *v;
    s.finish();
  }

  // Kind-specific sections; a section that does not belong to the kind stays unread and is reported.
  const ExperimentKind kind = cfg.experiment;
  const bool kind_ok = kind_name.has_value() && std::find(errors.begin(), errors.end(), "experiment") == errors.end();
  if (kind_ok && kind == ExperimentKind::EpsSweep && root.has("sweep")) {
    Section s = root.child("sweep", false);
    if (auto v = s.count("steps_per_fast_time", false, 1)) cfg.steps_per_fast_time = *v;
    s.finish();
  }
  if (kind_ok && kind == ExperimentKind::EdbRefinement) {
    Section s = root.child("refinement", true);
    RefinementSpec r;
    if (auto v = s.count("levels", true, 2)) r.levels = *v;
    if (auto v = s.count("n_cells", true, 2)) r.n_cells = *v;
    if (auto v = s.number("dt", true, true)) r.dt = *v;
    if (r.levels > 12) s.bad("levels");
    s.finish();
    cfg.refinement = r;
  }
  if (kind_ok && kind == ExperimentKind::RecoveryStudy && root.has("recovery")) {
    Section s = root.child("recovery", false);
    if (auto v = s.number("lambda", false, true)) cfg.recovery.lambda = *v;
    if (auto v = s.number("alpha", false, true)) cfg.recovery.alpha = *v;
    if (auto v = s.number("gamma_scale", false, true)) cfg.recovery.gamma_scale = *v;
    if (auto v = s.number("mollifier_scale", false, true)) cfg.recovery.mollifier_scale = *v;
    if (!(cfg.recovery.lambda < 1.0)) s.bad("lambda");
    s.finish();
  }
  if (kind_ok && kind == ExperimentKind::MultispeciesCheck) {
    Section s = root.child("generator", true);
    GeneratorSpec g;
    if (auto src = s.string("source", true)) {
      g.source = *src;
      if (*src == "two_species") {
      } else if (*src == "inline") {
        if (const json* d = s.raw("document", true)) g.document = *d;
      } else if (*src == "file") {
        if (auto p = s.string("path", true)) {
          g.path = std::filesystem::path(*p).is_absolute() ? std::filesystem::path(*p) : base_dir / *p;
          if (!std::filesystem::exists(g.path)) s.bad("path");
        }
      } else if (*src == "random") {
        if (!root.has("seed")) root.bad("seed");
        if (auto n = s.count("n_species", true, 2)) g.n_species = *n;
        if (const json* e = s.raw("fast_edges", true)) {
          bool ok = e->is_array();
          if (ok)
            for (const auto& p : *e) {
              if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() || !p[1].is_number_unsigned()) {
                ok = false;
                break;
              }
              const auto a = p[0].get<std::size_t>(), b = p[1].get<std::size_t>();
              if (a == b || a >= g.n_species || b >= g.n_species) {
                ok = false;
                break;
              }
              g.fast_edges.emplace_back(a, b);
            }
          if (!ok) s.bad("fast_edges");
        }
      } else {
        s.bad("source");
      }
    }
    s.finish();
    cfg.generator = g;
  }
  if (kind_ok && kind == ExperimentKind::MixedDiffusionFit && cfg.tilt.kind != "zero") root.bad("tilt.kind");
  if (kind_ok && kind != ExperimentKind::MultispeciesCheck && cfg.tilt.kind == "cosine") {
    if (cfg.tilt.amplitude.size() != 2) errors.push_back("tilt.amplitude");
  }
  if (kind_ok && kind != ExperimentKind::MultispeciesCheck && cfg.tilt.kind == "constant" &&
      cfg.tilt.offset.size() != 2)
    errors.push_back("tilt.offset");
  root.finish();

  if (!errors.empty()) {
    std::sort(errors.begin(), errors.end());
    errors.erase(std::unique(errors.begin(), errors.end()), errors.end());
    throw ConfigError("unknown, missing or malformed keys", errors);
  }
  return cfg;
}

json ExperimentConfig::to_json() const {
  json tilt_doc = {{"kind", tilt.kind}};
  if (tilt.kind == "constant") tilt_doc["offset"] = tilt.offset;
  if (tilt.kind == "cosine") {
    tilt_doc["amplitude"] = tilt.amplitude;
    tilt_doc["wavenumber"] = tilt.wavenumber;
    if (!tilt.offset.empty()) tilt_doc["offset"] = tilt.offset;
  }
  json doc = {{"experiment", to_string(experiment)},
              {"output_dir", output_dir.string()},
              {"grid", {{"n_cells", n_cells}}},
              {"solver", {{"dt", solver.dt}, {"T", solver.T}, {"scheme", to_string(solver.scheme)}}},
              {"params", {{"delta", delta}, {"alpha", alpha}, {"beta", beta}}},
              {"epsilon", epsilon},
              {"tilt", tilt_doc},
              {"initial", {{"amplitude", initial.amplitude}, {"placement", initial.placement}}},
              {"seed", seed},
              {"output", {{"trajectory_stride", trajectory_stride}}}};
  if (experiment == ExperimentKind::EpsSweep) doc["sweep"] = {{"steps_per_fast_time", steps_per_fast_time}};
  if (refinement)
    doc["refinement"] = {{"levels", refinement->levels}, {"n_cells", refinement->n_cells}, {"dt", refinement->dt}};
  if (experiment == ExperimentKind::RecoveryStudy)
    doc["recovery"] = {{"lambda", recovery.lambda},
                       {"alpha", recovery.alpha},
                       {"gamma_scale", recovery.gamma_scale},
                       {"mollifier_scale", recovery.mollifier_scale}};
  if (generator) {
    json g = {{"source", generator->source}};
    if (generator->source == "inline") g["document"] = generator->document;
    if (generator->source == "file") g["path"] = generator->path.string();
    if (generator->source == "random") {
      g["n_species"] = generator->n_species;
      json edges = json::array();
      for (const auto& [a, b] : generator->fast_edges) edges.push_back({a, b});
      g["fast_edges"] = edges;
    }
    doc["generator"] = g;
  }
  return doc;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string(), {"<file>"});
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what(), {"<file>"});
  }
  return ExperimentConfig::from_json(doc, path.parent_path());
}

json default_config() {
  return {{"experiment", "mixed_diffusion_fit"},
          {"output_dir", "out/mixed_diffusion_fit"},
          {"grid", {{"n_cells", 200}}},
          {"solver", {{"dt", 1e-4}, {"T", 0.1}, {"scheme", "strang_exact_reaction"}}},
          {"params", {{"delta", {1.0, 2.0}}, {"alpha", 1.0}, {"beta", 3.0}}},
          {"epsilon", {1e-1, 1e-2, 1e-3, 1e-4}},
          {"tilt", {{"kind", "zero"}}},
          {"initial", {{"amplitude", 0.5}, {"placement", "manifold"}}},
          {"seed", 1},
          {"output", {{"trajectory_stride", 0}}}};
}

bool ExperimentReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  ExperimentReport report;
  report.experiment = to_string(cfg.experiment);
  std::filesystem::create_directories(cfg.output_dir);
  Context ctx(cfg, report);
  switch (cfg.experiment) {
    case ExperimentKind::EpsSweep:
      run_eps_sweep(ctx);
      break;
    case ExperimentKind::EdbRefinement:
      run_edb_refinement(ctx);
      break;
    case ExperimentKind::MixedDiffusionFit:
      run_mixed_diffusion_fit(ctx);
      break;
    case ExperimentKind::RecoveryStudy:
      run_recovery_study(ctx);
      break;
    case ExperimentKind::MultispeciesCheck:
      run_multispecies_check(ctx);
      break;
  }
  write_summary(cfg, report);
  return report;
}

double fit_decay_rate(const Trajectory& hat) {
  if (hat.n_species() != 1) throw ShapeError("fit_decay_rate expects a coarse trajectory");
  if (hat.size() < 2) throw DomainError("fit_decay_rate needs at least two time points");
  const Grid& g = hat.grid();
  std::vector<double> t, y;
  for (std::size_t m = 0; m < hat.size(); ++m) {
    double a = 0.0, mass = 0.0;
    for (std::size_t k = 0; k < g.n_cells(); ++k) {
      a += 2.0 * g.h() * hat.state(m)(0, k) * std::cos(kPi * g.center(k));
      mass += g.h() * std::abs(hat.state(m)(0, k));
    }
    if (!(std::abs(a) > 1e-12 * mass) || !std::isfinite(a)) throw DomainError("first cosine mode amplitude degenerates");
    t.push_back(hat.times()[m]);
    y.push_back(std::log(std::abs(a)));
  }
  const double n = static_cast<double>(t.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sy += y[i];
    stt += t[i] * t[i];
    sty += t[i] * y[i];
  }
  const double slope = (n * sty - st * sy) / (n * stt - st * st);
  return -slope / (kPi * kPi);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ShapeError("loglog_slope needs two or more matching points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("loglog_slope needs positive data");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("EDPFLOW_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

void parallel_for(std::size_t jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = worker_count(jobs);
  if (workers <= 1) {
    for (std::size_t j = 0; j < jobs; ++j) body(j);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  auto work = [&] {
    for (;;) {
      std::size_t j;
      {
        std::lock_guard lock(mu);
        if (error || next >= jobs) return;
        j = next++;
      }
      try {
        body(j);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

State cosine_profile(const Grid& grid, double amplitude) {
  State hat(grid, 1);
  double mass = 0.0;
  for (std::size_t k = 0; k < grid.n_cells(); ++k) {
    hat(0, k) = 1.0 + amplitude * std::cos(kPi * grid.center(k));
    mass += grid.h() * hat(0, k);
  }
  for (std::size_t k = 0; k < grid.n_cells(); ++k) hat(0, k) /= mass;
  return hat;
}

}  // namespace edpflow

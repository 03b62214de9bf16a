#include "edpflow/dissipation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "block_tridiag.hpp"
#include "edpflow/coarsegrain.hpp"
#include "edpflow/errors.hpp"

namespace edpflow {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMachEps = std::numeric_limits<double>::epsilon();

// Everything the Newton loop needs about R*(c, .) with c frozen.
struct DualModel {
  std::size_t ns = 0;
  std::size_t n = 0;
  double h = 0.0;
  SpeciesField mob;                       // face mobilities
  std::vector<ReactionEdge> edges;
  std::vector<std::vector<double>> root;  // sqrt(c_i c_j) per edge and cell

  double r_star(const SpeciesField& xi) const {
    double r = 0.0;
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const double d = xi(i, k + 1) - xi(i, k);
        r += 0.5 * mob(i, k + 1) * d * d / h;
      }
    for (std::size_t e = 0; e < edges.size(); ++e)
      for (std::size_t k = 0; k < n; ++k)
        r += h * edges[e].kappa * root[e][k] * cosh_pair::dual(xi(edges[e].i, k) - xi(edges[e].j, k));
    return r;
  }

  double phi(const SpeciesField& xi, const SpeciesField& v) const {
    double s = 0.0;
    for (std::size_t q = 0; q < xi.flat().size(); ++q) s += xi.flat()[q] * v.flat()[q];
    return h * s - r_star(xi);
  }

  FluxAssignment fluxes(const SpeciesField& xi, const Grid& grid) const {
    FluxAssignment f(grid, ns);
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t k = 0; k + 1 < n; ++k) f.J(i, k + 1) = mob(i, k + 1) * (xi(i, k + 1) - xi(i, k)) / h;
    for (std::size_t e = 0; e < edges.size(); ++e)
      for (std::size_t k = 0; k < n; ++k) {
        const ReactionEdge& ed = edges[e];
        const double b = ed.kappa * root[e][k] * cosh_pair::dual_prime(xi(ed.i, k) - xi(ed.j, k));
        f.b(ed.i, k) += b;
        f.b(ed.j, k) -= b;
      }
    return f;
  }
};

double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

PrimalResult primal_R(const State& state, std::span<const double> delta, std::span<const ReactionEdge> edges,
                      const SpeciesField& v, const DualOptions& options) {
  const Grid& grid = state.grid();
  const std::size_t ns = state.n_species();
  const std::size_t n = grid.n_cells();
  const double h = grid.h();
  if (v.n_species() != ns || v.n_points() != n) throw ShapeError("primal_R: rate shape mismatch");
  for (const ReactionEdge& e : edges)
    if (e.i >= ns || e.j >= ns || e.i == e.j) throw ShapeError("primal_R: invalid reaction edge");

  double mass = 0.0;
  double mass_abs = 0.0;
  for (double x : v.flat()) {
    mass += x * h;
    mass_abs += std::abs(x) * h;
  }
  if (!std::isfinite(mass) || std::abs(mass) > 1e-8 * std::max(1.0, mass_abs))
    throw DomainError("rates do not preserve total mass");
  SpeciesField vp = v;
  for (double& x : vp.flat()) x -= mass / static_cast<double>(ns);

  DualModel model;
  model.ns = ns;
  model.n = n;
  model.h = h;
  model.mob = face_mobility(state, delta);
  model.edges.assign(edges.begin(), edges.end());
  for (const ReactionEdge& e : edges) {
    std::vector<double> r(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double p = state(e.i, k) * state(e.j, k);
      if (p < 0.0) throw DomainError("primal_R: negative density");
      r[k] = std::sqrt(p);
    }
    model.root.push_back(std::move(r));
  }

  const double vscale = std::max(1.0, max_abs(vp.flat()));
  const double threshold = options.tolerance * vscale;
  const Eigen::Index m = static_cast<Eigen::Index>(ns);

  SpeciesField xi(ns, n);
  double gnorm = kInf;
  int iter = 0;
  for (;; ++iter) {
    const FluxAssignment f = model.fluxes(xi, grid);
    // residual g / h = v + div J - b, and a rounding scale for it
    Eigen::VectorXd g(static_cast<Eigen::Index>(ns * n));
    double noise = 0.0;
    gnorm = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < ns; ++i) {
        const double jr = f.J(i, k + 1);
        const double jl = f.J(i, k);
        const double r = vp(i, k) + (jr - jl) / h - f.b(i, k);
        g(static_cast<Eigen::Index>(k * ns + i)) = h * r;
        gnorm = std::max(gnorm, std::abs(r));
        noise = std::max(noise, (std::abs(jr) + std::abs(jl)) / h + std::abs(f.b(i, k)) + std::abs(vp(i, k)));
      }
    if (gnorm <= threshold + 64.0 * kMachEps * noise) break;
    if (iter >= options.max_iterations) throw IterationLimitError("dual Newton iteration limit", gnorm);

    std::vector<Eigen::MatrixXd> diag(n, Eigen::MatrixXd::Zero(m, m));
    std::vector<Eigen::MatrixXd> upper(n > 0 ? n - 1 : 0, Eigen::MatrixXd::Zero(m, m));
    for (std::size_t i = 0; i < ns; ++i)
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const double a = model.mob(i, k + 1) / h;
        const auto ii = static_cast<Eigen::Index>(i);
        diag[k](ii, ii) += a;
        diag[k + 1](ii, ii) += a;
        upper[k](ii, ii) = -a;
      }
    for (std::size_t e = 0; e < edges.size(); ++e)
      for (std::size_t k = 0; k < n; ++k) {
        const ReactionEdge& ed = edges[e];
        const double a = h * ed.kappa * model.root[e][k] * cosh_pair::dual_second(xi(ed.i, k) - xi(ed.j, k));
        const auto ii = static_cast<Eigen::Index>(ed.i);
        const auto jj = static_cast<Eigen::Index>(ed.j);
        diag[k](ii, ii) += a;
        diag[k](jj, jj) += a;
        diag[k](ii, jj) -= a;
        diag[k](jj, ii) -= a;
      }
    // Pin xi_{0,0}; unknowns with no coupling at all get a unit pivot (their rows are zero).
    diag[0].row(0).setZero();
    diag[0].col(0).setZero();
    diag[0](0, 0) = 1.0;
    if (n > 1) upper[0].row(0).setZero();
    g(0) = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      for (Eigen::Index i = 0; i < m; ++i)
        if (diag[k](i, i) == 0.0) diag[k](i, i) = 1.0;

    const Eigen::VectorXd d = detail::solve_block_tridiagonal(diag, upper, g);
    const double slope = g.dot(d);
    const double phi0 = model.phi(xi, vp);
    SpeciesField trial(ns, n);
    double t = 1.0;
    for (;;) {
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < ns; ++i) trial(i, k) = xi(i, k) + t * d(static_cast<Eigen::Index>(k * ns + i));
      const double phi1 = model.phi(trial, vp);
      // Near the optimum the decrease drops below rounding of phi; accept the full step there.
      if (t == 1.0 && slope <= 1e-13 * (1.0 + std::abs(phi0))) break;
      if (std::isfinite(phi1) && phi1 >= phi0 + 1e-4 * t * slope) break;
      t *= 0.5;
      if (t < 1e-14) throw IterationLimitError("dual Newton line search stalled", gnorm);
    }
    xi = std::move(trial);
  }

  double mean = 0.0;
  for (double x : xi.flat()) mean += x;
  mean /= static_cast<double>(ns * n);
  for (double& x : xi.flat()) x -= mean;

  PrimalResult out;
  out.flux = model.fluxes(xi, grid);
  out.value = model.phi(xi, vp);
  out.dual.value = out.value;
  out.dual.gradient_norm = gnorm;
  out.dual.iterations = iter;
  out.dual.xi = std::move(xi);
  return out;
}

PrimalResult primal_R_eps(const State& state, const SystemParams& params, const SpeciesField& v,
                          const DualOptions& options) {
  if (state.n_species() != 2) throw ShapeError("primal_R_eps expects two species");
  const auto edges = two_species_edges(params);
  return primal_R(state, params.delta(), edges, v, options);
}

double diffusion_flux_cost(const State& state, std::span<const double> delta, const SpeciesField& J) {
  if (J.n_species() != state.n_species() || J.n_points() != state.n_cells() + 1)
    throw ShapeError("flux cost: J shape mismatch");
  const SpeciesField mob = face_mobility(state, delta);
  const double h = state.grid().h();
  double s = 0.0;
  for (std::size_t i = 0; i < state.n_species(); ++i)
    for (std::size_t f = 1; f < state.n_cells(); ++f)
      s += h * perspective(PerspectiveBase::Quadratic, mob(i, f), J(i, f));
  return s;
}

DissipationBreakdown::FluxObjective primal_objective(const State& state, const SystemParams& params,
                                                     const FluxAssignment& flux) {
  if (state.n_species() != 2) throw ShapeError("primal_objective expects two species");
  DissipationBreakdown::FluxObjective out;
  out.diff = diffusion_flux_cost(state, params.delta(), flux.J);
  const double h = state.grid().h();
  for (std::size_t k = 0; k < state.n_cells(); ++k) {
    const double a = std::sqrt(std::max(0.0, state(0, k) * state(1, k))) / params.epsilon();
    out.react += h * perspective(PerspectiveBase::Cosh, a, flux.b(0, k));
  }
  return out;
}

SpeciesField interval_rate(const Trajectory& traj, std::size_t m) {
  const State& c0 = traj.state(m);
  const State& c1 = traj.state(m + 1);
  const double dt = traj.dt(m);
  SpeciesField v(traj.n_species(), traj.grid().n_cells());
  for (std::size_t q = 0; q < v.flat().size(); ++q)
    v.flat()[q] = (c1.density().flat()[q] - c0.density().flat()[q]) / dt;
  return v;
}

DissipationBreakdown dissipation_functional(const Trajectory& traj, const SystemParams& params, const Tilt& tilt,
                                            const DualOptions& options) {
  if (traj.n_species() != 2) throw ShapeError("dissipation_functional expects two species");
  const auto edges = two_species_edges(params);
  const StationaryMeasure wv = stationary_measure(traj.grid(), params, tilt);
  DissipationBreakdown d;
  if (traj.has_fluxes()) d.flux_velocity = DissipationBreakdown::FluxObjective{};
  for (std::size_t m = 0; m < traj.n_intervals(); ++m) {
    const State& c = traj.state(m);
    const double dt = traj.dt(m);
    const PrimalResult r = primal_R(c, params.delta(), edges, interval_rate(traj, m), options);
    const auto obj = primal_objective(c, params, r.flux);
    d.vel_diff += dt * obj.diff;
    d.vel_react += dt * obj.react;
    const SlopeTerms s = slope(c, params.delta(), edges, wv);
    d.slope_diff += dt * s.diff;
    d.slope_react += dt * s.react;
    if (d.flux_velocity) {
      const auto carried = primal_objective(c, params, traj.flux(m));
      d.flux_velocity->diff += dt * carried.diff;
      d.flux_velocity->react += dt * carried.react;
    }
  }
  return d;
}

DissipationBreakdown flux_dissipation(const Trajectory& traj, const SystemParams& params, const Tilt& tilt) {
  if (traj.n_species() != 2) throw ShapeError("flux_dissipation expects two species");
  if (!traj.has_fluxes()) throw DomainError("no flux data");
  const auto edges = two_species_edges(params);
  const StationaryMeasure wv = stationary_measure(traj.grid(), params, tilt);
  DissipationBreakdown d;
  for (std::size_t m = 0; m < traj.n_intervals(); ++m) {
    const State& c = traj.state(m);
    const double dt = traj.dt(m);
    const auto obj = primal_objective(c, params, traj.flux(m));
    d.vel_diff += dt * obj.diff;
    d.vel_react += dt * obj.react;
    const SlopeTerms s = slope(c, params.delta(), edges, wv);
    d.slope_diff += dt * s.diff;
    d.slope_react += dt * s.react;
  }
  return d;
}

double edb_residual(const Trajectory& traj, const SystemParams& params, const Tilt& tilt,
                    const DissipationBreakdown& d) {
  return energy(traj.back(), params, tilt) + d.total() - energy(traj.front(), params, tilt);
}

double edb_residual(const Trajectory& traj, const SystemParams& params, const Tilt& tilt,
                    const DualOptions& options) {
  return edb_residual(traj, params, tilt, dissipation_functional(traj, params, tilt, options));
}

double manifold_defect(const State& state, const SystemParams& params, const Tilt& tilt) {
  if (state.n_species() != 2) throw ShapeError("manifold_defect expects two species");
  const StationaryMeasure wv = stationary_measure(state.grid(), params, tilt);
  double m = 0.0;
  for (std::size_t k = 0; k < state.n_cells(); ++k) {
    const double r1 = state(0, k) / wv.cells(0, k);
    const double r2 = state(1, k) / wv.cells(1, k);
    const double rh = (state(0, k) + state(1, k)) / (wv.cells(0, k) + wv.cells(1, k));
    m = std::max(m, std::abs(r1 - r2) / (1.0 + rh));
  }
  return m;
}

EffectiveDissipation effective_dissipation_terms(const Trajectory& traj, const SystemParams& params,
                                                 const Tilt& tilt, const DualOptions& options) {
  if (traj.n_species() != 1 && traj.n_species() != 2)
    throw ShapeError("effective_dissipation expects a coarse or two-species trajectory");
  EffectiveDissipation out;
  if (traj.n_species() == 2) {
    for (const State& s : traj.states()) out.max_defect = std::max(out.max_defect, manifold_defect(s, params, tilt));
    if (out.max_defect > kManifoldTolerance) {
      out.velocity = kInf;
      out.slope = kInf;
      return out;
    }
  }
  const Grid& grid = traj.grid();
  const CoarseParams cp = coarse_params(grid, params, tilt);
  const StationaryMeasure wv = stationary_measure(grid, params, tilt);
  const std::array<double, 1> unit{1.0};
  const double h = grid.h();

  auto coarse = [&](const State& s) {
    State hat(grid, 1);
    for (std::size_t k = 0; k < grid.n_cells(); ++k)
      hat(0, k) = traj.n_species() == 2 ? s(0, k) + s(1, k) : s(0, k);
    return hat;
  };

  for (std::size_t m = 0; m < traj.n_intervals(); ++m) {
    const double dt = traj.dt(m);
    const State c0 = coarse(traj.state(m));
    const State c1 = coarse(traj.state(m + 1));
    State mobility(grid, 1);
    SpeciesField v(1, grid.n_cells());
    for (std::size_t k = 0; k < grid.n_cells(); ++k) {
      const State& s = traj.state(m);
      mobility(0, k) = traj.n_species() == 2 ? params.delta()[0] * s(0, k) + params.delta()[1] * s(1, k)
                                             : cp.delta_hat[k] * c0(0, k);
      v(0, k) = (c1(0, k) - c0(0, k)) / dt;
    }
    out.velocity += dt * primal_R(mobility, unit, {}, v, options).value;

    double sl = 0.0;
    for (std::size_t k = 0; k + 1 < grid.n_cells(); ++k) {
      const double ra = c0(0, k) / cp.w_hat[k];
      const double rb = c0(0, k + 1) / cp.w_hat[k + 1];
      const double grad = (rb - ra) / h;
      if (grad == 0.0) continue;
      const double mix = params.delta()[0] * wv.faces(0, k + 1) + params.delta()[1] * wv.faces(1, k + 1);
      sl += 0.5 * h * mix * grad * grad / (0.5 * (ra + rb));
    }
    out.slope += dt * sl;
  }
  return out;
}

double effective_dissipation(const Trajectory& traj, const SystemParams& params, const Tilt& tilt,
                             const DualOptions& options) {
  return effective_dissipation_terms(traj, params, tilt, options).total();
}

double effective_edb_residual(const Trajectory& hat, const SystemParams& params, const Tilt& tilt,
                              const DualOptions& options) {
  if (hat.n_species() != 1) throw ShapeError("effective_edb_residual expects a coarse trajectory");
  const double e0 = energy(lift_to_manifold(hat.front(), params, tilt), params, tilt);
  const double e1 = energy(lift_to_manifold(hat.back(), params, tilt), params, tilt);
  return e1 + effective_dissipation(hat, params, tilt, options) - e0;
}

double constrained_dissipation(const Trajectory& traj, const SystemParams& params, const Tilt& tilt) {
  if (traj.n_species() != 2) throw ShapeError("constrained_dissipation expects two species");
  if (!traj.has_fluxes()) throw DomainError("no flux data");
  const auto edges = two_species_edges(params);
  const StationaryMeasure wv = stationary_measure(traj.grid(), params, tilt);
  double total = 0.0;
  for (std::size_t m = 0; m < traj.n_intervals(); ++m) {
    const State& c = traj.state(m);
    if (manifold_defect(c, params, tilt) > kManifoldTolerance) return kInf;
    const double dt = traj.dt(m);
    total += dt * (diffusion_flux_cost(c, params.delta(), traj.flux(m).J) + slope(c, params.delta(), edges, wv).diff);
  }
  return total;
}

}  // namespace edpflow

#include "edpflow/solver.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "edpflow/coarsegrain.hpp"
#include "edpflow/errors.hpp"

namespace edpflow {

Scheme parse_scheme(const std::string& name) {
  if (name == "strang_exact_reaction") return Scheme::StrangExactReaction;
  if (name == "imex_euler") return Scheme::ImexEuler;
  if (name == "strang_crank_nicolson") return Scheme::StrangCrankNicolson;
  throw DomainError("unknown scheme '" + name + "'");
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::StrangExactReaction:
      return "strang_exact_reaction";
    case Scheme::ImexEuler:
      return "imex_euler";
    case Scheme::StrangCrankNicolson:
      return "strang_crank_nicolson";
  }
  return "?";
}

void SolverConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
  if (!(T >= dt) || !std::isfinite(T)) throw DomainError("T must be at least dt");
}

std::vector<double> SolverConfig::time_grid() const {
  validate();
  const auto steps = static_cast<std::size_t>(std::ceil(T / dt - 1e-6));
  std::vector<double> t(steps + 1);
  for (std::size_t m = 0; m <= steps; ++m) t[m] = std::min(static_cast<double>(m) * dt, T);
  t.back() = T;
  return t;
}

double bernoulli(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - 0.5 * x;
  return x / std::expm1(x);
}

void drift_diffusion_step(const Grid& grid, std::span<const double> face_diffusion, std::span<const double> potential,
                          double dt, double theta, std::span<const double> c_old, std::span<double> c_new,
                          std::span<double> flux_out) {
  const std::size_t n = grid.n_cells();
  const double h = grid.h();
  // F_{k+1/2} = p_k c_k - q_k c_{k+1} on interior faces
  std::vector<double> p(n, 0.0), q(n, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dv = potential[k + 1] - potential[k];
    const double d = face_diffusion[k + 1] / h;
    p[k] = d * bernoulli(dv);
    q[k] = d * bernoulli(-dv);
  }
  auto flux = [&](std::span<const double> c, std::size_t k) { return p[k] * c[k] - q[k] * c[k + 1]; };

  std::vector<double> lo(n, 0.0), di(n, 1.0), up(n, 0.0), rhs(c_old.begin(), c_old.end());
  const double a = theta * dt / h;
  const double b = (1.0 - theta) * dt / h;
  for (std::size_t k = 0; k < n; ++k) {
    if (k + 1 < n) {
      di[k] += a * p[k];
      up[k] = -a * q[k];
      if (b > 0.0) rhs[k] -= b * flux(c_old, k);
    }
    if (k > 0) {
      di[k] += a * q[k - 1];
      lo[k] = -a * p[k - 1];
      if (b > 0.0) rhs[k] += b * flux(c_old, k - 1);
    }
  }
  // Thomas algorithm (the matrix is a column-diagonally-dominant M-matrix).
  for (std::size_t k = 1; k < n; ++k) {
    const double w = lo[k] / di[k - 1];
    di[k] -= w * up[k - 1];
    rhs[k] -= w * rhs[k - 1];
  }
  c_new[n - 1] = rhs[n - 1] / di[n - 1];
  for (std::size_t k = n - 1; k-- > 0;) c_new[k] = (rhs[k] - up[k] * c_new[k + 1]) / di[k];

  flux_out[0] = 0.0;
  flux_out[n] = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double fn = flux(std::span<const double>(c_new.data(), n), k);
    flux_out[k + 1] = theta == 1.0 ? fn : theta * fn + (1.0 - theta) * flux(c_old, k);
  }
  // Re-derive the state from the recorded fluxes so that state and flux agree to rounding.
  for (std::size_t k = 0; k < n; ++k) c_new[k] = c_old[k] - dt * (flux_out[k + 1] - flux_out[k]) / h;
}

namespace {

void check_initial(const State& s, std::size_t species) {
  if (s.n_species() != species) throw ShapeError("initial state has the wrong number of species");
  if (!s.is_finite() || s.min_value() < 0.0) throw DomainError("initial state must be finite and nonnegative");
}

void check_step(const State& s, std::size_t step) {
  if (!s.is_finite()) throw IntegrationError("non-finite state", step);
}

}  // namespace

void integrate_eps_system(const State& initial, const SystemParams& params, const Tilt& tilt,
                          const SolverConfig& config, const StepObserver& observe) {
  check_initial(initial, 2);
  const Grid& g = initial.grid();
  const std::size_t n = g.n_cells();
  const std::vector<double> times = config.time_grid();
  const SampledTilt v = tilt.sample(g, 2);
  const double eps = params.epsilon();

  // Cellwise generator (1/eps) [[-a, b], [a, -b]].
  std::vector<double> ra(n), rb(n);
  const double sab = std::sqrt(params.alpha() / params.beta());
  for (std::size_t k = 0; k < n; ++k) {
    const double dv = 0.5 * (v.cells(0, k) - v.cells(1, k));
    ra[k] = sab * std::exp(dv);
    rb[k] = std::exp(-dv) / sab;
  }
  std::array<std::vector<double>, 2> dface;
  for (std::size_t i = 0; i < 2; ++i) dface[i].assign(n + 1, params.delta()[i]);

  // Exact relaxation of c1 towards b s / (a + b) over tau; returns the c1 increment.
  auto react_exact = [&](State& c, double tau, std::vector<double>& inc) {
    for (std::size_t k = 0; k < n; ++k) {
      const double s = c(0, k) + c(1, k);
      const double target = rb[k] * s / (ra[k] + rb[k]);
      const double d1 = (target - c(0, k)) * -std::expm1(-(ra[k] + rb[k]) * tau / eps);
      c(0, k) += d1;
      c(1, k) -= d1;
      inc[k] += d1;
    }
  };

  State c = initial;
  State next(g, 2);
  std::vector<double> inc(n);
  for (std::size_t m = 0; m + 1 < times.size(); ++m) {
    const double dt = times[m + 1] - times[m];
    FluxAssignment f(g, 2);
    std::fill(inc.begin(), inc.end(), 0.0);
    const double theta = config.scheme == Scheme::StrangCrankNicolson ? 0.5 : 1.0;
    if (config.scheme == Scheme::ImexEuler) {
      for (std::size_t k = 0; k < n; ++k) {
        if (dt * (ra[k] + rb[k]) / eps > 1.0)
          throw IntegrationError("imex_euler step exceeds the explicit reaction stability limit", m);
        const double d1 = dt / eps * (-ra[k] * c(0, k) + rb[k] * c(1, k));
        c(0, k) += d1;
        c(1, k) -= d1;
        inc[k] += d1;
      }
    } else {
      react_exact(c, 0.5 * dt, inc);
    }
    for (std::size_t i = 0; i < 2; ++i)
      drift_diffusion_step(g, dface[i], v.cells.species(i), dt, theta, c.species(i), next.species(i), f.J.species(i));
    std::swap(c, next);
    if (config.scheme != Scheme::ImexEuler) react_exact(c, 0.5 * dt, inc);
    for (std::size_t k = 0; k < n; ++k) {
      f.b(0, k) = inc[k] / dt;
      f.b(1, k) = -inc[k] / dt;
    }
    check_step(c, m);
    observe(times[m + 1], c, f);
  }
}

Trajectory solve_eps_system(const State& initial, const SystemParams& params, const Tilt& tilt,
                            const SolverConfig& config) {
  Trajectory traj(initial.grid(), 2);
  traj.push_back(0.0, initial);
  integrate_eps_system(initial, params, tilt, config,
                       [&](double t, const State& c, const FluxAssignment& f) { traj.push_back(t, c, f); });
  return traj;
}

Trajectory solve_effective(const State& initial_hat, const SystemParams& params, const Tilt& tilt,
                           const SolverConfig& config) {
  check_initial(initial_hat, 1);
  const Grid& g = initial_hat.grid();
  const std::size_t n = g.n_cells();
  const std::vector<double> times = config.time_grid();
  const CoarseParams cp = coarse_params(g, params, tilt);
  std::vector<double> dface(n + 1, 0.0);
  for (std::size_t k = 0; k + 1 < n; ++k) dface[k + 1] = 0.5 * (cp.delta_hat[k] + cp.delta_hat[k + 1]);
  const double theta = config.scheme == Scheme::StrangCrankNicolson ? 0.5 : 1.0;

  Trajectory traj(g, 1);
  traj.push_back(times[0], initial_hat);
  State c = initial_hat;
  State next(g, 1);
  for (std::size_t m = 0; m + 1 < times.size(); ++m) {
    FluxAssignment f(g, 1);
    drift_diffusion_step(g, dface, cp.V_hat, times[m + 1] - times[m], theta, c.species(0), next.species(0),
                         f.J.species(0));
    std::swap(c, next);
    check_step(c, m);
    traj.push_back(times[m + 1], c, std::move(f));
  }
  return traj;
}

namespace {

// Second-order first and second derivatives on cell centers, one-sided at the ends.
std::vector<double> d1(std::span<const double> u, double h) {
  const std::size_t n = u.size();
  std::vector<double> d(n);
  d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
  d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
  for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (u[k + 1] - u[k - 1]) / (2.0 * h);
  return d;
}

std::vector<double> d2(std::span<const double> u, double h) {
  const std::size_t n = u.size();
  std::vector<double> d(n);
  const double h2 = h * h;
  d[0] = (2.0 * u[0] - 5.0 * u[1] + 4.0 * u[2] - u[3]) / h2;
  d[n - 1] = (2.0 * u[n - 1] - 5.0 * u[n - 2] + 4.0 * u[n - 3] - u[n - 4]) / h2;
  for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (u[k + 1] - 2.0 * u[k] + u[k - 1]) / h2;
  return d;
}

}  // namespace

LagrangeMultipliers lagrange_multipliers(const State& hat, const SystemParams& params, const Tilt& tilt) {
  if (hat.n_species() != 1) throw ShapeError("lagrange_multipliers expects a coarse state");
  const Grid& g = hat.grid();
  const std::size_t n = g.n_cells();
  if (n < 4) throw ShapeError("lagrange_multipliers needs at least 4 cells");
  const double h = g.h();
  const SampledTilt v = tilt.sample(g, 2);
  const SpeciesField s = manifold_fractions(g, params, tilt);
  const State c = lift_to_manifold(hat, params, tilt);
  const double d1c = params.delta()[0];
  const double d2c = params.delta()[1];
  const double dbar = d1c - d2c;

  const auto gc1 = d1(c.species(0), h), lc1 = d2(c.species(0), h);
  const auto gc2 = d1(c.species(1), h), lc2 = d2(c.species(1), h);
  const auto gv1 = d1(v.cells.species(0), h), lv1 = d2(v.cells.species(0), h);
  const auto gv2 = d1(v.cells.species(1), h), lv2 = d2(v.cells.species(1), h);

  LagrangeMultipliers lm{std::vector<double>(n), std::vector<double>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const double gvb = gv1[k] - gv2[k];
    lm.lambda1[k] = s(1, k) * (-dbar * lc1[k] + (d2c * gvb - dbar * gv1[k]) * gc1[k] +
                               c(0, k) * (d2c * gvb * gv1[k] - dbar * lv1[k]));
    lm.lambda2[k] = s(0, k) * (dbar * lc2[k] + (-d1c * gvb + dbar * gv2[k]) * gc2[k] +
                               c(1, k) * (-d1c * gvb * gv2[k] + dbar * lv2[k]));
  }
  return lm;
}

double lagrange_sum_defect(const LagrangeMultipliers& lm) {
  double m = 0.0;
  for (std::size_t k = 0; k < lm.lambda1.size(); ++k) m = std::max(m, std::abs(lm.lambda1[k] + lm.lambda2[k]));
  return m;
}

double lagrange_residual(const Trajectory& hat, const SystemParams& params, const Tilt& tilt) {
  if (hat.n_species() != 1) throw ShapeError("lagrange_residual expects a coarse trajectory");
  const Grid& g = hat.grid();
  const std::size_t n = g.n_cells();
  const double h = g.h();
  const SampledTilt v = tilt.sample(g, 2);
  double worst = 0.0;
  for (std::size_t m = 0; m < hat.n_intervals(); ++m) {
    const State c0 = lift_to_manifold(hat.state(m), params, tilt);
    const State c1 = lift_to_manifold(hat.state(m + 1), params, tilt);
    const LagrangeMultipliers lm = lagrange_multipliers(hat.state(m + 1), params, tilt);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto gc = d1(c1.species(i), h), lc = d2(c1.species(i), h);
      const auto gv = d1(v.cells.species(i), h), lv = d2(v.cells.species(i), h);
      const auto& lam = i == 0 ? lm.lambda1 : lm.lambda2;
      const double d = params.delta()[i];
      for (std::size_t k = 0; k < n; ++k) {
        const double div = d * (lc[k] + gc[k] * gv[k] + c1(i, k) * lv[k]);
        const double r = (c1(i, k) - c0(i, k)) / hat.dt(m) - div - lam[k];
        worst = std::max(worst, std::abs(r));
      }
    }
  }
  return worst;
}

}  // namespace edpflow

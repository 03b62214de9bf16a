#include "edpflow/coarsegrain.hpp"

#include <algorithm>
#include <cmath>

#include "edpflow/errors.hpp"
#include "edpflow/functionals.hpp"

namespace edpflow {

CoarseParams coarse_params(const Grid& grid, const SystemParams& params, const Tilt& tilt) {
  const SampledTilt v = tilt.sample(grid, 2);
  const StationaryMeasure wv = stationary_measure(grid, params, tilt);
  const auto& w = params.w();
  const auto& d = params.delta();
  CoarseParams cp;
  for (std::size_t k = 0; k < grid.n_cells(); ++k) {
    const double a = wv.cells(0, k);
    const double b = wv.cells(1, k);
    cp.delta_hat.push_back((d[0] * a + d[1] * b) / (a + b));
    cp.V_hat.push_back(-std::log(w[0] * std::exp(-v.cells(0, k)) + w[1] * std::exp(-v.cells(1, k))));
    cp.w_hat.push_back(a + b);
  }
  for (std::size_t f = 0; f < grid.n_faces(); ++f) {
    const double a = w[0] * std::exp(-v.faces(0, f));
    const double b = w[1] * std::exp(-v.faces(1, f));
    cp.delta_hat_faces.push_back((d[0] * a + d[1] * b) / (a + b));
    cp.V_hat_faces.push_back(-std::log(a + b));
  }
  return cp;
}

State coarse_grain(const State& state) {
  State hat(state.grid(), 1);
  for (std::size_t k = 0; k < state.n_cells(); ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < state.n_species(); ++i) s += state(i, k);
    hat(0, k) = s;
  }
  return hat;
}

Trajectory coarse_grain(const Trajectory& traj) {
  Trajectory out(traj.grid(), 1);
  for (std::size_t m = 0; m < traj.size(); ++m) {
    State hat = coarse_grain(traj.state(m));
    if (m == 0 || !traj.has_fluxes()) {
      out.push_back(traj.times()[m], std::move(hat));
      continue;
    }
    FluxAssignment f(traj.grid(), 1);
    const FluxAssignment& src = traj.flux(m - 1);
    for (std::size_t q = 0; q < traj.grid().n_faces(); ++q)
      for (std::size_t i = 0; i < traj.n_species(); ++i) f.J(0, q) += src.J(i, q);
    out.push_back(traj.times()[m], std::move(hat), std::move(f));
  }
  return out;
}

SpeciesField manifold_fractions(const Grid& grid, const SystemParams& params, const Tilt& tilt) {
  const SampledTilt v = tilt.sample(grid, 2);
  SpeciesField s(2, grid.n_cells());
  for (std::size_t k = 0; k < grid.n_cells(); ++k) {
    // Ratio of the two weights, formed without overflow for large tilts.
    const double a = std::log(params.w()[0]) - v.cells(0, k);
    const double b = std::log(params.w()[1]) - v.cells(1, k);
    s(0, k) = 1.0 / (1.0 + std::exp(b - a));
    s(1, k) = 1.0 / (1.0 + std::exp(a - b));
  }
  return s;
}

State lift_to_manifold(const State& hat, const SystemParams& params, const Tilt& tilt) {
  if (hat.n_species() != 1) throw ShapeError("lift_to_manifold expects a coarse state");
  const SpeciesField s = manifold_fractions(hat.grid(), params, tilt);
  State c(hat.grid(), 2);
  for (std::size_t k = 0; k < hat.n_cells(); ++k) {
    c(0, k) = s(0, k) * hat(0, k);
    c(1, k) = s(1, k) * hat(0, k);
  }
  return c;
}

Trajectory with_continuity_flux(const Trajectory& hat) {
  if (hat.n_species() != 1) throw ShapeError("with_continuity_flux expects a coarse trajectory");
  const Grid& g = hat.grid();
  const std::size_t n = g.n_cells();
  Trajectory out(g, 1);
  out.push_back(hat.times()[0], hat.state(0));
  std::vector<double> rate(n);
  for (std::size_t m = 0; m < hat.n_intervals(); ++m) {
    const double dt = hat.dt(m);
    double mass_rate = 0.0;
    double scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      rate[k] = (hat.state(m + 1)(0, k) - hat.state(m)(0, k)) / dt;
      mass_rate += g.h() * rate[k];
      scale += g.h() * std::abs(rate[k]);
    }
    if (std::abs(mass_rate) > 1e-10 * std::max(1.0, scale))
      throw DomainError("coarse trajectory changes total mass; no zero-flux coarse flux exists");
    // Rounding-level mass drift is spread evenly instead of landing on the last cell.
    FluxAssignment f(g, 1);
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < n; ++k) {
      acc -= g.h() * (rate[k] - mass_rate);
      f.J(0, k + 1) = acc;
    }
    out.push_back(hat.times()[m + 1], hat.state(m + 1), std::move(f));
  }
  return out;
}

Reconstruction reconstruct_from_coarse(const Trajectory& hat_in, const SystemParams& params, const Tilt& tilt) {
  if (hat_in.n_species() != 1) throw ShapeError("reconstruct_from_coarse expects a coarse trajectory");
  const Trajectory hat = hat_in.has_fluxes() ? hat_in : with_continuity_flux(hat_in);
  const Grid& g = hat.grid();
  const std::size_t n = g.n_cells();
  const double h = g.h();
  const auto& d = params.delta();
  const StationaryMeasure wv = stationary_measure(g, params, tilt);

  // Continuous coefficients of the closed-form reaction flux, on cells.
  std::vector<double> a1(n), theta1(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double p = wv.cells(0, k);
    const double q = wv.cells(1, k);
    const double mix = d[0] * p + d[1] * q;
    a1[k] = (d[0] - d[1]) / mix * p * q / (p + q);
    theta1[k] = d[0] * p / mix;
  }

  std::vector<State> states;
  states.reserve(hat.size());
  for (const State& s : hat.states()) states.push_back(lift_to_manifold(s, params, tilt));

  Reconstruction out{Trajectory(g, 2), {}};
  out.traj.push_back(hat.times()[0], states[0]);
  for (std::size_t m = 0; m < hat.n_intervals(); ++m) {
    const double dt = hat.dt(m);
    const auto Jh = hat.flux(m).J.species(0);
    const State& c0 = states[m];
    const State& c1 = states[m + 1];

    double worst = 0.0;
    double scale = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double rate = (hat.state(m + 1)(0, k) - hat.state(m)(0, k)) / dt;
      const double div = (Jh[k + 1] - Jh[k]) / h;
      worst = std::max(worst, std::abs(rate + div));
      scale = std::max({scale, std::abs(rate), std::abs(div)});
    }
    if (worst > 1e-9 * std::max(1.0, scale) || Jh[0] != 0.0 || Jh[n] != 0.0)
      throw DomainError("coarse continuity equation is violated");

    FluxAssignment f(g, 2);
    for (std::size_t q = 1; q < n; ++q) {
      double m1 = d[0] * 0.5 * (c0(0, q - 1) + c0(0, q));
      double m2 = d[1] * 0.5 * (c0(1, q - 1) + c0(1, q));
      if (m1 + m2 <= 0.0) {
        m1 = d[0] * wv.faces(0, q);
        m2 = d[1] * wv.faces(1, q);
      }
      f.J(0, q) = m1 / (m1 + m2) * Jh[q];
      f.J(1, q) = Jh[q] - f.J(0, q);
    }
    SpeciesField closed(2, n);
    for (std::size_t k = 0; k < n; ++k) {
      const double b1 = (c1(0, k) - c0(0, k)) / dt + (f.J(0, k + 1) - f.J(0, k)) / h;
      f.b(0, k) = b1;
      f.b(1, k) = -b1;
      double grad = 0.0;
      if (k + 1 < n) grad += Jh[k + 1] * (theta1[k + 1] - theta1[k]);
      if (k > 0) grad += Jh[k] * (theta1[k] - theta1[k - 1]);
      const double cf = a1[k] * (Jh[k + 1] - Jh[k]) / h + 0.5 * grad / h;
      closed(0, k) = cf;
      closed(1, k) = -cf;
    }
    out.b_closed_form.push_back(std::move(closed));
    out.traj.push_back(hat.times()[m + 1], states[m + 1], std::move(f));
  }
  return out;
}

double flux_equilibration_check(const State& state, const SystemParams& params, const SpeciesField& J) {
  if (state.n_species() != 2 || J.n_species() != 2 || J.n_points() != state.n_cells() + 1)
    throw ShapeError("flux_equilibration_check: shape mismatch");
  const auto& d = params.delta();
  const double h = state.grid().h();
  double gap = 0.0;
  for (std::size_t q = 1; q < state.n_cells(); ++q) {
    const double m1 = d[0] * 0.5 * (state(0, q - 1) + state(0, q));
    const double m2 = d[1] * 0.5 * (state(1, q - 1) + state(1, q));
    if (!(m1 > 0.0 && m2 > 0.0)) throw DomainError("flux_equilibration_check needs positive densities");
    const double jh = J(0, q) + J(1, q);
    gap += h * (0.5 * J(0, q) * J(0, q) / m1 + 0.5 * J(1, q) * J(1, q) / m2 - 0.5 * jh * jh / (m1 + m2));
  }
  return gap;
}

State positivity_shift(const State& hat, double gamma) {
  if (!(gamma > 0.0 && gamma <= 0.5)) throw DomainError("positivity shift needs 0 < gamma <= 1/2");
  State out = hat;
  for (double& x : out.density().flat()) x = (x + 2.0 * gamma) / (1.0 + 2.0 * gamma);
  return out;
}

Trajectory mollify_in_time(const Trajectory& traj, double width) {
  if (!(width >= 0.0)) throw DomainError("mollifier width must be nonnegative");
  const std::size_t M = traj.size();
  if (M < 2) return Trajectory(traj);
  const double dt = (traj.times().back() - traj.times().front()) / static_cast<double>(M - 1);
  for (std::size_t m = 0; m + 1 < M; ++m)
    if (std::abs(traj.dt(m) - dt) > 1e-9 * dt) throw DomainError("mollification needs a uniform time grid");

  // Discrete bump weights; widths below one step leave the trajectory unchanged.
  const auto half = static_cast<long>(std::floor(width / dt));
  std::vector<double> weight;
  double wsum = 0.0;
  for (long j = -half; j <= half; ++j) {
    const double s = static_cast<double>(j) * dt / width;
    const double b = half == 0 ? 1.0 : std::pow(std::max(0.0, 1.0 - s * s), 3);
    weight.push_back(b);
    wsum += b;
  }
  for (double& x : weight) x /= wsum;

  Trajectory out(traj.grid(), traj.n_species());
  for (std::size_t m = 0; m < M; ++m) {
    State s(traj.grid(), traj.n_species());
    for (long j = -half; j <= half; ++j) {
      const long idx = std::clamp(static_cast<long>(m) + j, 0L, static_cast<long>(M) - 1);
      const double wgt = weight[static_cast<std::size_t>(j + half)];
      const auto src = traj.state(static_cast<std::size_t>(idx)).density().flat();
      auto dst = s.density().flat();
      for (std::size_t q = 0; q < dst.size(); ++q) dst[q] += wgt * src[q];
    }
    out.push_back(traj.times()[m], std::move(s));
  }
  return out;
}

RecoverySequence build_recovery_sequence(const Trajectory& limit, const SystemParams& params, const Tilt& tilt,
                                         double epsilon, const RecoveryOptions& options) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  if (!(options.lambda > 0.0 && options.lambda < 1.0) || !(options.alpha > 0.0))
    throw DomainError("recovery exponents out of range");
  Trajectory hat = limit.n_species() == 1 ? limit : coarse_grain(limit);
  hat.clear_fluxes();
  for (const State& s : hat.states())
    if (!s.is_finite()) throw DomainError("limit trajectory is not finite");

  RecoverySequence out{Trajectory(hat.grid(), 2)};
  out.gamma = options.gamma_scale * std::pow(epsilon, 1.0 - options.lambda);
  out.width = options.mollifier_scale * std::pow(epsilon, options.alpha);
  out.rate_bound = std::pow(epsilon, -options.alpha);

  Trajectory shifted(hat.grid(), 1);
  for (std::size_t m = 0; m < hat.size(); ++m) shifted.push_back(hat.times()[m], positivity_shift(hat.state(m), out.gamma));
  const Trajectory smooth = with_continuity_flux(mollify_in_time(shifted, out.width));
  for (std::size_t m = 0; m < smooth.n_intervals(); ++m)
    for (std::size_t k = 0; k < smooth.grid().n_cells(); ++k)
      out.rate_norm = std::max(out.rate_norm,
                               std::abs(smooth.state(m + 1)(0, k) - smooth.state(m)(0, k)) / smooth.dt(m));
  out.traj = reconstruct_from_coarse(smooth, params, tilt).traj;
  return out;
}

}  // namespace edpflow

#include "acceptance_checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>

#include "edpflow/coarsegrain.hpp"
#include "edpflow/dissipation.hpp"
#include "edpflow/experiments.hpp"
#include "edpflow/functionals.hpp"
#include "edpflow/multispecies.hpp"
#include "edpflow/solver.hpp"
#include "oracles.hpp"

namespace acceptance {

using namespace edpflow;

namespace {

constexpr double kPi = std::numbers::pi;

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SystemParams reference_params(double eps = 0.1) { return SystemParams({1.0, 2.0}, 1.0, 3.0, eps); }

Tilt smooth_tilt() {
  return Tilt({[](double x) { return 0.5 * std::cos(kPi * x); }, [](double x) { return -0.3 * std::cos(2.0 * kPi * x); }});
}

State split_evenly(const State& hat) {
  State c(hat.grid(), 2);
  for (std::size_t k = 0; k < hat.n_cells(); ++k) c(0, k) = c(1, k) = 0.5 * hat(0, k);
  return c;
}

bool decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

double C(double s) { return cosh_pair::primal(s); }
double Cstar(double x) { return cosh_pair::dual(x); }

}  // namespace

Result mixed_diffusion_coefficient() {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid g(200);
  const SystemParams p = reference_params();
  const State c0 = lift_to_manifold(cosine_profile(g, 0.5), p, Tilt::zero());
  const std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4};
  std::vector<double> err(eps.size());
  parallel_for(eps.size(), [&](std::size_t j) {
    const Trajectory tr = solve_eps_system(c0, p.with_epsilon(eps[j]), Tilt::zero(), {1e-4, 0.1});
    err[j] = std::abs(fit_decay_rate(coarse_grain(tr)) - 1.25) / 1.25;
  });
  const double secs = seconds_since(t0);
  const bool pass = err.back() <= 0.02 && decreasing(err) && secs < 30.0;
  return {1, "mixed diffusion coefficient", pass,
          format("rel errors %.2e %.2e %.2e %.2e (eps 1e-1..1e-4), %.1f s", err[0], err[1], err[2], err[3], secs)};
}

Result slow_manifold_defect() {
  const Grid g(200);
  const SystemParams p = reference_params();
  const State c0 = split_evenly(cosine_profile(g, 0.5));
  const std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
  std::vector<double> defect(eps.size());
  parallel_for(eps.size(), [&](std::size_t j) {
    const SystemParams pe = p.with_epsilon(eps[j]);
    const StationaryMeasure wv = stationary_measure(g, pe, Tilt::zero());
    auto d = [&](const State& s) {
      double acc = 0.0;
      for (std::size_t k = 0; k < g.n_cells(); ++k) {
        const double a = std::sqrt(s(0, k) / wv.cells(0, k)) - std::sqrt(s(1, k) / wv.cells(1, k));
        acc += g.h() * a * a;
      }
      return acc;
    };
    double t_prev = 0.0, d_prev = d(c0), integral = 0.0;
    // Resolve the fast relaxation so the time quadrature does not put a floor under the defect.
    const double dt = std::min(1e-4, eps[j] / 20.0);
    integrate_eps_system(c0, pe, Tilt::zero(), {dt, 0.1}, [&](double t, const State& s, const FluxAssignment&) {
      const double dn = d(s);
      integral += 0.5 * (t - t_prev) * (dn + d_prev);
      t_prev = t;
      d_prev = dn;
    });
    defect[j] = integral;
  });
  const double slope = loglog_slope(eps, defect);
  return {2, "slow-manifold defect scaling", slope >= 0.9,
          format("log-log slope %.4f over eps 1e-1..1e-5 (defect %.3e .. %.3e)", slope, defect.front(), defect.back())};
}

Result energy_dissipation_balance() {
  const SystemParams p = reference_params(0.1);
  const Tilt tilt = smooth_tilt();
  constexpr std::size_t L = 4;
  std::vector<double> res_eps(L), res_eff(L), rel_eps(L), rel_eff(L), hs(L);
  parallel_for(2 * L, [&](std::size_t job) {
    const std::size_t lvl = job % L;
    const Grid g(25u << lvl);
    const double dt = 4e-4 / static_cast<double>(1u << lvl);
    const State hat = cosine_profile(g, 0.5);
    if (job < L) {
      const Trajectory tr = solve_eps_system(split_evenly(hat), p, tilt, {dt, 0.05});
      const double r = edb_residual(tr, p, tilt);
      res_eps[lvl] = std::abs(r);
      rel_eps[lvl] = std::abs(r) / (energy(tr.front(), p, tilt) - energy(tr.back(), p, tilt));
    } else {
      const Trajectory te = solve_effective(hat, p, tilt, {dt, 0.05});
      const double r = effective_edb_residual(te, p, tilt);
      res_eff[lvl] = std::abs(r);
      rel_eff[lvl] = std::abs(r) / (energy(lift_to_manifold(te.front(), p, tilt), p, tilt) -
                                    energy(lift_to_manifold(te.back(), p, tilt), p, tilt));
    }
    hs[lvl] = g.h();
  });
  const double o1 = loglog_slope(hs, res_eps), o2 = loglog_slope(hs, res_eff);
  const bool pass = o1 >= 0.8 && o2 >= 0.8 && rel_eps.back() <= 1e-3 && rel_eff.back() <= 1e-3;
  return {3, "energy-dissipation balance", pass,
          format("eps=0.1: order %.3f, finest %.2e of drop; effective: order %.3f, finest %.2e of drop", o1,
                 rel_eps.back(), o2, rel_eff.back())};
}

Result primal_dual_oracle() {
  const Grid g(3);
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> pos(0.2, 2.0), rate(-1.0, 1.0);
  double worst_match = 0.0, worst_gap = 0.0, worst_weak = -std::numeric_limits<double>::infinity();
  for (int inst = 0; inst < 10; ++inst) {
    const SystemParams p({pos(rng), pos(rng)}, pos(rng), pos(rng), pos(rng));
    State c(g, 2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < 3; ++k) c(i, k) = pos(rng);
    SpeciesField v(2, 3);
    double sum = 0.0;
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < 3; ++k) sum += v(i, k) = rate(rng);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = 0; k < 3; ++k) v(i, k) -= sum / 6.0;

    const PrimalResult r = primal_R_eps(c, p, v);
    const oracle::PrimalMinimum bf = oracle::brute_force_primal_3cell(c, p, v);
    const auto obj = primal_objective(c, p, r.flux);
    worst_match = std::max(worst_match, std::abs(r.value - bf.value));
    worst_gap = std::max(worst_gap, std::abs(obj.diff + obj.react - r.dual.value));
    // Weak duality against the independent primal point.
    worst_weak = std::max(worst_weak, r.dual.value - bf.value);
  }
  const bool pass = worst_match <= 1e-6 && worst_gap <= 1e-8 && worst_weak <= 1e-8;
  return {4, "primal-dual dissipation oracle", pass,
          format("max |R - brute force| %.2e, max duality gap %.2e, max(dual - brute force) %.2e", worst_match,
                 worst_gap, worst_weak)};
}

Result reconstruction_identities() {
  double gce = 0.0, gap = 0.0;
  {
    const Grid g(100);
    const SystemParams p = reference_params();
    const Tilt tilt = smooth_tilt();
    const Trajectory te = solve_effective(cosine_profile(g, 0.5), p, tilt, {1e-3, 0.1});
    const Reconstruction rec = reconstruct_from_coarse(te, p, tilt);
    gce = max_gce_residual(rec.traj);
    for (std::size_t m = 0; m < rec.traj.n_intervals(); ++m)
      gap = std::max(gap, std::abs(flux_equilibration_check(rec.traj.state(m), p, rec.traj.flux(m).J)));
  }
  double constants = 0.0;
  {
    const Grid g(100);
    const SystemParams p = reference_params();
    const Trajectory te = solve_effective(cosine_profile(g, 0.5), p, Tilt::zero(), {1e-3, 0.1});
    const Reconstruction rec = reconstruct_from_coarse(te, p, Tilt::zero());
    for (std::size_t m = 0; m < rec.traj.n_intervals(); ++m) {
      const auto& f = rec.traj.flux(m);
      const auto Jh = te.flux(m).J.species(0);
      for (std::size_t q = 0; q < g.n_faces(); ++q) {
        constants = std::max(constants, std::abs(f.J(0, q) - 0.6 * Jh[q]));
        constants = std::max(constants, std::abs(f.J(1, q) - 0.4 * Jh[q]));
      }
      for (std::size_t k = 0; k < g.n_cells(); ++k) {
        const double div = (Jh[k + 1] - Jh[k]) / g.h();
        constants = std::max(constants, std::abs(f.b(0, k) + 0.15 * div));
        constants = std::max(constants, std::abs(rec.b_closed_form[m](0, k) + 0.15 * div));
      }
    }
  }
  const bool pass = gce <= 1e-12 && gap <= 1e-12 && constants <= 1e-12;
  return {5, "reconstruction identities", pass,
          format("max gCE residual %.2e, max equilibration gap %.2e, worked constants off by %.2e", gce, gap,
                 constants)};
}

Result lagrange_multipliers() {
  const SystemParams p = reference_params();
  const Tilt tilt = smooth_tilt();
  std::vector<double> sums(4);
  parallel_for(4, [&](std::size_t lvl) {
    const Grid g(50u << lvl);
    const Trajectory te = solve_effective(cosine_profile(g, 0.5), p, tilt, {1e-3, 0.02});
    sums[lvl] = lagrange_sum_defect(edpflow::lagrange_multipliers(te.back(), p, tilt));
  });
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < sums.size(); ++i) worst = std::min(worst, sums[i - 1] / sums[i]);
  return {6, "Lagrange multipliers", worst >= 1.8,
          format("max|l1+l2| %.2e %.2e %.2e %.2e (n=50..400), smallest reduction factor %.2f", sums[0], sums[1],
                 sums[2], sums[3], worst)};
}

Result recovery_sequence_trend() {
  const Grid g(100);
  const SystemParams p = reference_params();
  const Tilt tilt = smooth_tilt();
  const Trajectory limit = solve_effective(cosine_profile(g, 0.5), p, tilt, {1e-3, 0.1});
  const std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
  std::vector<double> react(eps.size()), gap(eps.size());
  parallel_for(eps.size(), [&](std::size_t j) {
    const SystemParams pe = p.with_epsilon(eps[j]);
    const RecoverySequence rs = build_recovery_sequence(limit, pe, tilt, eps[j]);
    const DissipationBreakdown d = flux_dissipation(rs.traj, pe, tilt);
    react[j] = d.vel_react;
    gap[j] = std::abs(d.total() - constrained_dissipation(rs.traj, pe, tilt));
  });
  const bool pass = decreasing(react) && react.back() < 1e-4 && decreasing(gap);
  return {7, "recovery-sequence trend", pass,
          format("reaction cost %.2e -> %.2e, |D_eps - D_0| %.2e -> %.2e, both monotone: %s", react.front(),
                 react.back(), gap.front(), gap.back(), (decreasing(react) && decreasing(gap)) ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// Function-pair property sweeps.
// ---------------------------------------------------------------------------

Sweep fenchel_young_equality(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-20.0, 20.0);
  Sweep s;
  for (; s.samples < samples; ++s.samples) {
    const double r = U(rng);
    const double x = 2.0 * std::asinh(0.5 * r);
    const double err = std::abs(C(r) + Cstar(x) - r * x);
    s.worst = std::max(s.worst, err);
    if (err > 1e-10) ++s.violations;
  }
  return s;
}

Sweep fenchel_young_inequality(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-30.0, 30.0);
  Sweep s;
  for (; s.samples < samples; ++s.samples) {
    const double r = U(rng), x = U(rng);
    const double lhs = C(r) + Cstar(x), rhs = r * x;
    const double viol = rhs - lhs - 1e-12 * (1.0 + std::abs(lhs));
    s.worst = std::max(s.worst, rhs - lhs);
    if (viol > 0.0) ++s.violations;
  }
  return s;
}

Sweep cosh_sandwich(std::size_t samples) {
  Sweep s;
  for (; s.samples < samples; ++s.samples) {
    const double t = static_cast<double>(s.samples) / static_cast<double>(samples - 1);
    const double a = std::pow(10.0, -6.0 + 12.0 * t);
    for (const double r : {a, -a}) {
      const double lo = 0.5 * a * std::log1p(a), hi = 2.0 * a * std::log1p(a), c = C(r);
      const double tol = 1e-13 * c;
      s.worst = std::max({s.worst, lo - c, c - hi});
      if (c < lo - tol || c > hi + tol) ++s.violations;
    }
  }
  return s;
}

Sweep superlinear_growth(std::size_t samples, std::uint64_t seed) {
  // k_C: C(r) >= |r| for |r| >= k_C. C(r) - r is increasing past its minimum, so bisect for the root.
  double lo = 1.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (C(mid) >= mid ? hi : lo) = mid;
  }
  const double kC = hi;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> logrho(-4.0, 1.0), W(-50.0, 50.0);
  Sweep s;
  constexpr std::size_t n = 32;
  const double h = 1.0 / n;
  for (; s.samples < samples; ++s.samples) {
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double rho = std::pow(10.0, logrho(rng)), w = W(rng);
      lhs += h * std::abs(w);
      rhs += h * (perspective(PerspectiveBase::Cosh, rho, w) + kC * rho);
    }
    s.worst = std::max(s.worst, lhs - rhs);
    if (lhs > rhs * (1.0 + 1e-13)) ++s.violations;
  }
  return s;
}

Sweep young_type_bound(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> P(1.01, 6.0), mag(-4.0, 3.0), sign(-1.0, 1.0);
  Sweep s;
  for (; s.samples < samples; ++s.samples) {
    const double p = P(rng), J = sign(rng) * std::pow(10.0, mag(rng)), c = std::pow(10.0, mag(rng));
    const double lhs = J * J / c + std::pow(c, p) / p;
    const double rhs = (1.0 + 1.0 / p) * std::pow(std::abs(J), 2.0 * p / (p + 1.0));
    s.worst = std::max(s.worst, (rhs - lhs) / (1.0 + rhs));
    if (lhs < rhs - 1e-12 * (1.0 + rhs)) ++s.violations;
  }
  return s;
}

Sweep lower_bound_with_power(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> la(-6.0, 2.0), lb(-6.0, 4.0), sign(-1.0, 1.0);
  const double ps[] = {1.2, 2.0, 4.0};
  Sweep s;
  for (; s.samples < samples; ++s.samples) {
    const double p = ps[s.samples % 3];
    const double a = std::pow(10.0, la(rng)), B = (sign(rng) < 0 ? -1.0 : 1.0) * std::pow(10.0, lb(rng));
    const double lhs = perspective(PerspectiveBase::Cosh, a, B);
    const double rhs = (1.0 - 1.0 / p) * C(B) - (2.0 / p) * std::pow(a, p);
    s.worst = std::max(s.worst, rhs - lhs);
    if (lhs < rhs - 1e-12 * (1.0 + std::abs(rhs))) ++s.violations;
  }
  return s;
}

Sweep perspective_monotonicity(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> la(-4.0, 3.0), X(-100.0, 100.0);
  Sweep s;
  for (; s.samples < samples; ++s.samples) {
    double a1 = std::pow(10.0, la(rng)), a2 = std::pow(10.0, la(rng));
    if (a1 < a2) std::swap(a1, a2);
    const double x = X(rng);
    for (const auto base : {PerspectiveBase::Quadratic, PerspectiveBase::Cosh}) {
      const double f1 = perspective(base, a1, x), f2 = perspective(base, a2, x);
      s.worst = std::max(s.worst, f1 - f2);
      if (f1 > f2 * (1.0 + 1e-13)) ++s.violations;
    }
  }
  return s;
}

Sweep perspective_joint_convexity(std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> A(1e-3, 10.0), X(-20.0, 20.0);
  Sweep s;
  for (; s.samples < samples; ++s.samples) {
    const double a = A(rng), b = A(rng), x = X(rng), y = X(rng);
    for (const auto base : {PerspectiveBase::Quadratic, PerspectiveBase::Cosh}) {
      const double mid = perspective(base, 0.5 * (a + b), 0.5 * (x + y));
      const double avg = 0.5 * (perspective(base, a, x) + perspective(base, b, y));
      s.worst = std::max(s.worst, mid - avg);
      if (mid > avg + 1e-12 * (1.0 + avg)) ++s.violations;
    }
  }
  return s;
}

Result function_pair_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t seed = kPropertySeed;
  const Sweep sweeps[] = {
      fenchel_young_equality(1000, seed),      fenchel_young_inequality(10000, seed + 1),
      cosh_sandwich(10000),                    superlinear_growth(10000, seed + 2),
      young_type_bound(10000, seed + 3),       lower_bound_with_power(10000, seed + 4),
      perspective_monotonicity(10000, seed + 5), perspective_joint_convexity(10000, seed + 6),
  };
  const double secs = seconds_since(t0);
  std::size_t violations = 0, samples = 0;
  for (const Sweep& s : sweeps) {
    violations += s.violations;
    samples += s.samples;
  }
  return {8, "function-pair suite", violations == 0 && secs < 5.0,
          format("%zu samples in 8 sweeps, %zu violations, Fenchel-Young equality error %.1e, %.2f s", samples,
                 violations, sweeps[0].worst, secs)};
}

Result multispecies() {
  const std::uint64_t seed = 20240611;
  const MarkovGenerator two = MarkovGenerator::two_species(reference_params());
  const GeneratorReport r2 = validate_generator(two);
  const MarkovGenerator net = random_detailed_balance_generator(4, seed, {{0, 1}, {2, 3}});
  const GeneratorReport r4 = validate_generator(net);

  // Raising one rate on the cycle 0 -> 2 -> 3 -> 0 breaks detailed balance.
  MarkovGenerator bad = net;
  const double bump = 0.25 * bad.A_slow(2, 0);
  bad.A_slow(2, 0) += bump;
  bad.A_slow(0, 0) -= bump;
  const GeneratorReport rbad = validate_generator(bad);

  double asym = 0.0, kappa_ulps = 0.0;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
    for (const MarkovGenerator* gen : {&two, &net}) {
      const KappaCoefficients k = kappa_coefficients(*gen, eps);
      for (Eigen::Index i = 0; i < k.kappa.rows(); ++i)
        for (Eigen::Index j = 0; j < k.kappa.cols(); ++j)
          asym = std::max(asym, std::abs(k.kappa(i, j) - k.kappa(j, i)) / std::max(1.0, std::abs(k.kappa(i, j))));
    }
    const double k12 = kappa_coefficients(two, eps).kappa(0, 1);
    const double ulp = std::nextafter(1.0 / eps, 2.0 / eps) - 1.0 / eps;
    kappa_ulps = std::max(kappa_ulps, std::abs(k12 - 1.0 / eps) / ulp);
  }
  const bool w_ok = std::abs(r2.w_limit(0) - 0.75) <= 1e-15 && std::abs(r2.w_limit(1) - 0.25) <= 1e-15;
  const bool pass = r2.valid && w_ok && r4.valid && !rbad.valid && asym <= 1e-13 && kappa_ulps <= 4.0;
  return {9, "multi-species generators", pass,
          format("two-species valid %d, 4-species (seed %llu) valid %d, perturbed rejected %d, kappa asymmetry "
                 "%.1e, kappa12 vs 1/eps within %.0f ulp",
                 r2.valid, static_cast<unsigned long long>(seed), r4.valid, !rbad.valid, asym, kappa_ulps)};
}

std::vector<Result> run_all() {
  return {mixed_diffusion_coefficient(), slow_manifold_defect(), energy_dissipation_balance(),
          primal_dual_oracle(),          reconstruction_identities(), lagrange_multipliers(),
          recovery_sequence_trend(),     function_pair_suite(),       multispecies()};
}

}  // namespace acceptance

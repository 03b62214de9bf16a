#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "edpflow/coarsegrain.hpp"
#include "edpflow/errors.hpp"
#include "edpflow/functionals.hpp"
#include "edpflow/solver.hpp"

using namespace edpflow;
using doctest::Approx;

namespace {

const SystemParams kRef({1.0, 2.0}, 1.0, 3.0, 1.0);
constexpr double kPi = std::numbers::pi;

Tilt cosine_tilt() {
  return Tilt({[](double x) { return 0.5 * std::cos(kPi * x); },
               [](double x) { return -0.3 * std::cos(2.0 * kPi * x); }});
}

State split_bump(const Grid& g) {
  State c(g, 2);
  for (std::size_t k = 0; k < g.n_cells(); ++k) {
    c(0, k) = 0.5 * (1.0 + 0.6 * std::cos(kPi * g.center(k)));
    c(1, k) = 0.5;
  }
  return c;
}

double max_abs_diff(const State& a, const State& b) {
  double m = 0.0;
  for (std::size_t q = 0; q < a.density().flat().size(); ++q)
    m = std::max(m, std::abs(a.density().flat()[q] - b.density().flat()[q]));
  return m;
}

double l1_distance(const State& a, const State& b) {
  double s = 0.0;
  for (std::size_t q = 0; q < a.density().flat().size(); ++q)
    s += a.grid().h() * std::abs(a.density().flat()[q] - b.density().flat()[q]);
  return s;
}

}  // namespace

TEST_CASE("Bernoulli function") {
  CHECK(bernoulli(0.0) == 1.0);
  for (double x : {1e-12, 1e-6, 0.3, 5.0, 40.0}) {
    CHECK(bernoulli(x) - bernoulli(-x) == Approx(-x).epsilon(1e-12));
    CHECK(bernoulli(x) == Approx(x / std::expm1(x)).epsilon(1e-13));
  }
}

TEST_CASE("solver configuration") {
  CHECK_THROWS_AS(SolverConfig({0.0, 1.0}).validate(), DomainError);
  CHECK_THROWS_AS(SolverConfig({0.1, 0.05}).validate(), DomainError);
  const std::vector<double> t = SolverConfig{0.3, 1.0}.time_grid();
  REQUIRE(t.size() == 5);
  CHECK(t.front() == 0.0);
  CHECK(t.back() == 1.0);
  CHECK(t[3] == Approx(0.9));
  for (const char* name : {"strang_exact_reaction", "imex_euler", "strang_crank_nicolson"})
    CHECK(to_string(parse_scheme(name)) == name);
  CHECK_THROWS_AS(parse_scheme("rk4"), DomainError);
}

TEST_CASE("stationary measure is a fixed point") {
  const Grid g(50);
  const Tilt tilt = cosine_tilt();
  const State w(g, stationary_measure(g, kRef, tilt).cells);
  for (Scheme scheme : {Scheme::StrangExactReaction, Scheme::StrangCrankNicolson}) {
    const Trajectory tr = solve_eps_system(w, kRef.with_epsilon(1e-3), tilt, {1e-3, 0.05, scheme});
    CHECK(max_abs_diff(tr.back(), w) < 1e-12);
  }
}

TEST_CASE("uniform equilibrium without a tilt stays put") {
  const Grid g(20);
  State c(g, 2);
  for (std::size_t k = 0; k < 20; ++k) {
    c(0, k) = 0.75;
    c(1, k) = 0.25;
  }
  const Trajectory tr = solve_eps_system(c, kRef.with_epsilon(1e-4), Tilt::zero(), {1e-2, 0.1});
  CHECK(max_abs_diff(tr.back(), c) < 1e-14);
}

TEST_CASE("mass and positivity") {
  const Grid g(60);
  const Tilt tilt = cosine_tilt();
  State c0(g, 2, 0.0);
  for (std::size_t k = 0; k < 10; ++k) c0(0, k) = 6.0;
  for (double eps : {1.0, 1e-2, 1e-5}) {
    const Trajectory tr = solve_eps_system(c0, kRef.with_epsilon(eps), tilt, {2e-3, 0.05});
    for (const State& s : tr.states()) {
      CHECK(s.min_value() >= 0.0);
      CHECK(total_mass(s) == Approx(total_mass(c0)).epsilon(1e-13));
    }
    CHECK(max_gce_residual(tr) < 1e-10);
  }
}

TEST_CASE("equal diffusivities decouple the coarse density from epsilon") {
  const SystemParams p({1.5, 1.5}, 1.0, 3.0, 1.0);
  const Grid g(40);
  const State c0 = split_bump(g);
  const SolverConfig cfg{1e-3, 0.03};
  const State ref = coarse_grain(solve_eps_system(c0, p, Tilt::zero(), cfg).back());
  for (double eps : {0.1, 1e-4}) {
    const State other = coarse_grain(solve_eps_system(c0, p.with_epsilon(eps), Tilt::zero(), cfg).back());
    CHECK(max_abs_diff(ref, other) < 1e-12);
  }
  const Trajectory eff = solve_effective(coarse_grain(c0), p, Tilt::zero(), cfg);
  CHECK(max_abs_diff(ref, eff.back()) < 1e-12);
}

TEST_CASE("coarse density approaches the effective solution as epsilon shrinks") {
  const Grid g(50);
  const Tilt tilt = cosine_tilt();
  const State c0 = split_bump(g);
  const SolverConfig cfg{1e-4, 0.02};
  const State eff = solve_effective(coarse_grain(c0), kRef, tilt, cfg).back();
  double previous = 1e300;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const double d = l1_distance(coarse_grain(solve_eps_system(c0, kRef.with_epsilon(eps), tilt, cfg).back()), eff);
    CHECK(d < previous);
    previous = d;
  }
  CHECK(previous < 1e-3);
}

TEST_CASE("implicit-explicit scheme enforces its stability limit") {
  const Grid g(20);
  const State c0 = split_bump(g);
  CHECK_THROWS_AS(solve_eps_system(c0, kRef.with_epsilon(1e-3), Tilt::zero(), {1e-2, 0.1, Scheme::ImexEuler}),
                  IntegrationError);
  const Trajectory tr = solve_eps_system(c0, kRef.with_epsilon(0.5), Tilt::zero(), {1e-2, 0.1, Scheme::ImexEuler});
  CHECK(total_mass(tr.back()) == Approx(1.0).epsilon(1e-13));
}

TEST_CASE("initial state validation") {
  const Grid g(10);
  CHECK_THROWS_AS(solve_eps_system(State(g, 1, 1.0), kRef, Tilt::zero(), {0.1, 0.1}), ShapeError);
  State neg(g, 2, 0.5);
  neg(1, 3) = -1e-9;
  CHECK_THROWS_AS(solve_eps_system(neg, kRef, Tilt::zero(), {0.1, 0.1}), DomainError);
  CHECK_THROWS_AS(solve_effective(State(g, 2, 0.5), kRef, Tilt::zero(), {0.1, 0.1}), ShapeError);
}

TEST_CASE("Crank-Nicolson converges faster in time") {
  const Grid g(40);
  const State c0 = split_bump(g);
  const SystemParams p = kRef.with_epsilon(0.2);
  const State ref = solve_eps_system(c0, p, Tilt::zero(), {1e-4, 0.04, Scheme::StrangCrankNicolson}).back();
  const double be = max_abs_diff(solve_eps_system(c0, p, Tilt::zero(), {4e-3, 0.04}).back(), ref);
  const double cn =
      max_abs_diff(solve_eps_system(c0, p, Tilt::zero(), {4e-3, 0.04, Scheme::StrangCrankNicolson}).back(), ref);
  CHECK(cn < 0.2 * be);
}

TEST_CASE("Lagrange multipliers without a tilt") {
  const std::size_t n = 200;
  const Grid g(n);
  State hat(g, 1);
  for (std::size_t k = 0; k < n; ++k) hat(0, k) = 1.0 + 0.4 * std::cos(kPi * g.center(k));
  const LagrangeMultipliers lm = lagrange_multipliers(hat, kRef, Tilt::zero());
  CHECK(lagrange_sum_defect(lm) < 1e-9);
  // lambda1 = -w1 w2 (delta1 - delta2) c_hat'' with w = (3/4, 1/4).
  const double pref = -0.75 * 0.25 * (1.0 - 2.0);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double exact = pref * (-0.4 * kPi * kPi * std::cos(kPi * g.center(k)));
    CHECK(lm.lambda1[k] == Approx(exact).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("Lagrange multipliers vanish for identical species") {
  const SystemParams p({1.3, 1.3}, 2.0, 2.0, 1.0);
  const Tilt common({[](double x) { return std::sin(3.0 * x); }, [](double x) { return std::sin(3.0 * x); }});
  const Grid g(30);
  State hat(g, 1);
  for (std::size_t k = 0; k < 30; ++k) hat(0, k) = 1.0 + 0.5 * g.center(k) * g.center(k);
  const LagrangeMultipliers lm = lagrange_multipliers(hat, p, common);
  for (std::size_t k = 0; k < 30; ++k) {
    CHECK(std::abs(lm.lambda1[k]) < 1e-12);
    CHECK(std::abs(lm.lambda2[k]) < 1e-12);
  }
  CHECK_THROWS_AS(lagrange_multipliers(State(Grid(3), 1, 1.0), p, common), ShapeError);
}

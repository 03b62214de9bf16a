#include "edpflow/multispecies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <unsupported/Eigen/MatrixFunctions>

#include "edpflow/errors.hpp"

namespace edpflow {

Eigen::MatrixXd MarkovGenerator::assemble(double epsilon) const {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  return A_slow + A_fast / epsilon;
}

MarkovGenerator MarkovGenerator::two_species(const SystemParams& params) {
  const double a = std::sqrt(params.alpha() / params.beta());
  const double b = std::sqrt(params.beta() / params.alpha());
  MarkovGenerator g;
  g.species = {"X1", "X2"};
  g.A_slow = Eigen::MatrixXd::Zero(2, 2);
  g.A_fast.resize(2, 2);
  g.A_fast << -a, b, a, -b;
  g.delta = {params.delta()[0], params.delta()[1]};
  return g;
}

namespace {

Eigen::MatrixXd parse_matrix(const nlohmann::json& j, std::size_t n, bool& ok) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (!j.is_array() || j.size() != n) {
    ok = false;
    return m;
  }
  for (std::size_t r = 0; r < n; ++r) {
    if (!j[r].is_array() || j[r].size() != n) {
      ok = false;
      return m;
    }
    for (std::size_t c = 0; c < n; ++c) {
      if (!j[r][c].is_number() || !std::isfinite(j[r][c].get<double>())) {
        ok = false;
        return m;
      }
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

}  // namespace

MarkovGenerator MarkovGenerator::from_json(const nlohmann::json& doc) {
  std::vector<std::string> bad;
  if (!doc.is_object()) throw ConfigError("generator document must be a JSON object", {"<root>"});
  static const std::set<std::string> allowed{"species", "A_slow", "A_fast", "delta"};
  for (const auto& [key, _] : doc.items())
    if (!allowed.count(key)) bad.push_back(key);
  for (const auto& key : allowed)
    if (!doc.contains(key)) bad.push_back(key);
  if (!bad.empty()) throw ConfigError("generator: unknown or missing keys", bad);

  MarkovGenerator g;
  const auto& sp = doc["species"];
  std::set<std::string> seen;
  if (!sp.is_array() || sp.size() < 2) {
    bad.push_back("species");
  } else {
    for (const auto& s : sp) {
      if (!s.is_string() || s.get<std::string>().empty() || !seen.insert(s.get<std::string>()).second) {
        bad.push_back("species");
        break;
      }
      g.species.push_back(s.get<std::string>());
    }
  }
  if (!bad.empty()) throw ConfigError("generator: species must be at least two distinct names", bad);
  const std::size_t n = g.species.size();
  bool ok = true;
  g.A_slow = parse_matrix(doc["A_slow"], n, ok);
  if (!ok) bad.push_back("A_slow");
  ok = true;
  g.A_fast = parse_matrix(doc["A_fast"], n, ok);
  if (!ok) bad.push_back("A_fast");
  const auto& d = doc["delta"];
  if (!d.is_array() || d.size() != n) {
    bad.push_back("delta");
  } else {
    for (const auto& x : d) {
      if (!x.is_number() || !(x.get<double>() > 0.0) || !std::isfinite(x.get<double>())) {
        bad.push_back("delta");
        break;
      }
      g.delta.push_back(x.get<double>());
    }
  }
  if (!bad.empty()) throw ConfigError("generator: malformed fields", bad);
  return g;
}

nlohmann::json MarkovGenerator::to_json() const {
  auto rows = [](const Eigen::MatrixXd& m) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      a.push_back(row);
    }
    return a;
  };
  return {{"species", species}, {"A_slow", rows(A_slow)}, {"A_fast", rows(A_fast)}, {"delta", delta}};
}

Eigen::VectorXd stationary_vector(const Eigen::MatrixXd& A) {
  // Grassmann-Taksar-Heyman elimination: subtraction-free, so small rates keep their
  // relative accuracy next to large ones. p(i, j) is the rate from i to j.
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd p = A.transpose();
  for (Eigen::Index k = n - 1; k > 0; --k) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) s += p(k, j);
    if (!(s > 0.0)) throw DomainError("generator has no unique stationary vector");
    for (Eigen::Index i = 0; i < k; ++i) p(i, k) /= s;
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j)
        if (i != j) p(i, j) += p(i, k) * p(k, j);
  }
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  w(0) = 1.0;
  for (Eigen::Index k = 1; k < n; ++k)
    for (Eigen::Index i = 0; i < k; ++i) w(k) += w(i) * p(i, k);
  return w / w.sum();
}

namespace {

double detailed_balance_error(const Eigen::MatrixXd& A, const Eigen::VectorXd& w) {
  double worst = 0.0;
  const double floor = 1e-15 * A.cwiseAbs().maxCoeff() * w.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = i + 1; j < A.cols(); ++j) {
      const double p = A(i, j) * w(j);
      const double q = A(j, i) * w(i);
      worst = std::max(worst, std::abs(p - q) / std::max(std::abs(p) + std::abs(q), floor));
    }
  return worst;
}

void check_markov(const Eigen::MatrixXd& A, const std::string& name, std::vector<std::string>& failures) {
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < A.cols(); ++j)
      if (i != j && A(i, j) < 0.0)
        failures.push_back(name + ": negative off-diagonal entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
  for (Eigen::Index j = 0; j < A.cols(); ++j)
    if (std::abs(A.col(j).sum()) > 1e-12 * scale)
      failures.push_back(name + ": column " + std::to_string(j) + " does not sum to zero");
}

}  // namespace

GeneratorReport validate_generator(const MarkovGenerator& gen, const std::vector<double>& eps_sweep) {
  GeneratorReport rep;
  rep.eps_sweep = eps_sweep;
  const auto n = static_cast<Eigen::Index>(gen.size());
  if (n < 2 || gen.A_slow.rows() != n || gen.A_slow.cols() != n || gen.A_fast.rows() != n ||
      gen.A_fast.cols() != n || gen.delta.size() != gen.size()) {
    rep.valid = false;
    rep.failures.push_back("shape: matrices, species and delta disagree in size");
    return rep;
  }
  check_markov(gen.A_slow, "A_slow", rep.failures);
  check_markov(gen.A_fast, "A_fast", rep.failures);
  for (double d : gen.delta)
    if (!(d > 0.0)) rep.failures.push_back("delta: diffusion constants must be positive");

  if (rep.failures.empty()) {
    for (double eps : eps_sweep) {
      Eigen::VectorXd w;
      try {
        w = stationary_vector(gen.assemble(eps));
      } catch (const DomainError& e) {
        rep.failures.push_back("eps=" + std::to_string(eps) + ": " + e.what());
        continue;
      }
      if (w.minCoeff() <= 0.0) rep.failures.push_back("eps=" + std::to_string(eps) + ": stationary vector not positive");
      const double err = detailed_balance_error(gen.assemble(eps), w);
      rep.max_detailed_balance_error = std::max(rep.max_detailed_balance_error, err);
      if (err > kDetailedBalanceTolerance)
        rep.failures.push_back("eps=" + std::to_string(eps) + ": detailed balance violated (relative error " +
                               std::to_string(err) + ")");
      rep.w_eps.push_back(std::move(w));
    }
    if (rep.w_eps.size() == eps_sweep.size() && !eps_sweep.empty()) {
      rep.w_limit = rep.w_eps.back();
      if (rep.w_limit.minCoeff() <= 0.0) rep.failures.push_back("limit stationary vector is not positive");
      // successive differences must shrink and end small
      double prev = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k + 1 < rep.w_eps.size(); ++k) {
        const double diff = (rep.w_eps[k + 1] - rep.w_eps[k]).cwiseAbs().maxCoeff();
        if (diff > prev * (1.0 + 1e-9) + 1e-14) {
          rep.failures.push_back("stationary vectors do not settle as eps decreases");
          break;
        }
        prev = diff;
      }
      if (rep.w_eps.size() >= 2 && prev > 1e-3) rep.failures.push_back("stationary vectors have not converged");
    }
  }
  rep.valid = rep.failures.empty();
  return rep;
}

KappaCoefficients kappa_coefficients(const MarkovGenerator& gen, double epsilon) {
  const Eigen::MatrixXd A = gen.assemble(epsilon);
  KappaCoefficients k;
  k.w = stationary_vector(A);
  if (k.w.minCoeff() <= 0.0) throw DomainError("stationary vector is not positive");
  if (detailed_balance_error(A, k.w) > kDetailedBalanceTolerance)
    throw DomainError("generator violates detailed balance");
  const auto n = A.rows();
  k.kappa = Eigen::MatrixXd::Zero(n, n);
  k.slow = Eigen::MatrixXd::Zero(n, n);
  k.fast = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double r = std::sqrt(k.w(j) / k.w(i));
      k.kappa(i, j) = A(i, j) * r;
      k.slow(i, j) = gen.A_slow(i, j) * r;
      k.fast(i, j) = gen.A_fast(i, j) * r;
    }
  return k;
}

std::vector<ReactionEdge> reaction_edges(const MarkovGenerator& gen, double epsilon) {
  const KappaCoefficients k = kappa_coefficients(gen, epsilon);
  std::vector<ReactionEdge> edges;
  for (Eigen::Index i = 0; i < k.kappa.rows(); ++i)
    for (Eigen::Index j = i + 1; j < k.kappa.cols(); ++j) {
      const double kap = 0.5 * (k.kappa(i, j) + k.kappa(j, i));
      if (kap <= 0.0) continue;
      const bool fast = gen.A_fast(i, j) > 0.0 || gen.A_fast(j, i) > 0.0;
      edges.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), kap, fast});
    }
  return edges;
}

MultispeciesBreakdown multispecies_dissipation(const Trajectory& traj, const MarkovGenerator& gen, double epsilon,
                                               const Tilt& tilt, const DualOptions& options) {
  if (traj.n_species() != gen.size()) throw ShapeError("trajectory and generator disagree on species count");
  const auto edges = reaction_edges(gen, epsilon);
  const KappaCoefficients k = kappa_coefficients(gen, epsilon);
  const std::vector<double> w(k.w.data(), k.w.data() + k.w.size());
  const StationaryMeasure wv = stationary_measure(traj.grid(), w, tilt);
  const double h = traj.grid().h();
  MultispeciesBreakdown out;
  for (std::size_t m = 0; m < traj.n_intervals(); ++m) {
    const State& c = traj.state(m);
    const double dt = traj.dt(m);
    const PrimalResult r = primal_R(c, gen.delta, edges, interval_rate(traj, m), options);
    out.total.vel_diff += dt * diffusion_flux_cost(c, gen.delta, r.flux.J);
    for (const ReactionEdge& e : edges) {
      double cost = 0.0;
      for (std::size_t q = 0; q < c.n_cells(); ++q) {
        const double a = e.kappa * std::sqrt(std::max(0.0, c(e.i, q) * c(e.j, q)));
        const double flux = a * cosh_pair::dual_prime(r.dual.xi(e.i, q) - r.dual.xi(e.j, q));
        cost += h * perspective(PerspectiveBase::Cosh, a, flux);
      }
      (e.fast ? out.vel_react_fast : out.vel_react_slow) += dt * cost;
      out.total.vel_react += dt * cost;
    }
    const SlopeTerms s = slope(c, gen.delta, edges, wv);
    out.total.slope_diff += dt * s.diff;
    out.total.slope_react += dt * s.react;
    for (std::size_t e = 0; e < edges.size(); ++e)
      (edges[e].fast ? out.slope_react_fast : out.slope_react_slow) += dt * s.per_edge[e];
  }
  return out;
}

Trajectory solve_multispecies(const State& initial, const MarkovGenerator& gen, double epsilon, const Tilt& tilt,
                              const SolverConfig& config) {
  const std::size_t ns = gen.size();
  if (initial.n_species() != ns) throw ShapeError("initial state has the wrong number of species");
  if (!initial.is_finite() || initial.min_value() < 0.0) throw DomainError("initial state must be finite and nonnegative");
  const Grid& g = initial.grid();
  const std::size_t n = g.n_cells();
  const std::vector<double> times = config.time_grid();
  const SampledTilt v = tilt.sample(g, ns);
  const Eigen::MatrixXd A = gen.assemble(epsilon);

  auto tilted = [&](std::size_t k) {
    Eigen::MatrixXd B = A;
    for (Eigen::Index i = 0; i < B.rows(); ++i)
      for (Eigen::Index j = 0; j < B.cols(); ++j)
        if (i != j) B(i, j) *= std::exp(0.5 * (v.cells(static_cast<std::size_t>(j), k) - v.cells(static_cast<std::size_t>(i), k)));
    for (Eigen::Index j = 0; j < B.cols(); ++j) B(j, j) = -(B.col(j).sum() - B(j, j));
    return B;
  };

  std::vector<double> diff_faces;
  Trajectory traj(g, ns);
  traj.push_back(times[0], initial);
  State c = initial;
  State next(g, ns);
  std::vector<Eigen::MatrixXd> propagator(n);
  double cached_dt = -1.0;
  for (std::size_t m = 0; m + 1 < times.size(); ++m) {
    const double dt = times[m + 1] - times[m];
    if (dt != cached_dt) {
      for (std::size_t k = 0; k < n; ++k) propagator[k] = (tilted(k) * (0.5 * dt)).exp();
      cached_dt = dt;
    }
    FluxAssignment f(g, ns);
    auto react = [&]() {
      for (std::size_t k = 0; k < n; ++k) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(ns));
        for (std::size_t i = 0; i < ns; ++i) x(static_cast<Eigen::Index>(i)) = c(i, k);
        const Eigen::VectorXd y = propagator[k] * x;
        for (std::size_t i = 0; i < ns; ++i) {
          const double ynew = y(static_cast<Eigen::Index>(i));
          f.b(i, k) += (ynew - c(i, k)) / dt;
          c(i, k) = ynew;
        }
      }
    };
    react();
    for (std::size_t i = 0; i < ns; ++i) {
      diff_faces.assign(n + 1, gen.delta[i]);
      drift_diffusion_step(g, diff_faces, v.cells.species(i), dt, 1.0, c.species(i), next.species(i), f.J.species(i));
    }
    std::swap(c, next);
    react();
    if (!c.is_finite()) throw IntegrationError("non-finite state", m);
    traj.push_back(times[m + 1], c, std::move(f));
  }
  return traj;
}

MarkovGenerator random_detailed_balance_generator(std::size_t n_species, std::uint64_t seed,
                                                  const std::vector<std::pair<std::size_t, std::size_t>>& fast_edges) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.5, 2.0);
  const auto n = static_cast<Eigen::Index>(n_species);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = unit(rng);
  w /= w.sum();
  MarkovGenerator g;
  g.A_slow = Eigen::MatrixXd::Zero(n, n);
  g.A_fast = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double s = unit(rng);
      const bool fast = std::any_of(fast_edges.begin(), fast_edges.end(), [&](const auto& e) {
        return (static_cast<Eigen::Index>(e.first) == i && static_cast<Eigen::Index>(e.second) == j) ||
               (static_cast<Eigen::Index>(e.first) == j && static_cast<Eigen::Index>(e.second) == i);
      });
      Eigen::MatrixXd& A = fast ? g.A_fast : g.A_slow;
      A(i, j) = s * std::sqrt(w(i) / w(j));
      A(j, i) = s * std::sqrt(w(j) / w(i));
    }
  for (Eigen::MatrixXd* A : {&g.A_slow, &g.A_fast})
    for (Eigen::Index j = 0; j < n; ++j) (*A)(j, j) = -(A->col(j).sum());
  for (std::size_t i = 0; i < n_species; ++i) {
    g.species.push_back("X" + std::to_string(i + 1));
    g.delta.push_back(unit(rng));
  }
  return g;
}

}  // namespace edpflow
